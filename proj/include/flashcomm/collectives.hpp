#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "flashcomm/codec.hpp"
#include "flashcomm/topology.hpp"

namespace flashcomm {

// Raw-equivalent volumes are counted in BF16 bytes.
inline constexpr std::uint64_t kRawBytesPerElement = 2;

struct StageInfo {
  std::string name;
  bool quantized = false;  // sender quantizes, receiver dequantizes
  bool reduces = false;    // receiver reduces into its accumulator
};

struct TransferEvent {
  int stage = 0;
  int src = 0;
  int dst = 0;
  std::uint64_t elements = 0;
  std::uint64_t raw_bytes = 0;
  std::uint64_t actual_bytes = 0;
};

struct ByteCount {
  std::uint64_t raw = 0;
  std::uint64_t actual = 0;
};

// Per-transfer log plus per-(link, direction) counters. Doubles as the trace
// consumed by the scheduler.
class TrafficLedger {
 public:
  TrafficLedger() = default;
  explicit TrafficLedger(const Topology& topo);

  int add_stage(StageInfo info);
  void record(int stage, int src, int dst, std::uint64_t elements, std::uint64_t actual_bytes);

  const std::vector<StageInfo>& stages() const { return stages_; }
  const std::vector<TransferEvent>& events() const { return events_; }
  // Indexed [link][direction].
  const std::vector<std::array<ByteCount, 2>>& link_bytes() const { return links_; }

  ByteCount total() const;
  // Bytes leaving / entering devices, summed over all devices.
  ByteCount device_egress() const { return egress_; }
  ByteCount device_ingress() const { return ingress_; }

 private:
  std::vector<StageInfo> stages_;
  std::vector<TransferEvent> events_;
  std::vector<std::array<ByteCount, 2>> links_;
  std::vector<std::vector<std::vector<Hop>>> routes_;
  ByteCount egress_;
  ByteCount ingress_;
};

struct CollectiveResult {
  std::vector<std::vector<float>> outputs;
  TrafficLedger ledger;
};

using RankPayloads = std::vector<std::vector<float>>;

// Ring reduce-scatter + ring all-gather over ranks 0..N-1 with BF16 on the
// wire. Partial sums are rounded to BF16 at every hop.
CollectiveResult ring_allreduce_ref(const RankPayloads& ranks, const Topology& topo);

// Quantized all-to-all reduce-scatter followed by a quantized all-gather.
CollectiveResult two_step_allreduce_q(const RankPayloads& ranks, const Topology& topo,
                                      const QuantConfig& config);

// Two-step within each NUMA group with a paired half-shard exchange across
// the bridge in between. Needs two NUMA groups of equal size and one rank
// per device.
CollectiveResult hierarchical_two_step_q(const RankPayloads& ranks, const Topology& topo,
                                         const QuantConfig& config);

// counts[i][j] = elements rank i sends rank j; rank i's payload is the
// concatenation of its row's blocks.
using DispatchMatrix = std::vector<std::vector<std::size_t>>;

DispatchMatrix uniform_dispatch(std::size_t ranks, std::size_t elements_per_rank);

// Only the dispatch direction is quantized. Output j is the concatenation of
// the blocks received from ranks 0..N-1 (the diagonal block is copied).
CollectiveResult all2all_dispatch_q(const RankPayloads& ranks, const Topology& topo,
                                    const QuantConfig& config, const DispatchMatrix& counts);

struct LinkVolume {
  std::size_t link = 0;
  int direction = 0;
  LinkKind kind = LinkKind::PCIe;
  ByteCount bytes;
};

struct VolumeReport {
  ByteCount total;
  ByteCount cross_numa;  // max over the two bridge directions
  std::vector<LinkVolume> per_link;
};

VolumeReport volume_report(const TrafficLedger& ledger, const Topology& topo);

}  // namespace flashcomm
