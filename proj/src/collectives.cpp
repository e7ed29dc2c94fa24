#include "flashcomm/collectives.hpp"

#include <algorithm>
#include <span>
#include <string>

#include "flashcomm/error.hpp"

namespace flashcomm {

namespace {

std::size_t common_length(const RankPayloads& ranks) {
  if (ranks.empty()) throw InvalidData("no ranks");
  const std::size_t n = ranks.front().size();
  for (const auto& r : ranks) {
    if (r.size() != n) throw InvalidData("ranks hold payloads of different lengths");
  }
  return n;
}

void check_rank_count(const RankPayloads& ranks, const Topology& topo) {
  if (ranks.size() > topo.size()) {
    throw InvalidConfig(std::to_string(ranks.size()) + " ranks do not fit " +
                        std::to_string(topo.size()) + " devices");
  }
}

std::size_t round_up(std::size_t n, std::size_t m) { return (n + m - 1) / m * m; }

RankPayloads padded(const RankPayloads& ranks, std::size_t length) {
  RankPayloads out = ranks;
  for (auto& r : out) r.resize(length, 0.0f);
  return out;
}

void strip(std::vector<std::vector<float>>& outputs, std::size_t length) {
  for (auto& o : outputs) o.resize(length);
}

// A quantized message: the serialized chunks plus their decoded values.
struct Message {
  std::vector<QuantizedChunk> chunks;
  std::vector<float> values;
  std::uint64_t bytes = 0;
};

Message quantize(std::span<const float> values, const QuantConfig& config) {
  Message m;
  m.chunks = encode_block(values, config);
  for (const auto& c : m.chunks) m.bytes += c.payload_bytes();
  m.values = decode_block(m.chunks);
  return m;
}

void accumulate(std::span<float> acc, std::span<const float> x) {
  for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += x[i];
}

void round_all_to_bf16(std::span<float> v) {
  for (auto& x : v) x = round_to_bf16(x);
}

}  // namespace

TrafficLedger::TrafficLedger(const Topology& topo) : links_(topo.links.size()) {
  routes_.resize(topo.size());
  for (std::size_t s = 0; s < topo.size(); ++s) {
    routes_[s].resize(topo.size());
    for (std::size_t d = 0; d < topo.size(); ++d) {
      routes_[s][d] = topo.route(static_cast<int>(s), static_cast<int>(d));
    }
  }
}

int TrafficLedger::add_stage(StageInfo info) {
  stages_.push_back(std::move(info));
  return static_cast<int>(stages_.size()) - 1;
}

void TrafficLedger::record(int stage, int src, int dst, std::uint64_t elements,
                           std::uint64_t actual_bytes) {
  if (stage < 0 || static_cast<std::size_t>(stage) >= stages_.size()) {
    throw InvalidConfig("unknown stage");
  }
  if (src == dst || elements == 0) return;
  TransferEvent e{stage, src, dst, elements, elements * kRawBytesPerElement, actual_bytes};
  events_.push_back(e);
  egress_.raw += e.raw_bytes;
  egress_.actual += e.actual_bytes;
  ingress_.raw += e.raw_bytes;
  ingress_.actual += e.actual_bytes;
  if (routes_.empty()) return;
  for (const auto& hop : routes_[static_cast<std::size_t>(src)][static_cast<std::size_t>(dst)]) {
    auto& c = links_[hop.link][static_cast<std::size_t>(hop.direction)];
    c.raw += e.raw_bytes;
    c.actual += e.actual_bytes;
  }
}

ByteCount TrafficLedger::total() const {
  ByteCount t;
  for (const auto& e : events_) {
    t.raw += e.raw_bytes;
    t.actual += e.actual_bytes;
  }
  return t;
}

CollectiveResult ring_allreduce_ref(const RankPayloads& ranks, const Topology& topo) {
  check_rank_count(ranks, topo);
  const std::size_t n = ranks.size();
  const std::size_t len = common_length(ranks);
  const std::size_t plen = round_up(len, n);
  const std::size_t shard = plen / n;
  RankPayloads buf = padded(ranks, plen);

  CollectiveResult result{{}, TrafficLedger(topo)};
  auto& ledger = result.ledger;
  const auto raw = [](std::size_t elems) { return elems * kRawBytesPerElement; };

  // Reduce-scatter: at step s rank r forwards chunk (r - s) mod N to r + 1.
  for (std::size_t s = 0; s + 1 < n; ++s) {
    const int stage = ledger.add_stage({"RS" + std::to_string(s), false, true});
    std::vector<std::vector<float>> sent(n);
    for (std::size_t r = 0; r < n; ++r) {
      const std::size_t c = (r + n - s) % n;
      sent[r].assign(buf[r].begin() + c * shard, buf[r].begin() + (c + 1) * shard);
      round_all_to_bf16(sent[r]);
      ledger.record(stage, static_cast<int>(r), static_cast<int>((r + 1) % n), shard, raw(shard));
    }
    for (std::size_t r = 0; r < n; ++r) {
      const std::size_t to = (r + 1) % n;
      const std::size_t c = (r + n - s) % n;
      accumulate(std::span<float>(buf[to]).subspan(c * shard, shard), sent[r]);
    }
  }
  // Rank r now owns chunk (r + 1) mod N.
  for (std::size_t r = 0; r < n; ++r) {
    const std::size_t c = (r + 1) % n;
    round_all_to_bf16(std::span<float>(buf[r]).subspan(c * shard, shard));
  }
  for (std::size_t s = 0; s + 1 < n; ++s) {
    const int stage = ledger.add_stage({"AG" + std::to_string(s), false, false});
    std::vector<std::vector<float>> sent(n);
    for (std::size_t r = 0; r < n; ++r) {
      const std::size_t c = (r + 1 + n - s) % n;
      sent[r].assign(buf[r].begin() + c * shard, buf[r].begin() + (c + 1) * shard);
      ledger.record(stage, static_cast<int>(r), static_cast<int>((r + 1) % n), shard, raw(shard));
    }
    for (std::size_t r = 0; r < n; ++r) {
      const std::size_t to = (r + 1) % n;
      const std::size_t c = (r + 1 + n - s) % n;
      std::copy(sent[r].begin(), sent[r].end(), buf[to].begin() + c * shard);
    }
  }
  result.outputs = std::move(buf);
  strip(result.outputs, len);
  return result;
}

CollectiveResult two_step_allreduce_q(const RankPayloads& ranks, const Topology& topo,
                                      const QuantConfig& config) {
  config.validate();
  check_rank_count(ranks, topo);
  const std::size_t n = ranks.size();
  const std::size_t len = common_length(ranks);
  const std::size_t plen = round_up(len, n * static_cast<std::size_t>(config.group_size));
  const std::size_t shard = plen / n;
  const RankPayloads buf = padded(ranks, plen);

  CollectiveResult result{{}, TrafficLedger(topo)};
  auto& ledger = result.ledger;
  const int rs = ledger.add_stage({"RS", true, true});
  const int ag = ledger.add_stage({"AG", true, false});

  // Stage 1: shard j of every rank goes to rank j, which reduces in rank order.
  std::vector<std::vector<float>> reduced(n, std::vector<float>(shard, 0.0f));
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t r = 0; r < n; ++r) {
      const auto piece = std::span<const float>(buf[r]).subspan(j * shard, shard);
      if (r == j) {
        accumulate(reduced[j], piece);
        continue;
      }
      const Message m = quantize(piece, config);
      ledger.record(rs, static_cast<int>(r), static_cast<int>(j), shard, m.bytes);
      accumulate(reduced[j], m.values);
    }
  }

  // Stage 2: every owner broadcasts its quantized shard; the owner keeps the
  // dequantized copy too so all ranks agree.
  result.outputs.assign(n, std::vector<float>(plen, 0.0f));
  for (std::size_t j = 0; j < n; ++j) {
    Message m = quantize(reduced[j], config);
    round_all_to_bf16(m.values);
    for (std::size_t r = 0; r < n; ++r) {
      if (r != j) ledger.record(ag, static_cast<int>(j), static_cast<int>(r), shard, m.bytes);
      std::copy(m.values.begin(), m.values.end(), result.outputs[r].begin() + j * shard);
    }
  }
  strip(result.outputs, len);
  return result;
}

CollectiveResult hierarchical_two_step_q(const RankPayloads& ranks, const Topology& topo,
                                         const QuantConfig& config) {
  config.validate();
  const NumaPartition part = cross_numa_partition(topo);
  if (part.groups.size() != 2 || part.groups[0].size() != part.groups[1].size() ||
      part.groups[0].empty()) {
    throw NotApplicable("hierarchical two-step needs two NUMA groups of equal size");
  }
  if (ranks.size() != topo.size()) {
    throw InvalidConfig("hierarchical two-step needs one rank per device");
  }
  const std::size_t g = part.groups[0].size();
  const std::size_t len = common_length(ranks);
  const std::size_t plen = round_up(len, 2 * g * static_cast<std::size_t>(config.group_size));
  const std::size_t shard = plen / g;
  const std::size_t half = shard / 2;
  const RankPayloads buf = padded(ranks, plen);

  CollectiveResult result{{}, TrafficLedger(topo)};
  auto& ledger = result.ledger;
  const int rs = ledger.add_stage({"RS", true, true});
  const int xs = ledger.add_stage({"X-send", true, true});
  const int xr = ledger.add_stage({"X-return", true, false});
  const int ag = ledger.add_stage({"AG", false, false});

  // Stage A: partial reduce-scatter inside each group. The member at
  // position p of a group collects shard p.
  std::vector<std::vector<std::vector<float>>> partial(
      2, std::vector<std::vector<float>>(g, std::vector<float>(shard, 0.0f)));
  for (std::size_t grp = 0; grp < 2; ++grp) {
    const auto& members = part.groups[grp];
    for (std::size_t p = 0; p < g; ++p) {
      for (std::size_t q = 0; q < g; ++q) {
        const auto src = static_cast<std::size_t>(members[q]);
        const auto piece = std::span<const float>(buf[src]).subspan(p * shard, shard);
        if (q == p) {
          accumulate(partial[grp][p], piece);
          continue;
        }
        const Message m = quantize(piece, config);
        ledger.record(rs, members[q], members[p], shard, m.bytes);
        accumulate(partial[grp][p], m.values);
      }
    }
  }

  // Stage B: members at the same position pair up across the bridge. Group
  // 0 reduces half 0 of the shard, group 1 reduces half 1; each returns its
  // reduced half in quantized form.
  std::vector<std::vector<QuantizedChunk>> shard_chunks(g);
  std::vector<std::uint64_t> shard_bytes(g, 0);
  for (std::size_t p = 0; p < g; ++p) {
    std::array<std::vector<float>, 2> reduced_half;
    for (std::size_t keep = 0; keep < 2; ++keep) {
      const std::size_t other = 1 - keep;
      const auto mine = std::span<const float>(partial[keep][p]).subspan(keep * half, half);
      const auto theirs = std::span<const float>(partial[other][p]).subspan(keep * half, half);
      const Message m = quantize(theirs, config);
      ledger.record(xs, part.groups[other][p], part.groups[keep][p], half, m.bytes);
      // Group 0's contribution is always added first.
      reduced_half[keep].assign(half, 0.0f);
      if (keep == 0) {
        accumulate(reduced_half[keep], mine);
        accumulate(reduced_half[keep], m.values);
      } else {
        accumulate(reduced_half[keep], m.values);
        accumulate(reduced_half[keep], mine);
      }
    }
    for (std::size_t keep = 0; keep < 2; ++keep) {
      auto chunks = encode_block(reduced_half[keep], config);
      std::uint64_t bytes = 0;
      for (const auto& c : chunks) bytes += c.payload_bytes();
      ledger.record(xr, part.groups[keep][p], part.groups[1 - keep][p], half, bytes);
      shard_bytes[p] += bytes;
      for (auto& c : chunks) shard_chunks[p].push_back(std::move(c));
    }
  }

  // Stage C: the quantized shard bytes are forwarded unchanged within each
  // group, so every rank decodes the same bytes.
  result.outputs.assign(topo.size(), std::vector<float>(plen, 0.0f));
  for (std::size_t p = 0; p < g; ++p) {
    auto values = decode_block(shard_chunks[p]);
    round_all_to_bf16(values);
    for (std::size_t grp = 0; grp < 2; ++grp) {
      const auto& members = part.groups[grp];
      for (std::size_t q = 0; q < g; ++q) {
        if (q != p) ledger.record(ag, members[p], members[q], shard, shard_bytes[p]);
        auto& out = result.outputs[static_cast<std::size_t>(members[q])];
        std::copy(values.begin(), values.end(), out.begin() + p * shard);
      }
    }
  }
  strip(result.outputs, len);
  return result;
}

DispatchMatrix uniform_dispatch(std::size_t ranks, std::size_t elements_per_rank) {
  if (ranks == 0 || elements_per_rank % ranks != 0) {
    throw InvalidConfig("elements per rank must divide evenly among ranks");
  }
  return DispatchMatrix(ranks, std::vector<std::size_t>(ranks, elements_per_rank / ranks));
}

CollectiveResult all2all_dispatch_q(const RankPayloads& ranks, const Topology& topo,
                                    const QuantConfig& config, const DispatchMatrix& counts) {
  config.validate();
  check_rank_count(ranks, topo);
  const std::size_t n = ranks.size();
  if (counts.size() != n) throw InvalidConfig("dispatch matrix has wrong number of rows");
  for (std::size_t i = 0; i < n; ++i) {
    if (counts[i].size() != n) throw InvalidConfig("dispatch matrix row has wrong length");
    std::size_t sum = 0;
    for (auto c : counts[i]) sum += c;
    if (sum != ranks[i].size()) {
      throw InvalidConfig("dispatch row " + std::to_string(i) + " does not cover the payload");
    }
  }
  const auto gs = static_cast<std::size_t>(config.group_size);

  CollectiveResult result{{}, TrafficLedger(topo)};
  auto& ledger = result.ledger;
  const int stage = ledger.add_stage({"dispatch", true, false});
  result.outputs.assign(n, {});
  std::vector<std::size_t> offset(n, 0);
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t count = counts[i][j];
      std::size_t start = 0;
      for (std::size_t k = 0; k < j; ++k) start += counts[i][k];
      const auto block = std::span<const float>(ranks[i]).subspan(start, count);
      auto& out = result.outputs[j];
      if (count == 0) continue;
      if (i == j) {
        out.insert(out.end(), block.begin(), block.end());
        continue;
      }
      std::vector<float> padded_block(block.begin(), block.end());
      padded_block.resize(round_up(count, gs), 0.0f);
      const Message m = quantize(padded_block, config);
      ledger.record(stage, static_cast<int>(i), static_cast<int>(j), padded_block.size(), m.bytes);
      out.insert(out.end(), m.values.begin(), m.values.begin() + static_cast<std::ptrdiff_t>(count));
    }
  }
  return result;
}

VolumeReport volume_report(const TrafficLedger& ledger, const Topology& topo) {
  VolumeReport r;
  r.total = ledger.total();
  const auto& links = ledger.link_bytes();
  for (std::size_t li = 0; li < links.size() && li < topo.links.size(); ++li) {
    for (int d = 0; d < 2; ++d) {
      const auto& c = links[li][static_cast<std::size_t>(d)];
      if (c.raw == 0 && c.actual == 0) continue;
      r.per_link.push_back({li, d, topo.links[li].kind, c});
      if (topo.links[li].kind == LinkKind::NumaBridge) {
        r.cross_numa.raw = std::max(r.cross_numa.raw, c.raw);
        r.cross_numa.actual = std::max(r.cross_numa.actual, c.actual);
      }
    }
  }
  return r;
}

}  // namespace flashcomm
