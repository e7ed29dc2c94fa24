#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "flashcomm/collectives.hpp"
#include "flashcomm/schedule.hpp"
#include "flashcomm/synthetic.hpp"
#include "flashcomm/table.hpp"

namespace flashcomm {

enum class Algo { Ring, TwoStep, Hier, HierPP };

Algo parse_algo(const std::string& name);
std::string_view to_string(Algo algo);

struct SimOptions {
  std::string topology = "L40";
  std::vector<int> bitwidths{8};
  // Unset: the per-bitwidth default (spike reserving at INT2 only).
  std::optional<Scheme> scheme;
  std::optional<int> group_size;
  ScaleEncoding scale_encoding = ScaleEncoding::Bf16;
  std::size_t elements = 1 << 19;  // per rank; 1 MiB of BF16
  std::uint64_t seed = 0;
  int microchunks = 8;
  CostModel cost;
  SyntheticSpec payload;  // n and seed are overridden per rank
};

QuantConfig sim_config(int bitwidth, const SimOptions& options);

// One payload per device, each drawn from options.payload with a seed
// derived from (options.seed, rank).
RankPayloads make_payloads(std::size_t ranks, const SimOptions& options);

// Elementwise sum across ranks in double precision.
std::vector<double> exact_sum(const RankPayloads& ranks);

struct SimRun {
  CollectiveResult result;
  VolumeReport volume;
  Schedule schedule;
  double max_err = 0.0;
  // Fraction of the serial makespan saved, and the fill/drain bubble
  // makespan - pipeline_bound. Both are zero for serial schedules.
  double saving = 0.0;
  double bubble = 0.0;
};

SimRun run_allreduce(Algo algo, const Topology& topo, const RankPayloads& payloads,
                     const QuantConfig& config, const CostModel& cost, int microchunks);

SimRun run_all2all(const Topology& topo, const RankPayloads& payloads, const QuantConfig& config,
                   const DispatchMatrix& counts, const CostModel& cost);

// Columns: algo, bitwidth, total_raw, cross_numa_raw, actual_bytes, max_err,
// makespan. The ring baseline reports bitwidth 16 and appears once.
Table simulate_allreduce(const std::vector<Algo>& algos, const SimOptions& options,
                         Schedule* last_schedule = nullptr);
Table simulate_all2all(const SimOptions& options, Schedule* last_schedule = nullptr);

}  // namespace flashcomm
