#include "flashcomm/simulate.hpp"

#include <algorithm>
#include <cmath>

#include "flashcomm/error.hpp"

namespace flashcomm {

namespace {

const std::vector<std::string> kTableColumns = {"algo",         "bitwidth", "total_raw",
                                                "cross_numa_raw", "actual_bytes", "max_err",
                                                "makespan", "saving", "bubble"};

std::uint64_t rank_seed(std::uint64_t seed, std::size_t rank) {
  // splitmix64 finalizer over (seed, rank).
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * (rank + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

std::vector<Cell> row_for(std::string_view algo, int bitwidth, const SimRun& run) {
  return {std::string(algo),
          static_cast<std::int64_t>(bitwidth),
          static_cast<std::int64_t>(run.volume.total.raw),
          static_cast<std::int64_t>(run.volume.cross_numa.raw),
          static_cast<std::int64_t>(run.volume.total.actual),
          run.max_err,
          run.schedule.makespan,
          run.saving,
          run.bubble};
}

}  // namespace

Algo parse_algo(const std::string& name) {
  if (name == "ring") return Algo::Ring;
  if (name == "two-step") return Algo::TwoStep;
  if (name == "hier") return Algo::Hier;
  if (name == "hier-pp") return Algo::HierPP;
  throw InvalidConfig("unknown algorithm '" + name + "'");
}

std::string_view to_string(Algo algo) {
  switch (algo) {
    case Algo::Ring: return "ring";
    case Algo::TwoStep: return "two-step";
    case Algo::Hier: return "hier";
    case Algo::HierPP: return "hier-pp";
  }
  return "?";
}

QuantConfig sim_config(int bitwidth, const SimOptions& options) {
  QuantConfig c = QuantConfig::for_bitwidth(bitwidth);
  if (options.scheme) c.scheme = *options.scheme;
  if (options.group_size) c.group_size = *options.group_size;
  c.scale_encoding = options.scale_encoding;
  if (c.chunk_size % c.group_size != 0) c.chunk_size = c.group_size;
  c.validate();
  return c;
}

RankPayloads make_payloads(std::size_t ranks, const SimOptions& options) {
  RankPayloads out;
  for (std::size_t r = 0; r < ranks; ++r) {
    SyntheticSpec spec = options.payload;
    spec.n = options.elements;
    spec.seed = rank_seed(options.seed, r);
    out.push_back(gen_synthetic(spec));
  }
  return out;
}

std::vector<double> exact_sum(const RankPayloads& ranks) {
  if (ranks.empty()) return {};
  std::vector<double> sum(ranks.front().size(), 0.0);
  for (const auto& r : ranks) {
    if (r.size() != sum.size()) throw InvalidData("ranks hold payloads of different lengths");
    for (std::size_t i = 0; i < r.size(); ++i) sum[i] += r[i];
  }
  return sum;
}

SimRun run_allreduce(Algo algo, const Topology& topo, const RankPayloads& payloads,
                     const QuantConfig& config, const CostModel& cost, int microchunks) {
  SimRun run;
  switch (algo) {
    case Algo::Ring: run.result = ring_allreduce_ref(payloads, topo); break;
    case Algo::TwoStep: run.result = two_step_allreduce_q(payloads, topo, config); break;
    case Algo::Hier:
    case Algo::HierPP: run.result = hierarchical_two_step_q(payloads, topo, config); break;
  }
  run.volume = volume_report(run.result.ledger, topo);
  run.schedule = build_serial_schedule(run.result.ledger, topo, cost);
  if (algo == Algo::HierPP) {
    const Schedule serial = std::move(run.schedule);
    run.schedule = build_pipeline_schedule(run.result.ledger, topo, cost, microchunks);
    if (serial.makespan > 0.0) run.saving = 1.0 - run.schedule.makespan / serial.makespan;
    run.bubble = run.schedule.makespan - pipeline_bound(serial, microchunks);
  }
  const auto exact = exact_sum(payloads);
  for (const auto& out : run.result.outputs) {
    for (std::size_t i = 0; i < out.size(); ++i) {
      run.max_err = std::max(run.max_err, std::abs(static_cast<double>(out[i]) - exact[i]));
    }
  }
  return run;
}

SimRun run_all2all(const Topology& topo, const RankPayloads& payloads, const QuantConfig& config,
                   const DispatchMatrix& counts, const CostModel& cost) {
  SimRun run;
  run.result = all2all_dispatch_q(payloads, topo, config, counts);
  run.volume = volume_report(run.result.ledger, topo);
  run.schedule = build_serial_schedule(run.result.ledger, topo, cost);
  // Output j gathers block j of every sender, in sender order.
  const std::size_t n = payloads.size();
  for (std::size_t j = 0; j < n; ++j) {
    std::size_t at = 0;
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t start = 0;
      for (std::size_t k = 0; k < j; ++k) start += counts[i][k];
      for (std::size_t e = 0; e < counts[i][j]; ++e, ++at) {
        const double diff = static_cast<double>(run.result.outputs[j][at]) - payloads[i][start + e];
        run.max_err = std::max(run.max_err, std::abs(diff));
      }
    }
  }
  return run;
}

Table simulate_allreduce(const std::vector<Algo>& algos, const SimOptions& options,
                         Schedule* last_schedule) {
  const Topology topo = load_topology(options.topology);
  const auto payloads = make_payloads(topo.size(), options);
  Table table{kTableColumns, {}};
  for (Algo algo : algos) {
    if (algo == Algo::Ring) {
      auto run = run_allreduce(algo, topo, payloads, QuantConfig{}, options.cost, 1);
      table.add_row(row_for(to_string(algo), 16, run));
      if (last_schedule) *last_schedule = std::move(run.schedule);
      continue;
    }
    for (int b : options.bitwidths) {
      auto run = run_allreduce(algo, topo, payloads, sim_config(b, options), options.cost,
                               options.microchunks);
      table.add_row(row_for(to_string(algo), b, run));
      if (last_schedule) *last_schedule = std::move(run.schedule);
    }
  }
  return table;
}

Table simulate_all2all(const SimOptions& options, Schedule* last_schedule) {
  const Topology topo = load_topology(options.topology);
  const auto payloads = make_payloads(topo.size(), options);
  const auto counts = uniform_dispatch(topo.size(), options.elements);
  Table table{kTableColumns, {}};
  for (int b : options.bitwidths) {
    auto run = run_all2all(topo, payloads, sim_config(b, options), counts, options.cost);
    table.add_row(row_for("all2all-dispatch", b, run));
    if (last_schedule) *last_schedule = std::move(run.schedule);
  }
  return table;
}

}  // namespace flashcomm
