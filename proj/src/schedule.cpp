#include "flashcomm/schedule.hpp"

#include <algorithm>
#include <limits>
#include <queue>
#include <set>
#include <tuple>

#include <nlohmann/json.hpp>

#include "flashcomm/error.hpp"

namespace flashcomm {

namespace {

std::string endpoint_name(const Endpoint& e) {
  return (e.kind == Endpoint::Kind::Device ? "d" : "h") + std::to_string(e.index);
}

// Resource layout: two per link (one per direction, or one shared slot for
// half-duplex links), then one compute slot per device.
struct ResourceMap {
  std::vector<std::array<int, 2>> link;
  std::vector<int> compute;
  std::vector<std::string> names;

  explicit ResourceMap(const Topology& topo) {
    for (const auto& l : topo.links) {
      const std::string base = std::string(to_string(l.kind)) + "[" + endpoint_name(l.a) + "-" +
                               endpoint_name(l.b) + "]";
      const int fwd = static_cast<int>(names.size());
      if (l.duplex) {
        names.push_back(base + ".fwd");
        names.push_back(base + ".rev");
        link.push_back({fwd, fwd + 1});
      } else {
        names.push_back(base);
        link.push_back({fwd, fwd});
      }
    }
    for (const auto& d : topo.devices) {
      compute.push_back(static_cast<int>(names.size()));
      names.push_back("d" + std::to_string(d.id) + ".compute");
    }
  }
};

std::uint64_t split_part(std::uint64_t total, int k, int c) {
  const auto kk = static_cast<std::uint64_t>(k);
  const auto cc = static_cast<std::uint64_t>(c);
  return total / kk + (cc < total % kk ? 1 : 0);
}

Schedule build(const TrafficLedger& trace, const Topology& topo, const CostModel& cost,
               int k) {
  if (k < 1) throw InvalidConfig("microchunk count must be at least 1");
  const ResourceMap res(topo);
  Schedule sched;
  sched.microchunks = k;
  sched.resource_names = res.names;
  const auto& stages = trace.stages();
  const std::size_t nstages = stages.size();
  for (const auto& s : stages) sched.stages.push_back({s.name, 0.0, 0.0});

  // Per (stage, chunk): the final task of every message chain.
  std::vector<std::vector<std::vector<int>>> tails(
      nstages, std::vector<std::vector<int>>(static_cast<std::size_t>(k)));
  auto& tasks = sched.tasks;
  const auto add = [&](Task t) {
    t.id = static_cast<int>(tasks.size());
    tasks.push_back(std::move(t));
    return tasks.back().id;
  };

  for (std::size_t s = 0; s < nstages; ++s) {
    for (int c = 0; c < k; ++c) {
      const std::vector<int>* barrier = s > 0 ? &tails[s - 1][static_cast<std::size_t>(c)] : nullptr;
      for (const auto& e : trace.events()) {
        if (static_cast<std::size_t>(e.stage) != s) continue;
        const std::uint64_t bytes = split_part(e.actual_bytes, k, c);
        const std::uint64_t elems = split_part(e.elements, k, c);
        if (bytes == 0 && elems == 0) continue;
        const auto& src_dev = topo.devices[static_cast<std::size_t>(e.src)];
        const auto& dst_dev = topo.devices[static_cast<std::size_t>(e.dst)];

        std::vector<int> deps = barrier ? *barrier : std::vector<int>{};
        const auto compute = [&](TaskKind kind, const DeviceSpec& dev) {
          Task t;
          t.kind = kind;
          t.stage = static_cast<int>(s);
          t.chunk = c;
          t.src = t.dst = dev.id;
          t.elements = elems;
          t.deps = deps;
          t.resource = res.compute[static_cast<std::size_t>(dev.id)];
          t.duration = cost.compute_time(elems, kind, dev);
          t.occupancy = t.duration;
          deps = {add(std::move(t))};
        };

        if (stages[s].quantized) compute(TaskKind::Quantize, src_dev);
        // Store-and-forward: one task per hop, each waiting for the previous.
        for (const auto& hop : topo.route(e.src, e.dst)) {
          Task t;
          t.kind = TaskKind::Transfer;
          t.stage = static_cast<int>(s);
          t.chunk = c;
          t.src = e.src;
          t.dst = e.dst;
          t.link = static_cast<int>(hop.link);
          t.bytes = bytes;
          t.elements = elems;
          t.deps = deps;
          t.resource = res.link[hop.link][static_cast<std::size_t>(hop.direction)];
          t.duration = cost.transfer_time(bytes, topo.links[hop.link]);
          t.occupancy = static_cast<double>(bytes) / topo.links[hop.link].bandwidth;
          deps = {add(std::move(t))};
        }
        if (stages[s].quantized) compute(TaskKind::Dequantize, dst_dev);
        if (stages[s].reduces) compute(TaskKind::Reduce, dst_dev);
        tails[s][static_cast<std::size_t>(c)].push_back(deps.front());
      }
    }
  }

  // Event-driven list scheduling. Whenever a resource frees up or a task is
  // released, the released tasks are scanned by (chunk, stage, id) and each
  // starts if its resource is idle. Favouring the oldest microchunk keeps
  // the later stages of chunk c ahead of the first stage of chunk c + 1.
  using Key = std::tuple<int, int, int>;
  std::set<Key> ready;
  using Release = std::pair<double, int>;
  std::priority_queue<Release, std::vector<Release>, std::greater<>> released;
  std::priority_queue<double, std::vector<double>, std::greater<>> events;
  std::vector<std::size_t> waiting(tasks.size());
  std::vector<std::vector<int>> children(tasks.size());
  const auto release = [&](const Task& t, double at) {
    released.push({at, t.id});
    events.push(at);
  };
  for (const auto& t : tasks) {
    waiting[static_cast<std::size_t>(t.id)] = t.deps.size();
    for (int d : t.deps) children[static_cast<std::size_t>(d)].push_back(t.id);
    if (t.deps.empty()) release(t, 0.0);
  }
  std::vector<double> free_at(res.names.size(), 0.0);
  std::size_t done = 0;
  double now = 0.0;
  while (done < tasks.size()) {
    bool rescan = true;
    while (rescan) {
      rescan = false;
      while (!released.empty() && released.top().first <= now) {
        const Task& t = tasks[static_cast<std::size_t>(released.top().second)];
        ready.insert({t.chunk, t.stage, t.id});
        released.pop();
      }
      for (auto it = ready.begin(); it != ready.end() && !rescan;) {
        Task& t = tasks[static_cast<std::size_t>(std::get<2>(*it))];
        const bool idle = t.occupancy <= 0.0 || free_at[static_cast<std::size_t>(t.resource)] <= now;
        if (!idle) {
          ++it;
          continue;
        }
        t.start = now;
        t.finish = now + t.duration;
        if (t.occupancy > 0.0) {
          free_at[static_cast<std::size_t>(t.resource)] = now + t.occupancy;
          events.push(now + t.occupancy);
        }
        for (int c : children[static_cast<std::size_t>(t.id)]) {
          if (--waiting[static_cast<std::size_t>(c)] > 0) continue;
          const Task& child = tasks[static_cast<std::size_t>(c)];
          double at = 0.0;
          for (int d : child.deps) at = std::max(at, tasks[static_cast<std::size_t>(d)].finish);
          release(child, at);
          // A task released right now may outrank the rest of this scan.
          rescan = rescan || at <= now;
        }
        ++done;
        it = ready.erase(it);
      }
    }
    if (done == tasks.size()) break;
    while (!events.empty() && events.top() <= now) events.pop();
    if (events.empty()) throw Error("schedule has a dependency cycle");
    now = events.top();
  }

  std::vector<bool> seen(nstages, false);
  for (const auto& t : tasks) {
    auto& span = sched.stages[static_cast<std::size_t>(t.stage)];
    if (!seen[static_cast<std::size_t>(t.stage)]) {
      span.start = t.start;
      span.finish = t.finish;
      seen[static_cast<std::size_t>(t.stage)] = true;
    } else {
      span.start = std::min(span.start, t.start);
      span.finish = std::max(span.finish, t.finish);
    }
    sched.makespan = std::max(sched.makespan, t.finish);
  }
  return sched;
}

}  // namespace

std::string_view to_string(TaskKind kind) {
  switch (kind) {
    case TaskKind::Transfer: return "transfer";
    case TaskKind::Quantize: return "quantize";
    case TaskKind::Dequantize: return "dequantize";
    case TaskKind::Reduce: return "reduce";
  }
  return "?";
}

double CostModel::transfer_time(std::uint64_t bytes, const LinkSpec& link) const {
  if (bytes == 0) return 0.0;
  return link.latency + static_cast<double>(bytes) / link.bandwidth;
}

double CostModel::compute_time(std::uint64_t elements, TaskKind kind,
                               const DeviceSpec& device) const {
  double per = 0.0;
  switch (kind) {
    case TaskKind::Quantize: per = quantize_per_element; break;
    case TaskKind::Dequantize: per = dequantize_per_element; break;
    case TaskKind::Reduce: per = reduce_per_element; break;
    case TaskKind::Transfer: break;
  }
  return static_cast<double>(elements) * per / device.sm_count;
}

Schedule build_serial_schedule(const TrafficLedger& trace, const Topology& topo,
                               const CostModel& cost) {
  return build(trace, topo, cost, 1);
}

Schedule build_pipeline_schedule(const TrafficLedger& trace, const Topology& topo,
                                 const CostModel& cost, int microchunks) {
  return build(trace, topo, cost, microchunks);
}

double makespan(const Schedule& schedule) { return schedule.makespan; }

double utilization(const Schedule& schedule, std::size_t resource) {
  if (schedule.makespan <= 0.0) return 0.0;
  double busy = 0.0;
  for (const auto& t : schedule.tasks) {
    if (t.resource == static_cast<int>(resource)) busy += t.occupancy;
  }
  return busy / schedule.makespan;
}

int find_resource(const Schedule& schedule, const std::string& name) {
  const auto it = std::find(schedule.resource_names.begin(), schedule.resource_names.end(), name);
  return it == schedule.resource_names.end()
             ? -1
             : static_cast<int>(it - schedule.resource_names.begin());
}

double bottleneck_stage_time(const Schedule& serial) {
  double m = 0.0;
  for (const auto& s : serial.stages) m = std::max(m, s.span());
  return m;
}

double pipeline_bound(const Schedule& serial, int microchunks) {
  if (microchunks < 1) throw InvalidConfig("microchunk count must be at least 1");
  std::vector<double> busy(serial.resource_names.size(), 0.0);
  for (const auto& t : serial.tasks) {
    if (t.occupancy > 0.0) busy[static_cast<std::size_t>(t.resource)] += t.occupancy;
  }
  double top = bottleneck_stage_time(serial);
  for (double b : busy) top = std::max(top, b);
  return top + (serial.makespan - top) / microchunks;
}

void audit_schedule(const Schedule& schedule) {
  const double eps = 1e-12 * std::max(1.0, schedule.makespan);
  std::vector<std::vector<std::pair<double, double>>> busy(schedule.resource_names.size());
  for (const auto& t : schedule.tasks) {
    for (int d : t.deps) {
      if (t.start + eps < schedule.tasks[static_cast<std::size_t>(d)].finish) {
        throw Error("task " + std::to_string(t.id) + " starts before dependency " +
                    std::to_string(d) + " finishes");
      }
    }
    if (t.occupancy > 0.0) {
      busy[static_cast<std::size_t>(t.resource)].emplace_back(t.start, t.start + t.occupancy);
    }
  }
  for (std::size_t r = 0; r < busy.size(); ++r) {
    auto& iv = busy[r];
    std::sort(iv.begin(), iv.end());
    for (std::size_t i = 1; i < iv.size(); ++i) {
      if (iv[i].first + eps < iv[i - 1].second) {
        throw Error("overlapping tasks on resource " + schedule.resource_names[r]);
      }
    }
  }
}

nlohmann::ordered_json schedule_timeline(const Schedule& schedule) {
  nlohmann::ordered_json tasks = nlohmann::ordered_json::array();
  for (const auto& t : schedule.tasks) {
    tasks.push_back({{"task", t.id},
                     {"kind", std::string(to_string(t.kind))},
                     {"stage", schedule.stages[static_cast<std::size_t>(t.stage)].name},
                     {"chunk", t.chunk},
                     {"src", t.src},
                     {"dst", t.dst},
                     {"bytes", t.bytes},
                     {"resource", schedule.resource_names[static_cast<std::size_t>(t.resource)]},
                     {"start", t.start},
                     {"end", t.finish}});
  }
  nlohmann::ordered_json j;
  j["microchunks"] = schedule.microchunks;
  j["makespan"] = schedule.makespan;
  j["tasks"] = std::move(tasks);
  return j;
}

}  // namespace flashcomm
