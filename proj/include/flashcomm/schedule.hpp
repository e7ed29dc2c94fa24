#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "flashcomm/collectives.hpp"
#include "flashcomm/topology.hpp"

namespace flashcomm {

enum class TaskKind { Transfer, Quantize, Dequantize, Reduce };

std::string_view to_string(TaskKind kind);

struct CostModel {
  // Seconds per element on a single SM; divided by the device's SM count.
  double quantize_per_element = 0.0;
  double dequantize_per_element = 0.0;
  double reduce_per_element = 0.0;

  // One hop: latency plus bytes over the link bandwidth.
  double transfer_time(std::uint64_t bytes, const LinkSpec& link) const;
  double compute_time(std::uint64_t elements, TaskKind kind, const DeviceSpec& device) const;
};

struct Task {
  int id = 0;
  TaskKind kind = TaskKind::Transfer;
  int stage = 0;
  int chunk = 0;
  int src = 0;  // transfers: sender; compute: the device
  int dst = 0;
  int link = -1;  // transfers: the hop this task moves bytes across
  std::uint64_t bytes = 0;
  std::uint64_t elements = 0;
  std::vector<int> deps;
  // A link direction or a device compute slot. It is held for `occupancy`;
  // the task completes after `duration`, which for a hop adds the link
  // latency (in flight, the link already accepts the next message).
  int resource = -1;
  double occupancy = 0.0;
  double duration = 0.0;
  double start = 0.0;
  double finish = 0.0;
};

struct StageSpan {
  std::string name;
  double start = 0.0;
  double finish = 0.0;
  double span() const { return finish - start; }
};

struct Schedule {
  std::vector<Task> tasks;
  std::vector<std::string> resource_names;
  std::vector<StageSpan> stages;
  int microchunks = 1;
  double makespan = 0.0;
};

// Every stage completes before the next starts.
Schedule build_serial_schedule(const TrafficLedger& trace, const Topology& topo,
                               const CostModel& cost);

// Each transfer is split into k microchunks; chunk c of a stage waits only
// for chunk c of the previous stage. Messages are forwarded hop by hop, one
// task per link. Among the tasks whose dependencies are met, list
// scheduling starts the lowest (chunk, stage, id) whose resource is idle.
Schedule build_pipeline_schedule(const TrafficLedger& trace, const Topology& topo,
                                 const CostModel& cost, int microchunks);

double makespan(const Schedule& schedule);
double utilization(const Schedule& schedule, std::size_t resource);
// Resource index by name, e.g. "NumaBridge[h0-h1].fwd" or "d3.compute"; -1
// if absent.
int find_resource(const Schedule& schedule, const std::string& name);

// Longest stage of the serial schedule.
double bottleneck_stage_time(const Schedule& serial);
// Pipeline estimate top + (serial_makespan - top) / k, where top is the
// longest stage or the busiest resource's total busy time, whichever is
// larger (two stages that saturate the same link cannot overlap).
double pipeline_bound(const Schedule& serial, int microchunks);

// Throws Error if two tasks overlap on a resource or start before a dep ends.
void audit_schedule(const Schedule& schedule);

// One record per task: kind, stage, chunk, resources, start and end.
nlohmann::ordered_json schedule_timeline(const Schedule& schedule);

}  // namespace flashcomm
