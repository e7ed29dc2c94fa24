#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace flashcomm {

enum class LinkKind { PCIe, NumaBridge, NVLink };

std::string_view to_string(LinkKind kind);

// A link endpoint is either a GPU or a hub (PCIe root complex of a NUMA
// group, or the NVSwitch fabric of an NVLink node).
struct Endpoint {
  enum class Kind { Device, Hub };
  Kind kind = Kind::Device;
  int index = 0;

  static Endpoint device(int i) { return {Kind::Device, i}; }
  static Endpoint hub(int i) { return {Kind::Hub, i}; }

  friend bool operator==(const Endpoint&, const Endpoint&) = default;
};

struct DeviceSpec {
  int id = 0;
  int sm_count = 0;
  int numa_group = 0;

  friend bool operator==(const DeviceSpec&, const DeviceSpec&) = default;
};

struct LinkSpec {
  LinkKind kind = LinkKind::PCIe;
  Endpoint a;
  Endpoint b;
  double bandwidth = 0.0;  // bytes per second, per direction
  double latency = 0.0;    // seconds
  bool duplex = true;

  friend bool operator==(const LinkSpec&, const LinkSpec&) = default;
};

// One traversal of a link; direction 0 is a->b, 1 is b->a.
struct Hop {
  std::size_t link = 0;
  int direction = 0;

  friend bool operator==(const Hop&, const Hop&) = default;
};

struct Topology {
  std::string name;
  std::vector<DeviceSpec> devices;
  std::vector<LinkSpec> links;

  // Throws InvalidConfig on contiguity, reachability, or bridge violations.
  void validate() const;

  std::size_t size() const { return devices.size(); }
  int num_groups() const;

  // Index of the NumaBridge link, or -1 when the topology has none.
  int bridge_index() const;

  // Shortest path between two devices, ties broken by link order.
  std::vector<Hop> route(int src, int dst) const;

  friend bool operator==(const Topology&, const Topology&) = default;
};

// Eight-GPU nodes with the interconnect bandwidths of common parts:
//   L40  PCIe      64 GB/s  142 SMs, two NUMA groups of four
//   A100 NVLink8  400 GB/s  108 SMs
//   H800 NVLink8  400 GB/s  132 SMs
//   H20  NVLink18 900 GB/s   78 SMs
Topology preset(std::string_view name);
std::vector<std::string> preset_names();

struct NumaPartition {
  std::vector<std::vector<int>> groups;
  std::size_t bridge = 0;  // index into Topology::links
};

// Device ids per NUMA group plus the bridge joining them. Throws
// NotApplicable on topologies without a bridge.
NumaPartition cross_numa_partition(const Topology& topo);

nlohmann::json topology_to_json(const Topology& topo);
Topology topology_from_json(const nlohmann::json& j);

// Accepts a preset name or a path to a JSON topology file.
Topology load_topology(const std::string& preset_or_path);
void save_topology(const Topology& topo, const std::string& path);

}  // namespace flashcomm
