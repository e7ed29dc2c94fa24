#include "flashcomm/topology.hpp"

#include <algorithm>
#include <deque>
#include <filesystem>
#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

#include "flashcomm/error.hpp"

namespace flashcomm {

namespace {

constexpr double kGB = 1e9;
// Presets carry bandwidths only, so link latency is left at zero.
constexpr double kLinkLatency = 0.0;
// Vendor interconnect figures give no number for the inter-socket path; half of a
// PCIe port's bandwidth is assumed.
constexpr double kBridgeBandwidth = 32 * kGB;

struct PresetSpec {
  std::string_view name;
  LinkKind kind;
  double bandwidth;
  int sm_count;
};

constexpr PresetSpec kPresets[] = {
    {"L40", LinkKind::PCIe, 64 * kGB, 142},
    {"A100", LinkKind::NVLink, 400 * kGB, 108},
    {"H800", LinkKind::NVLink, 400 * kGB, 132},
    {"H20", LinkKind::NVLink, 900 * kGB, 78},
};

constexpr int kPresetDevices = 8;

std::size_t node_of(const Endpoint& e, std::size_t devices) {
  return e.kind == Endpoint::Kind::Device ? static_cast<std::size_t>(e.index)
                                          : devices + static_cast<std::size_t>(e.index);
}

LinkKind parse_kind(const std::string& s) {
  if (s == "PCIe") return LinkKind::PCIe;
  if (s == "NumaBridge") return LinkKind::NumaBridge;
  if (s == "NVLink") return LinkKind::NVLink;
  throw InvalidConfig("unknown link kind '" + s + "'");
}

nlohmann::json endpoint_to_json(const Endpoint& e) {
  return {{e.kind == Endpoint::Kind::Device ? "device" : "hub", e.index}};
}

Endpoint endpoint_from_json(const nlohmann::json& j) {
  if (j.contains("device")) return Endpoint::device(j.at("device").get<int>());
  if (j.contains("hub")) return Endpoint::hub(j.at("hub").get<int>());
  throw InvalidConfig("endpoint needs a 'device' or 'hub' field");
}

}  // namespace

std::string_view to_string(LinkKind kind) {
  switch (kind) {
    case LinkKind::PCIe: return "PCIe";
    case LinkKind::NumaBridge: return "NumaBridge";
    case LinkKind::NVLink: return "NVLink";
  }
  return "?";
}

int Topology::num_groups() const {
  int g = 0;
  for (const auto& d : devices) g = std::max(g, d.numa_group + 1);
  return g;
}

int Topology::bridge_index() const {
  for (std::size_t i = 0; i < links.size(); ++i) {
    if (links[i].kind == LinkKind::NumaBridge) return static_cast<int>(i);
  }
  return -1;
}

void Topology::validate() const {
  if (devices.empty()) throw InvalidConfig("topology '" + name + "' has no devices");
  const int n = static_cast<int>(devices.size());
  std::set<int> groups;
  for (int i = 0; i < n; ++i) {
    const auto& d = devices[static_cast<std::size_t>(i)];
    if (d.id != i) throw InvalidConfig("device ids must be contiguous from 0");
    if (d.sm_count <= 0) throw InvalidConfig("device " + std::to_string(i) + " has no SMs");
    if (d.numa_group < 0) throw InvalidConfig("negative NUMA group");
    groups.insert(d.numa_group);
  }
  const int g = num_groups();
  if (static_cast<int>(groups.size()) != g) throw InvalidConfig("NUMA groups must be 0..G-1");

  int hubs = 0;
  int bridges = 0;
  bool pcie = false;
  for (const auto& l : links) {
    if (!(l.bandwidth > 0.0)) throw InvalidConfig("link bandwidth must be positive");
    if (!(l.latency >= 0.0)) throw InvalidConfig("link latency must be non-negative");
    for (const auto& e : {l.a, l.b}) {
      if (e.index < 0) throw InvalidConfig("negative endpoint index");
      if (e.kind == Endpoint::Kind::Device && e.index >= n) {
        throw InvalidConfig("link references unknown device " + std::to_string(e.index));
      }
      if (e.kind == Endpoint::Kind::Hub) hubs = std::max(hubs, e.index + 1);
    }
    if (l.a == l.b) throw InvalidConfig("self-loop link");
    bridges += l.kind == LinkKind::NumaBridge;
    pcie = pcie || l.kind == LinkKind::PCIe;
  }
  if (pcie && g > 1 && bridges != 1) {
    throw InvalidConfig("PCIe topology with " + std::to_string(g) +
                        " NUMA groups needs exactly one NumaBridge, found " +
                        std::to_string(bridges));
  }
  if (bridges > 1) throw InvalidConfig("at most one NumaBridge is supported");

  // Reachability over devices and hubs; other devices are not relays.
  const std::size_t nodes = static_cast<std::size_t>(n + hubs);
  std::vector<std::vector<std::size_t>> adj(nodes);
  for (const auto& l : links) {
    const auto a = node_of(l.a, devices.size());
    const auto b = node_of(l.b, devices.size());
    adj[a].push_back(b);
    adj[b].push_back(a);
  }
  std::vector<bool> seen(nodes, false);
  std::deque<std::size_t> queue{0};
  seen[0] = true;
  while (!queue.empty()) {
    const auto u = queue.front();
    queue.pop_front();
    for (auto v : adj[u]) {
      if (!seen[v]) {
        seen[v] = true;
        queue.push_back(v);
      }
    }
  }
  for (int i = 0; i < n; ++i) {
    if (!seen[static_cast<std::size_t>(i)]) {
      throw InvalidConfig("device " + std::to_string(i) + " is unreachable");
    }
  }
}

std::vector<Hop> Topology::route(int src, int dst) const {
  const std::size_t n = devices.size();
  if (src < 0 || dst < 0 || static_cast<std::size_t>(src) >= n ||
      static_cast<std::size_t>(dst) >= n) {
    throw InvalidConfig("route endpoints out of range");
  }
  if (src == dst) return {};
  std::size_t hubs = 0;
  for (const auto& l : links) {
    for (const auto& e : {l.a, l.b}) {
      if (e.kind == Endpoint::Kind::Hub) hubs = std::max(hubs, static_cast<std::size_t>(e.index) + 1);
    }
  }
  const std::size_t nodes = n + hubs;
  const auto target = static_cast<std::size_t>(dst);
  std::vector<int> via(nodes, -1);  // link used to reach the node
  std::vector<int> dir(nodes, 0);
  std::vector<bool> seen(nodes, false);
  std::deque<std::size_t> queue{static_cast<std::size_t>(src)};
  seen[static_cast<std::size_t>(src)] = true;
  while (!queue.empty() && !seen[target]) {
    const auto u = queue.front();
    queue.pop_front();
    if (u < n && u != static_cast<std::size_t>(src)) continue;
    for (std::size_t li = 0; li < links.size(); ++li) {
      const auto a = node_of(links[li].a, n);
      const auto b = node_of(links[li].b, n);
      std::size_t v;
      int d;
      if (a == u) {
        v = b;
        d = 0;
      } else if (b == u) {
        v = a;
        d = 1;
      } else {
        continue;
      }
      if (seen[v]) continue;
      seen[v] = true;
      via[v] = static_cast<int>(li);
      dir[v] = d;
      queue.push_back(v);
    }
  }
  if (!seen[target]) throw InvalidConfig("no route between devices");
  std::vector<Hop> hops;
  for (std::size_t v = target; v != static_cast<std::size_t>(src);) {
    const auto li = static_cast<std::size_t>(via[v]);
    hops.push_back({li, dir[v]});
    v = node_of(dir[v] == 0 ? links[li].a : links[li].b, n);
  }
  std::reverse(hops.begin(), hops.end());
  return hops;
}

Topology preset(std::string_view name) {
  for (const auto& p : kPresets) {
    if (p.name != name) continue;
    Topology t;
    t.name = std::string(p.name);
    const bool numa = p.kind == LinkKind::PCIe;
    for (int i = 0; i < kPresetDevices; ++i) {
      const int group = numa ? i / (kPresetDevices / 2) : 0;
      t.devices.push_back({i, p.sm_count, group});
      t.links.push_back({p.kind, Endpoint::device(i), Endpoint::hub(group), p.bandwidth,
                         kLinkLatency, true});
    }
    if (numa) {
      t.links.push_back({LinkKind::NumaBridge, Endpoint::hub(0), Endpoint::hub(1),
                         kBridgeBandwidth, kLinkLatency, true});
    }
    return t;
  }
  throw InvalidConfig("unknown topology preset '" + std::string(name) + "'");
}

std::vector<std::string> preset_names() {
  std::vector<std::string> names;
  for (const auto& p : kPresets) names.emplace_back(p.name);
  return names;
}

NumaPartition cross_numa_partition(const Topology& topo) {
  const int bridge = topo.bridge_index();
  if (bridge < 0) {
    throw NotApplicable("topology '" + topo.name + "' has no NUMA bridge");
  }
  NumaPartition p;
  p.bridge = static_cast<std::size_t>(bridge);
  p.groups.resize(static_cast<std::size_t>(topo.num_groups()));
  for (const auto& d : topo.devices) {
    p.groups[static_cast<std::size_t>(d.numa_group)].push_back(d.id);
  }
  return p;
}

nlohmann::json topology_to_json(const Topology& topo) {
  nlohmann::json j;
  j["name"] = topo.name;
  j["devices"] = nlohmann::json::array();
  for (const auto& d : topo.devices) {
    j["devices"].push_back({{"id", d.id}, {"sm_count", d.sm_count}, {"numa_group", d.numa_group}});
  }
  j["links"] = nlohmann::json::array();
  for (const auto& l : topo.links) {
    j["links"].push_back({{"kind", std::string(to_string(l.kind))},
                          {"endpoints", {endpoint_to_json(l.a), endpoint_to_json(l.b)}},
                          {"bandwidth", l.bandwidth},
                          {"latency", l.latency},
                          {"duplex", l.duplex}});
  }
  return j;
}

Topology topology_from_json(const nlohmann::json& j) {
  Topology t;
  try {
    t.name = j.value("name", "custom");
    for (const auto& d : j.at("devices")) {
      t.devices.push_back({d.at("id").get<int>(), d.at("sm_count").get<int>(),
                           d.value("numa_group", 0)});
    }
    for (const auto& l : j.at("links")) {
      const auto& ends = l.at("endpoints");
      if (!ends.is_array() || ends.size() != 2) throw InvalidConfig("link needs two endpoints");
      t.links.push_back({parse_kind(l.at("kind").get<std::string>()), endpoint_from_json(ends[0]),
                         endpoint_from_json(ends[1]), l.at("bandwidth").get<double>(),
                         l.value("latency", 0.0), l.value("duplex", true)});
    }
  } catch (const nlohmann::json::exception& e) {
    throw InvalidConfig(std::string("topology json: ") + e.what());
  }
  t.validate();
  return t;
}

Topology load_topology(const std::string& preset_or_path) {
  const auto names = preset_names();
  if (std::find(names.begin(), names.end(), preset_or_path) != names.end()) {
    return preset(preset_or_path);
  }
  if (!std::filesystem::exists(preset_or_path)) {
    throw InvalidConfig("'" + preset_or_path + "' is neither a preset nor a file");
  }
  std::ifstream in(preset_or_path);
  if (!in) throw IoError("cannot open " + preset_or_path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidConfig(std::string("topology json: ") + e.what());
  }
  return topology_from_json(j);
}

void save_topology(const Topology& topo, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << topology_to_json(topo).dump(2) << '\n';
  if (!out) throw IoError("failed writing " + path);
}

}  // namespace flashcomm
