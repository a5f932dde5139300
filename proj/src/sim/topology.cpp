#include "georep/sim/topology.hpp"

#include <algorithm>

namespace georep {

namespace {
std::pair<std::string, std::string> key(const std::string& a, const std::string& b) {
  return a < b ? std::make_pair(a, b) : std::make_pair(b, a);
}
}  // namespace

void Topology::add_region(const std::string& name) {
  if (!has_region(name)) regions_.push_back(name);
}

void Topology::set_delay(const std::string& a, const std::string& b, double one_way_ms) {
  add_region(a);
  add_region(b);
  delays_[key(a, b)] = one_way_ms;
}

bool Topology::has_region(const std::string& name) const {
  return std::find(regions_.begin(), regions_.end(), name) != regions_.end();
}

double Topology::region_delay_ms(const std::string& a, const std::string& b) const {
  if (a == b) return inter_zone_ms_;
  auto it = delays_.find(key(a, b));
  if (it == delays_.end()) throw ConfigError("no delay between regions " + a + " and " + b);
  return it->second;
}

double Topology::delay_ms(const Placement& a, const Placement& b) const {
  if (a.region == b.region) return a.zone == b.zone ? intra_zone_ms_ : inter_zone_ms_;
  return region_delay_ms(a.region, b.region);
}

std::vector<std::string> Topology::validate() const {
  std::vector<std::string> problems;
  if (regions_.empty()) problems.push_back("topology.regions: at least one region required");
  if (intra_zone_ms_ < 0 || inter_zone_ms_ < 0 || jitter_ms_ < 0) {
    problems.push_back("topology: delays must be non-negative");
  }
  for (std::size_t i = 0; i < regions_.size(); ++i) {
    for (std::size_t j = i + 1; j < regions_.size(); ++j) {
      auto it = delays_.find(key(regions_[i], regions_[j]));
      if (it == delays_.end()) {
        problems.push_back("topology.delays: missing " + regions_[i] + "-" + regions_[j]);
      } else if (it->second <= inter_zone_ms_) {
        problems.push_back("topology.delays: " + regions_[i] + "-" + regions_[j] +
                           " must exceed the inter-zone delay");
      }
    }
  }
  return problems;
}

Topology Topology::four_regions() {
  Topology t;
  for (const char* r : {"V", "O", "I", "T"}) t.add_region(r);
  t.set_delay("V", "O", 35);
  t.set_delay("V", "I", 40);
  t.set_delay("V", "T", 75);
  t.set_delay("O", "I", 70);
  t.set_delay("O", "T", 50);
  t.set_delay("I", "T", 110);
  return t;
}

void Directory::add(NodeInfo info) {
  if (contains(info.id)) throw ConfigError("duplicate node id " + std::to_string(info.id.value));
  nodes_[info.id] = std::move(info);
}

const NodeInfo& Directory::at(NodeId id) const {
  auto it = nodes_.find(id);
  if (it == nodes_.end()) throw ConfigError("unknown node " + std::to_string(id.value));
  return it->second;
}

std::vector<NodeId> Directory::members(GroupId g) const {
  std::vector<const NodeInfo*> found;
  for (const auto& [id, info] : nodes_) {
    if (info.group == g && info.role != Role::Client) found.push_back(&info);
  }
  std::sort(found.begin(), found.end(), [](auto* a, auto* b) { return a->index < b->index; });
  std::vector<NodeId> out;
  for (auto* i : found) out.push_back(i->id);
  return out;
}

std::vector<NodeId> Directory::with_role(Role r) const {
  std::vector<NodeId> out;
  for (const auto& [id, info] : nodes_) {
    if (info.role == r) out.push_back(id);
  }
  return out;
}

}  // namespace georep
