#pragma once

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "georep/core/types.hpp"
#include "georep/sim/simulator.hpp"

namespace georep {

struct Placement {
  std::string region;
  std::uint32_t zone = 0;
};

// Regions with availability zones and one-way delays in milliseconds.
class Topology {
 public:
  void add_region(const std::string& name);
  void set_delay(const std::string& a, const std::string& b, double one_way_ms);
  void set_inter_zone(double one_way_ms) { inter_zone_ms_ = one_way_ms; }
  void set_intra_zone(double one_way_ms) { intra_zone_ms_ = one_way_ms; }
  void set_jitter(double max_ms) { jitter_ms_ = max_ms; }

  bool has_region(const std::string& name) const;
  const std::vector<std::string>& regions() const { return regions_; }
  double region_delay_ms(const std::string& a, const std::string& b) const;  // throws ConfigError
  double delay_ms(const Placement& a, const Placement& b) const;
  SimTime delay(const Placement& a, const Placement& b) const { return ms(delay_ms(a, b)); }
  double inter_zone_ms() const { return inter_zone_ms_; }
  double intra_zone_ms() const { return intra_zone_ms_; }
  double jitter_ms() const { return jitter_ms_; }

  // Problems that make the matrix unusable; empty when valid.
  std::vector<std::string> validate() const;

  // V/O/I/T evaluation shape with representative delays.
  static Topology four_regions();

 private:
  std::vector<std::string> regions_;
  std::map<std::pair<std::string, std::string>, double> delays_;
  double inter_zone_ms_ = 1.0;
  double intra_zone_ms_ = 0.1;
  double jitter_ms_ = 0.0;
};

struct NodeInfo {
  NodeId id;
  Role role = Role::Client;
  GroupId group;
  std::uint32_t index = 0;
  Placement where;
};

// Static facts about every principal in a run.
class Directory {
 public:
  void add(NodeInfo info);
  bool contains(NodeId id) const { return nodes_.count(id) != 0; }
  const NodeInfo& at(NodeId id) const;
  std::vector<NodeId> members(GroupId g) const;  // ordered by index
  std::vector<NodeId> with_role(Role r) const;
  const std::map<NodeId, NodeInfo>& all() const { return nodes_; }

 private:
  std::map<NodeId, NodeInfo> nodes_;
};

}  // namespace georep
