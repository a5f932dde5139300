#pragma once

#include <functional>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "georep/core/messages.hpp"
#include "georep/sim/simulator.hpp"
#include "georep/sim/topology.hpp"
#include "georep/sim/trace.hpp"

namespace georep {

struct NetCounters {
  std::uint64_t sent = 0;
  std::uint64_t delivered = 0;
  std::uint64_t dropped = 0;
  std::uint64_t wan_messages = 0;
  std::uint64_t wan_bytes = 0;
  // keyed by "<message kind>" and "<message kind>@<channel kind>"
  std::map<std::string, std::uint64_t> wan_by_kind;
  std::map<std::string, std::uint64_t> wan_bytes_by_kind;
};

struct Partition {
  std::set<NodeId> isolated;  // cut off from every node outside the set
  SimTime from = 0;
  SimTime to = 0;
  bool drop = false;  // drop crossing traffic instead of holding it until heal
};

// Point-to-point links, reliable and FIFO by default. Delay comes from the
// topology; crashes, partitions and loss are injected here.
class Network {
 public:
  using Handler = std::function<void(const Envelope&)>;

  Network(Simulator& sim, const Topology& topo, const Directory& dir, TraceLog& trace)
      : sim_(sim), topo_(topo), dir_(dir), trace_(trace) {}

  void attach(NodeId id, Handler h) { handlers_[id] = std::move(h); }
  void send(NodeId from, NodeId to, std::shared_ptr<const Packet> packet);

  void crash_at(NodeId id, SimTime t) { crash_time_[id] = t; }
  bool crashed(NodeId id) const;
  void add_partition(Partition p) { partitions_.push_back(std::move(p)); }
  // Loss applies to inter-region links only; endpoints retransmit.
  void set_wan_loss(double probability) { wan_loss_ = probability; }
  double wan_loss() const { return wan_loss_; }

  bool cross_region(NodeId a, NodeId b) const;
  SimTime latency(NodeId a, NodeId b) const;

  const NetCounters& counters() const { return counters_; }
  std::uint64_t in_flight() const { return counters_.sent - counters_.delivered - counters_.dropped; }

 private:
  void deliver(NodeId from, NodeId to, const std::shared_ptr<const Packet>& packet, std::uint32_t hops);
  std::optional<SimTime> held_until(NodeId a, NodeId b, SimTime t, bool& drop) const;
  void record_drop(NodeId from, NodeId to, const Packet& p, const char* why);

  Simulator& sim_;
  const Topology& topo_;
  const Directory& dir_;
  TraceLog& trace_;
  std::map<NodeId, Handler> handlers_;
  std::map<NodeId, SimTime> crash_time_;
  std::vector<Partition> partitions_;
  std::map<std::pair<NodeId, NodeId>, SimTime> last_arrival_;
  double wan_loss_ = 0.0;
  NetCounters counters_;
};

}  // namespace georep
