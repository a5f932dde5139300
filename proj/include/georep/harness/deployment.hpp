#pragma once

#include <memory>
#include <random>
#include <set>

#include "georep/client/client.hpp"
#include "georep/harness/scenario.hpp"
#include "georep/replica/agreement.hpp"
#include "georep/replica/execution.hpp"
#include "georep/replica/flat.hpp"
#include "georep/sim/network.hpp"

namespace georep::harness {

// One client operation as the workload saw it.
struct OpRecord {
  NodeId client;
  std::string region;
  client::OpKind kind = client::OpKind::Write;  // as issued
  Bytes op;
  SimTime issued = 0;
  bool done = false;
  client::Outcome outcome;
};

// Node ids: agreement or flat replicas from 1, execution group g from 100*g,
// clients from 10000, the admin client 9999.
inline constexpr std::uint32_t kClientBase = 10000;
inline constexpr NodeId kAdminClient{9999};

class Deployment {
 public:
  explicit Deployment(ScenarioConfig cfg);
  ~Deployment();
  Deployment(const Deployment&) = delete;
  Deployment& operator=(const Deployment&) = delete;

  const ScenarioConfig& config() const { return cfg_; }

  // Runs the workload, fault plan and events, then drains until every correct
  // client finished or the horizon passed.
  void run();
  void run_until(SimTime t) { sim_.run_until(t); }
  SimTime horizon() const { return ms(cfg_.duration_ms + cfg_.drain_ms); }

  Simulator& sim() { return sim_; }
  Network& net() { return *net_; }
  const Topology& topology() const { return cfg_.topology; }
  const Directory& directory() const { return dir_; }
  TraceLog& trace() { return trace_; }
  const TraceLog& trace() const { return trace_; }
  const CryptoProvider& crypto() const { return crypto_; }

  const std::vector<OpRecord>& ops() const { return ops_; }
  std::size_t outstanding() const;  // unfinished operations of correct clients

  const std::vector<NodeId>& agreement_ids() const { return agreement_ids_; }
  replica::AgreementReplica* agreement(std::size_t i) { return agreement_[i].get(); }
  std::size_t agreement_size() const { return agreement_.size(); }
  replica::FlatReplica* flat(std::size_t i) { return flat_[i].get(); }
  std::size_t flat_size() const { return flat_.size(); }
  std::vector<replica::ExecutionReplica*> group(GroupId g);
  const std::vector<GroupEntry>& groups() const { return groups_; }  // every group ever created
  std::size_t client_count() const { return clients_.size(); }
  client::Client* client_ptr(std::size_t i) { return clients_[i].get(); }  // null for rogue clients
  const std::string& client_region(std::size_t i) const { return client_regions_[i]; }
  const std::vector<client::Outcome>& admin_outcomes() const { return admin_log_; }

  // Crashed, partitioned or Byzantine at some point of the run.
  bool faulty(NodeId n) const { return faulty_.count(n) != 0; }
  // Deviates from the protocol; excluded from consistency checks.
  bool byzantine(NodeId n) const { return byzantine_.count(n) != 0; }
  const std::set<NodeId>& faulty_nodes() const { return faulty_; }
  // Leader of the highest view among correct ordering replicas.
  NodeId current_leader() const;

  // Client round-trip-based retry period for a group.
  SimTime retry_period(const std::string& client_region, const GroupEntry& g) const;

 private:
  struct Host;

  Runtime& add_node(NodeInfo info);
  void build_spider();
  void build_flat();
  void build_clients();
  GroupEntry make_group(GroupId id, const std::string& region);
  void start_group(const GroupEntry& g);
  void apply_faults();
  void apply_event(EventSpec e);
  void run_admin();
  void schedule_next(std::size_t client, SimTime earliest);
  void issue(std::size_t client);
  Bytes next_op(std::size_t client, client::OpKind& kind);
  std::vector<checkpoint::GroupView> peer_views(GroupId self) const;

  ScenarioConfig cfg_;
  Simulator sim_;
  Directory dir_;
  TraceLog trace_;
  CryptoProvider crypto_;
  std::unique_ptr<Network> net_;
  std::vector<std::unique_ptr<Runtime>> runtimes_;

  std::vector<NodeId> agreement_ids_;
  std::vector<std::unique_ptr<replica::AgreementReplica>> agreement_;
  std::vector<std::unique_ptr<replica::FlatReplica>> flat_;
  std::vector<GroupEntry> groups_;
  std::set<GroupId> removed_;
  std::map<GroupId, std::vector<std::unique_ptr<replica::ExecutionReplica>>> exec_;
  std::vector<std::unique_ptr<client::Client>> clients_;
  std::vector<std::string> client_regions_;
  std::vector<std::mt19937_64> client_rng_;
  std::vector<std::size_t> client_ops_;
  std::vector<std::unique_ptr<Node>> rogues_;  // equivocating clients
  std::unique_ptr<client::Client> admin_;
  std::vector<EventSpec> admin_queue_;
  std::vector<client::Outcome> admin_log_;
  std::set<NodeId> faulty_;
  std::set<NodeId> byzantine_;
  std::map<NodeId, Interceptor> pending_interceptors_;
  std::vector<OpRecord> ops_;
  std::map<std::size_t, std::size_t> open_op_;  // client index -> ops_ index
};

}  // namespace georep::harness
