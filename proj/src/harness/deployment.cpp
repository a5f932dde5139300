#include "georep/harness/deployment.hpp"

#include <algorithm>

#include "georep/app/kv.hpp"
#include "georep/harness/faults.hpp"

namespace georep::harness {

namespace {

constexpr std::uint32_t kClientZone = 3;  // clients sit outside the replicas' zones

double one_way(const Topology& topo, const std::string& a, const std::string& b) {
  return topo.delay_ms(Placement{a, 0}, Placement{b, a == b ? 1u : 0u});
}

}  // namespace

Deployment::Deployment(ScenarioConfig cfg)
    : cfg_(std::move(cfg)), sim_(cfg_.seed), trace_(cfg_.trace), crypto_(cfg_.seed) {
  if (auto errors = validate(cfg_); !errors.empty()) {
    std::string msg = "invalid scenario:";
    for (const auto& e : errors) msg += "\n  " + e;
    throw ConfigError(msg);
  }
  trace_.add(0, "scenario", NodeId{0}, mode_name(cfg_.mode),
             Detail()
                 .add("name", cfg_.name)
                 .add("seed", cfg_.seed)
                 .add("beyond_threshold", cfg_.beyond_threshold ? 1 : 0)
                 .str());
  net_ = std::make_unique<Network>(sim_, cfg_.topology, dir_, trace_);
  net_->set_wan_loss(cfg_.wan_loss);
  if (cfg_.mode == Mode::FlatBft) {
    build_flat();
  } else {
    build_spider();
  }
  build_clients();
  apply_faults();
  for (const auto& e : cfg_.events) {
    sim_.schedule_at(ms(e.at_ms), kAdminClient, [this, e] { apply_event(e); });
  }
}

Deployment::~Deployment() = default;

Runtime& Deployment::add_node(NodeInfo info) {
  const NodeId id = info.id;
  static constexpr const char* kRoles[] = {"agreement", "execution", "client", "flat"};
  trace_.add(sim_.now(), "node", id, kRoles[static_cast<int>(info.role)],
             Detail()
                 .add("group", info.group.value)
                 .add("region", info.where.region)
                 .add("zone", info.where.zone)
                 .str());
  dir_.add(std::move(info));
  crypto_.register_principal(id);
  runtimes_.push_back(std::make_unique<Runtime>(sim_, *net_, crypto_, trace_, id));
  return *runtimes_.back();
}

GroupEntry Deployment::make_group(GroupId id, const std::string& region) {
  GroupEntry g{id, region, {}};
  for (std::uint32_t i = 0; i < 2 * cfg_.f_e + 1; ++i) g.members.push_back(NodeId{100 * id.value + i});
  return g;
}

std::vector<checkpoint::GroupView> Deployment::peer_views(GroupId self) const {
  std::vector<checkpoint::GroupView> out;
  for (const auto& g : groups_) {
    if (g.id != self && !removed_.count(g.id)) out.push_back(checkpoint::GroupView{g.id, g.members, cfg_.f_e});
  }
  return out;
}

void Deployment::start_group(const GroupEntry& g) {
  replica::ChannelParams channels;
  channels.request_variant = cfg_.request_variant;
  channels.commit_variant = cfg_.commit_variant;
  channels.request_capacity = cfg_.request_capacity;
  channels.commit_capacity = cfg_.commit_capacity;
  if (cfg_.wan_loss > 0) channels.retransmit_period = ms(100);
  auto& replicas = exec_[g.id];
  for (std::uint32_t i = 0; i < g.members.size(); ++i) {
    Runtime& rt = add_node(NodeInfo{g.members[i], Role::Execution, g.id, i, {g.region, i % 3}});
    replica::ExecutionConfig ec;
    ec.group = g;
    ec.f_e = cfg_.f_e;
    ec.agreement = agreement_ids_;
    ec.f_a = cfg_.f_a;
    ec.channels = channels;
    ec.k_e = cfg_.k_e;
    ec.peer_groups = [this, id = g.id] { return peer_views(id); };
    replicas.push_back(std::make_unique<replica::ExecutionReplica>(ec, rt));
    auto* r = replicas.back().get();
    net_->attach(r->id(), [r](const Envelope& e) { r->receive(e); });
    r->start();
  }
}

void Deployment::build_spider() {
  for (std::uint32_t i = 0; i < 3 * cfg_.f_a + 1; ++i) agreement_ids_.push_back(NodeId{i + 1});
  for (std::size_t g = 0; g < cfg_.groups.size(); ++g) {
    groups_.push_back(make_group(GroupId{static_cast<std::uint32_t>(g + 1)}, cfg_.groups[g]));
  }
  replica::AgreementConfig ac;
  ac.members = agreement_ids_;
  ac.f_a = cfg_.f_a;
  ac.groups = groups_;
  ac.f_e = cfg_.f_e;
  ac.channels.request_variant = cfg_.request_variant;
  ac.channels.commit_variant = cfg_.commit_variant;
  ac.channels.request_capacity = cfg_.request_capacity;
  ac.channels.commit_capacity = cfg_.commit_capacity;
  if (cfg_.wan_loss > 0) ac.channels.retransmit_period = ms(100);
  ac.k_a = cfg_.k_a;
  ac.window = cfg_.window;
  ac.z = cfg_.z;
  ac.admin = kAdminClient;
  ac.ordering = cfg_.mode == Mode::Oracle ? replica::OrderingImpl::Sequencer : replica::OrderingImpl::MiniBft;
  ac.ordering_params.view_timeout = ms(cfg_.view_timeout_ms);
  for (std::uint32_t i = 0; i < agreement_ids_.size(); ++i) {
    Runtime& rt = add_node(NodeInfo{agreement_ids_[i], Role::Agreement, kAgreementGroup, i, {cfg_.agreement_region, i % 3}});
    agreement_.push_back(std::make_unique<replica::AgreementReplica>(ac, rt));
    auto* r = agreement_.back().get();
    net_->attach(r->id(), [r](const Envelope& e) { r->receive(e); });
  }
  for (const auto& g : groups_) start_group(g);
}

void Deployment::build_flat() {
  std::vector<std::string> regions = cfg_.flat_regions;
  if (regions.empty()) {
    std::vector<std::string> order{cfg_.agreement_region};
    for (const auto& r : cfg_.topology.regions()) {
      if (r != cfg_.agreement_region) order.push_back(r);
    }
    for (std::size_t i = 0; i < 3 * cfg_.f_a + 1; ++i) regions.push_back(order[i % order.size()]);
  }
  for (std::uint32_t i = 0; i < regions.size(); ++i) agreement_ids_.push_back(NodeId{i + 1});
  // suspicion must outlast a wide-area consensus round
  double max_rtt = 0;
  for (const auto& a : regions) {
    for (const auto& b : regions) max_rtt = std::max(max_rtt, 2 * one_way(cfg_.topology, a, b));
  }
  replica::FlatConfig fc;
  fc.members = agreement_ids_;
  fc.f = cfg_.f_a;
  fc.k = cfg_.k_a;
  fc.ordering_params.view_timeout = ms(std::max(cfg_.view_timeout_ms, 4 * max_rtt));
  std::map<std::string, std::uint32_t> zone;
  for (std::uint32_t i = 0; i < regions.size(); ++i) {
    Runtime& rt = add_node(NodeInfo{agreement_ids_[i], Role::Flat, kAgreementGroup, i, {regions[i], zone[regions[i]]++ % 3}});
    flat_.push_back(std::make_unique<replica::FlatReplica>(fc, rt));
    auto* r = flat_.back().get();
    net_->attach(r->id(), [r](const Envelope& e) { r->receive(e); });
  }
  groups_.push_back(GroupEntry{kAgreementGroup, regions[0], agreement_ids_});
}

SimTime Deployment::retry_period(const std::string& region, const GroupEntry& g) const {
  double client_rtt = 0, group_rtt = 0;
  if (cfg_.mode == Mode::FlatBft) {
    for (NodeId m : g.members) {
      const auto& where = dir_.at(m).where;
      client_rtt = std::max(client_rtt, 2 * cfg_.topology.delay_ms(Placement{region, kClientZone}, where));
      for (NodeId o : g.members) group_rtt = std::max(group_rtt, 2 * cfg_.topology.delay_ms(where, dir_.at(o).where));
    }
  } else {
    client_rtt = 2 * cfg_.topology.delay_ms(Placement{region, kClientZone}, Placement{g.region, 0});
    group_rtt = 2 * one_way(cfg_.topology, g.region, cfg_.agreement_region);
  }
  // floor: several suspicion timeouts, so a busy but healthy group is not abandoned
  return ms(std::max(2 * (client_rtt + group_rtt), 4 * cfg_.view_timeout_ms));
}

void Deployment::build_clients() {
  std::set<std::uint32_t> rogue;
  for (const auto& f : cfg_.faults) {
    if (f.behavior == Behavior::EquivocatingClient && f.index) rogue.insert(*f.index);
  }
  auto make_config = [this](const std::string& region) {
    client::ClientConfig cc;
    cc.agreement = agreement_ids_;
    cc.f_a = cfg_.f_a;
    cc.f_reply = cfg_.mode == Mode::FlatBft ? cfg_.f_a : cfg_.f_e;
    if (cfg_.mode == Mode::FlatBft) cc.fixed_groups = groups_;
    const Topology& topo = cfg_.topology;
    cc.distance = [&topo, region](const GroupEntry& g) { return region == g.region ? 0.0 : topo.region_delay_ms(region, g.region); };
    cc.retry_period = [this, region](const GroupEntry& g) { return retry_period(region, g); };
    return cc;
  };
  const SimTime interval = ms(1000.0 / cfg_.workload.rate);
  std::uint32_t index = 0;
  for (const auto& spec : cfg_.clients) {
    for (std::uint32_t k = 0; k < spec.count; ++k, ++index) {
      const NodeId id{kClientBase + index};
      Runtime& rt = add_node(NodeInfo{id, Role::Client, kAgreementGroup, index, {spec.region, kClientZone}});
      client_regions_.push_back(spec.region);
      client_rng_.emplace_back(cfg_.seed * 1000003 + index);
      client_ops_.push_back(0);
      if (rogue.count(index)) {
        faulty_.insert(id);
        trace_.add(0, "fault", id, behavior_name(Behavior::EquivocatingClient), Detail().add("at", SimTime{0}).str());
        // the nearest initial group, as a correct client would pick
        const GroupEntry* best = &groups_.front();
        for (const auto& g : groups_) {
          if (one_way(cfg_.topology, spec.region, g.region) < one_way(cfg_.topology, spec.region, best->region)) best = &g;
        }
        auto node = std::make_unique<EquivocatingClient>(rt, *best, interval, ms(cfg_.duration_ms));
        auto* n = node.get();
        net_->attach(id, [n](const Envelope& e) { n->receive(e); });
        n->start(0);
        rogues_.push_back(std::move(node));
        clients_.push_back(nullptr);
        continue;
      }
      clients_.push_back(std::make_unique<client::Client>(make_config(spec.region), rt));
      auto* c = clients_.back().get();
      net_->attach(id, [c](const Envelope& e) { c->receive(e); });
      std::uniform_int_distribution<SimTime> offset(0, interval);
      schedule_next(clients_.size() - 1, offset(client_rng_.back()));
    }
  }
  if (cfg_.mode != Mode::FlatBft) {
    Runtime& rt = add_node(NodeInfo{kAdminClient, Role::Client, kAgreementGroup, index, {cfg_.agreement_region, kClientZone}});
    admin_ = std::make_unique<client::Client>(make_config(cfg_.agreement_region), rt);
    auto* a = admin_.get();
    net_->attach(kAdminClient, [a](const Envelope& e) { a->receive(e); });
  }
}

void Deployment::schedule_next(std::size_t i, SimTime earliest) {
  const auto& w = cfg_.workload;
  if (w.max_ops != 0 && client_ops_[i] >= w.max_ops) return;
  const SimTime at = std::max(sim_.now(), earliest);
  if (at >= ms(cfg_.duration_ms)) return;
  sim_.schedule_at(at, clients_[i]->id(), [this, i] { issue(i); });
}

Bytes Deployment::next_op(std::size_t i, client::OpKind& kind) {
  const auto& w = cfg_.workload;
  auto& rng = client_rng_[i];
  const double total = w.write + w.append + w.strong_read + w.weak_read;
  const double pick = std::uniform_real_distribution<double>(0, total)(rng);
  const bool append = pick >= w.write && pick < w.write + w.append;
  kind = pick < w.write + w.append                 ? client::OpKind::Write
         : pick < w.write + w.append + w.strong_read ? client::OpKind::StrongRead
                                                     : client::OpKind::WeakRead;
  const std::string key = "k" + std::to_string(std::uniform_int_distribution<std::uint32_t>(0, w.keys - 1)(rng));
  if (kind != client::OpKind::Write) return app::get_op(key);
  if (append) return app::append_op(key, "+" + std::to_string(i) + "." + std::to_string(client_ops_[i]));
  std::string value = "c" + std::to_string(i) + "." + std::to_string(client_ops_[i]);
  if (value.size() < w.value_size) value.append(w.value_size - value.size(), '.');
  return app::put_op(key, value);
}

void Deployment::issue(std::size_t i) {
  client::Client& c = *clients_[i];
  if (c.runtime().crashed() || c.busy()) return;
  client::OpKind kind;
  Bytes op = next_op(i, kind);
  ++client_ops_[i];
  const std::size_t slot = ops_.size();
  ops_.push_back(OpRecord{c.id(), client_regions_[i], kind, op, sim_.now(), false, {}});
  const SimTime interval = ms(1000.0 / cfg_.workload.rate);
  auto done = [this, i, slot, interval](const client::Outcome& out) {
    ops_[slot].done = true;
    ops_[slot].outcome = out;
    schedule_next(i, ops_[slot].issued + interval);
  };
  switch (kind) {
    case client::OpKind::Write: c.write(std::move(op), done); break;
    case client::OpKind::StrongRead: c.read_strong(std::move(op), done); break;
    default: c.read_weak(std::move(op), done); break;
  }
}

void Deployment::apply_faults() {
  std::map<NodeId, Runtime*> rt_of;
  for (auto& rt : runtimes_) rt_of[rt->self()] = rt.get();
  for (const auto& f : cfg_.faults) {
    if (f.behavior == Behavior::EquivocatingClient) continue;
    std::vector<NodeId> targets;
    switch (f.target) {
      case Target::Agreement:
        targets.push_back(agreement_ids_.at(*f.index));
        break;
      case Target::Group: {
        const GroupEntry g = make_group(GroupId{*f.group}, "");
        if (f.index) {
          targets.push_back(g.members.at(*f.index));
        } else {
          targets = g.members;
        }
        break;
      }
      case Target::Client:
        targets.push_back(NodeId{kClientBase + *f.index});
        break;
      case Target::Zone:
        for (const auto& [id, info] : dir_.all()) {
          if (info.role != Role::Client && info.where.region == f.region && info.where.zone == f.zone) targets.push_back(id);
        }
        break;
    }
    const SimTime at = ms(f.at_ms);
    for (NodeId n : targets) trace_.add(0, "fault", n, behavior_name(f.behavior), Detail().add("at", at).str());
    switch (f.behavior) {
      case Behavior::Crash:
        for (NodeId n : targets) net_->crash_at(n, at);
        break;
      case Behavior::Partition:
        net_->add_partition(Partition{std::set<NodeId>(targets.begin(), targets.end()), at, ms(*f.until_ms), f.drop});
        break;
      default:
        for (NodeId n : targets) {
          byzantine_.insert(n);
          // groups added later are wired when they start
          if (auto it = rt_of.find(n); it != rt_of.end()) {
            it->second->out().set_interceptor(make_interceptor(f.behavior, sim_, at));
          } else {
            pending_interceptors_.emplace(n, make_interceptor(f.behavior, sim_, at));
          }
        }
        break;
    }
    faulty_.insert(targets.begin(), targets.end());
  }
}

void Deployment::apply_event(EventSpec e) {
  if (e.action == Action::AddGroup) {
    const GroupId id{static_cast<std::uint32_t>(groups_.size() + 1)};
    const GroupEntry g = make_group(id, e.region);
    e.group = id.value;
    groups_.push_back(g);
    start_group(g);
    for (NodeId m : g.members) {
      if (auto it = pending_interceptors_.find(m); it != pending_interceptors_.end()) {
        for (auto& rt : runtimes_) {
          if (rt->self() == m) rt->out().set_interceptor(it->second);
        }
      }
    }
  }
  trace_.add(sim_.now(), "reconfig", kAdminClient, action_name(e.action),
             Detail().add("group", e.group).add("phase", "requested").str());
  admin_queue_.push_back(e);
  if (admin_queue_.size() == 1) run_admin();
}

void Deployment::run_admin() {
  if (admin_queue_.empty()) return;
  const EventSpec e = admin_queue_.front();
  AdminOp op;
  if (e.action == Action::AddGroup) {
    op = AddGroup{groups_.at(e.group - 1)};
  } else {
    op = RemoveGroup{GroupId{e.group}};
  }
  admin_->admin(encode(op), [this, e](const client::Outcome& out) {
    admin_log_.push_back(out);
    trace_.add(sim_.now(), "reconfig", kAdminClient, action_name(e.action),
               Detail()
                   .add("group", e.group)
                   .add("phase", "done")
                   .add("status", static_cast<std::uint32_t>(out.status))
                   .str());
    if (e.action == Action::RemoveGroup && out.status == ResultStatus::Ok) {
      // decommission the removed group's replicas
      removed_.insert(GroupId{e.group});
      for (auto& r : exec_[GroupId{e.group}]) r->close();
    }
    admin_queue_.erase(admin_queue_.begin());
    run_admin();
  });
}

std::vector<replica::ExecutionReplica*> Deployment::group(GroupId g) {
  std::vector<replica::ExecutionReplica*> out;
  auto it = exec_.find(g);
  if (it == exec_.end()) return out;
  for (auto& r : it->second) out.push_back(r.get());
  return out;
}

std::size_t Deployment::outstanding() const {
  std::size_t n = 0;
  for (const auto& op : ops_) n += !op.done && !faulty(op.client);
  return n;
}

NodeId Deployment::current_leader() const {
  View best = 0;
  NodeId leader = agreement_ids_.front();
  auto consider = [&](NodeId id, const ordering::Ordering& o) {
    if (faulty(id) || net_->crashed(id)) return;
    if (o.view() >= best) {
      best = o.view();
      leader = o.leader();
    }
  };
  for (const auto& r : agreement_) consider(r->id(), r->ordering());
  for (const auto& r : flat_) consider(r->id(), r->ordering());
  return leader;
}

void Deployment::run() {
  const SimTime stop = ms(cfg_.duration_ms);
  sim_.run_while([this, stop] { return sim_.now() < stop || outstanding() > 0 || !admin_queue_.empty(); }, horizon());
  // wide-area totals, so reports can be rebuilt from the trace alone
  const NetCounters& c = net_->counters();
  trace_.add(sim_.now(), "wan", NodeId{0}, "total",
             Detail().add("messages", c.wan_messages).add("bytes", c.wan_bytes).str());
  for (const auto& [kind, n] : c.wan_by_kind) {
    trace_.add(sim_.now(), "wan", NodeId{0}, kind,
               Detail().add("messages", n).add("bytes", c.wan_bytes_by_kind.at(kind)).str());
  }
}

}  // namespace georep::harness
