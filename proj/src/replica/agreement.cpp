#include "georep/replica/agreement.hpp"

#include <algorithm>

#include "georep/core/crypto.hpp"

namespace georep::replica {

std::vector<std::string> validate(const AgreementConfig& cfg) {
  std::vector<std::string> errors;
  if (cfg.members.size() < 3 * static_cast<std::size_t>(cfg.f_a) + 1) errors.push_back("agreement group needs 3f_a+1 members");
  if (cfg.k_a == 0) errors.push_back("k_a must be positive");
  if (cfg.window < cfg.k_a) errors.push_back("agreement window must be at least k_a");
  if (!cfg.groups.empty() && cfg.z >= cfg.groups.size()) errors.push_back("z must be below the number of execution groups");
  std::set<GroupId> ids;
  for (const auto& g : cfg.groups) {
    if (g.id == kAgreementGroup) errors.push_back("group id 0 is reserved for the agreement group");
    if (!ids.insert(g.id).second) errors.push_back("duplicate group id " + std::to_string(g.id.value));
    if (g.members.size() < 2 * static_cast<std::size_t>(cfg.f_e) + 1) {
      errors.push_back("group " + std::to_string(g.id.value) + " needs 2f_e+1 members");
    }
  }
  if (cfg.channels.commit_capacity == 0 || cfg.channels.request_capacity == 0) errors.push_back("channel capacity must be positive");
  return errors;
}

AgreementReplica::AgreementReplica(AgreementConfig cfg, Runtime& rt)
    : Node(rt),
      cfg_(std::move(cfg)),
      cp_(checkpoint::CheckpointConfig{checkpoint::GroupView{kAgreementGroup, cfg_.members, cfg_.f_a}}, rt,
          [this](Seq s, const Bytes& st) { on_stable(s, st); }) {
  if (auto errors = validate(cfg_); !errors.empty()) throw ConfigError(errors.front());
  auto params = cfg_.ordering_params;
  params.members = cfg_.members;
  params.f = cfg_.f_a;
  params.group = kAgreementGroup;
  auto deliver = [this](Seq s, const Request& item, ordering::Ordering::Release release) {
    on_deliver(s, item, std::move(release));
  };
  ord_ = cfg_.ordering == OrderingImpl::MiniBft ? ordering::make_minibft(params, rt, deliver)
                                                : ordering::make_sequencer(params, rt, deliver);
  win_hi_ = cfg_.window;
  std::vector<GroupEntry> groups = cfg_.groups;
  std::sort(groups.begin(), groups.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  for (const auto& g : groups) {
    st_.registry.push_back(g);
    st_.joined[g.id] = 0;
    open_link(g, 0);
  }
}

void AgreementReplica::close() {
  closed_ = true;
  ord_->close();
  cp_.close();
  for (auto& [g, l] : links_) {
    l.requests->close();
    l.commits->close();
  }
}

void AgreementReplica::open_link(const GroupEntry& g, Seq joined) {
  Link l;
  l.requests = irmc::make_receiver(cfg_.channels.request_variant, request_channel(g, cfg_.f_e, cfg_.members, cfg_.f_a, cfg_.channels), rt_);
  l.commits = irmc::make_sender(cfg_.channels.commit_variant, commit_channel(g, cfg_.f_e, cfg_.members, cfg_.f_a, cfg_.channels), rt_);
  l.requests->set_admission([this](Subchannel sc) {
    return sc != 0 && sc <= std::numeric_limits<std::uint32_t>::max() && authorized(ClientId{static_cast<std::uint32_t>(sc)});
  });
  l.requests->set_subchannel_listener(
      [this, id = g.id](Subchannel sc) { intake(id, ClientId{static_cast<std::uint32_t>(sc)}); });
  // a group added at sequence j sees Executes from j+1 on
  if (joined > 0) l.commits->move_window(0, joined + 1);
  links_.emplace(g.id, std::move(l));
}

void AgreementReplica::close_link(GroupId g) {
  auto it = links_.find(g);
  if (it == links_.end()) return;
  it->second.requests->close();
  it->second.commits->close();
  retired_.push_back(std::move(it->second));
  links_.erase(it);
  std::vector<Seq> affected;
  for (const auto& [s, f] : fan_outs_) {
    if (f.pending.count(g)) affected.push_back(s);
  }
  for (Seq s : affected) sent(s, g);
}

void AgreementReplica::on_message(const Envelope& env) {
  if (closed_) return;
  const Message& m = env.msg();
  if (auto ch = channel_of(m)) {
    auto it = links_.find(ch->group);
    if (it == links_.end()) return;
    if (ch->kind == ChannelKind::Request) it->second.requests->handle(env);
    if (ch->kind == ChannelKind::Commit) it->second.commits->handle(env);
  } else if (const auto* q = std::get_if<RegistryQuery>(&m)) {
    rt_.out().send(env.from, RegistryReply{q->nonce, st_.registry});
  } else if (!cp_.handle(env)) {
    ord_->handle(env);
  }
}

// One receive loop per (group, client) subchannel.
void AgreementReplica::intake(GroupId g, ClientId c) {
  auto it = links_.find(g);
  if (closed_ || it == links_.end()) return;
  Position& pos = it->second.cursor[c];
  if (pos == 0) {
    auto t = st_.t.find(c);
    pos = t == st_.t.end() ? 1 : t->second + 1;
  }
  const Position p = pos;
  it->second.requests->receive(c.value, p, [this, g, c, p](irmc::ReceiveResult r) { on_request(g, c, p, r); });
}

void AgreementReplica::on_request(GroupId g, ClientId c, Position p, const irmc::ReceiveResult& r) {
  auto it = links_.find(g);
  if (closed_ || it == links_.end()) return;
  Position& pos = it->second.cursor[c];
  if (pos != p) return;
  if (const auto* old = std::get_if<irmc::TooOld>(&r)) {
    pos = std::max(pos, old->start);  // the client already sent a newer request
  } else {
    try {
      const auto item = decode<Request>(std::get<Bytes>(r));
      if (item.client() == c && item.group == g && item.counter() == p && item.kind() != RequestKind::Noop &&
          valid_write(rt_.crypto(), item.request)) {
        ord_->order(item);
      }
    } catch (const DecodeError&) {
    }
    pos = p + 1;
  }
  intake(g, c);
}

void AgreementReplica::on_deliver(Seq s, const Request& item, ordering::Ordering::Release release) {
  if (closed_) return;
  if (s <= s_n_) {
    release();
    return;
  }
  if (s > win_hi_) {
    rt_.log("a_park", "Order", Detail().add("s", s).add("hi", win_hi_).str());
    parked_ = Parked{s, item, std::move(release)};
    return;
  }
  process(s, item, std::move(release));
}

ExecStatus AgreementReplica::apply_admin(const Request& item, std::vector<GroupEntry>& added,
                                         std::vector<GroupId>& removed) {
  if (item.client() != cfg_.admin) return ExecStatus::Rejected;
  AdminOp op;
  try {
    op = decode<AdminOp>(item.request.write.op);
  } catch (const DecodeError&) {
    return ExecStatus::Rejected;
  }
  auto& reg = st_.registry;
  auto find = [&reg](GroupId g) {
    return std::find_if(reg.begin(), reg.end(), [g](const GroupEntry& e) { return e.id == g; });
  };
  if (const auto* add = std::get_if<AddGroup>(&op)) {
    const GroupEntry& g = add->group;
    // ids are never reused, so a removed group's channels cannot be confused with a new one
    if (g.id == kAgreementGroup || st_.joined.count(g.id) || g.members.size() < 2 * static_cast<std::size_t>(cfg_.f_e) + 1) {
      return ExecStatus::Rejected;
    }
    reg.insert(std::upper_bound(reg.begin(), reg.end(), g, [](const auto& a, const auto& b) { return a.id < b.id; }), g);
    added.push_back(g);
    return ExecStatus::Ok;
  }
  const GroupId id = std::get<RemoveGroup>(op).id;
  auto it = find(id);
  if (it == reg.end()) return ExecStatus::Rejected;
  reg.erase(it);
  removed.push_back(id);
  return ExecStatus::Ok;
}

void AgreementReplica::process(Seq s, const Request& item, ordering::Ordering::Release release) {
  HistEntry e{s, item, ExecStatus::Ok};
  std::vector<GroupEntry> added;
  std::vector<GroupId> removed;
  if (item.kind() == RequestKind::Admin) {
    e.status = apply_admin(item, added, removed);
    for (const auto& g : added) st_.joined[g.id] = s;
    rt_.log("a_reconfig", e.status == ExecStatus::Ok ? "Ok" : "Rejected",
            Detail().add("s", s).add("added", added.empty() ? 0u : added[0].id.value).add("removed", removed.empty() ? 0u : removed[0].value).str());
  }
  if (item.kind() != RequestKind::Noop) {
    Counter& t = st_.t[item.client()];
    t = std::max(t, item.counter());
  }
  s_n_ = s;
  st_.hist.push_back(e);
  while (st_.hist.size() > cfg_.channels.commit_capacity) st_.hist.erase(st_.hist.begin());
  for (GroupId g : removed) close_link(g);
  std::optional<Bytes> snapshot;
  if (s % cfg_.k_a == 0) {
    snapshot = encode(st_);
    rt_.log("a_state", "Checkpoint", Detail().add("s", s).str(), state_digest().short_hex());
  }
  fan_out(e, [this, s, snapshot = std::move(snapshot), release = std::move(release)] {
    if (snapshot) cp_.gen_cp(s, *snapshot);
    release();
  });
  for (const auto& g : added) open_link(g, s);
}

void AgreementReplica::fan_out(const HistEntry& e, std::function<void()> complete) {
  FanOut f;
  f.complete = std::move(complete);
  for (const auto& [g, l] : links_) f.pending.insert(g);
  const std::size_t n = f.pending.size();
  f.needed = n > cfg_.z ? n - cfg_.z : std::min<std::size_t>(n, 1);
  if (f.needed == 0) {
    rt_.defer(std::move(f.complete));
    return;
  }
  fan_outs_[e.s] = std::move(f);
  std::vector<GroupId> targets;
  for (const auto& [g, l] : links_) targets.push_back(g);
  for (GroupId g : targets) {
    auto it = links_.find(g);
    if (it == links_.end()) continue;
    it->second.commits->send(0, e.s, encode(execute_for(e, g)), [this, s = e.s, g] { sent(s, g); });
  }
}

void AgreementReplica::sent(Seq s, GroupId g) {
  auto it = fan_outs_.find(s);
  if (it == fan_outs_.end() || !it->second.pending.erase(g)) return;
  if (++it->second.done < it->second.needed) return;
  rt_.log("a_fanout", "Execute", Detail().add("s", s).add("groups", it->second.done).str());
  // completing releases the next delivery; never do that from inside a send
  rt_.defer(std::move(it->second.complete));
  fan_outs_.erase(it);
}

void AgreementReplica::sync_links(const AgreementState& st) {
  std::vector<GroupId> gone;
  for (const auto& [g, l] : links_) {
    if (std::none_of(st.registry.begin(), st.registry.end(), [g](const GroupEntry& e) { return e.id == g; })) gone.push_back(g);
  }
  for (GroupId g : gone) close_link(g);
  for (const auto& e : st.registry) {
    if (!links_.count(e.id)) open_link(e, st.joined.count(e.id) ? st.joined.at(e.id) : 0);
  }
}

void AgreementReplica::on_stable(Seq s, const Bytes& bytes) {
  AgreementState st;
  try {
    st = decode<AgreementState>(bytes);
  } catch (const DecodeError&) {
    return;
  }
  const auto cert = cp_.stable().at(s).certificate;
  const std::size_t kept = std::min<std::size_t>(s, st.hist.size());
  if (s > s_n_) {
    sync_links(st);
    st_ = std::move(st);
    s_n_ = s;
    rt_.log("a_jump", "Checkpoint", Detail().add("s", s).str(), state_digest().short_hex());
    fan_outs_.erase(fan_outs_.begin(), fan_outs_.upper_bound(s));
    if (parked_ && parked_->s <= s) parked_.reset();
    for (const auto& e : st_.hist) {
      for (auto& [g, l] : links_) {
        auto j = st_.joined.find(g);
        if (j == st_.joined.end() || j->second < e.s) l.commits->send(0, e.s, encode(execute_for(e, g)), [] {});
      }
    }
    for (auto& [g, l] : links_) {
      std::vector<ClientId> moved;
      for (auto& [c, pos] : l.cursor) {
        auto t = st_.t.find(c);
        if (t != st_.t.end() && t->second + 1 > pos) {
          pos = t->second + 1;
          moved.push_back(c);
        }
      }
      for (ClientId c : moved) intake(g, c);
    }
    ord_->retire([this](const Request& r) {
      auto t = st_.t.find(r.client());
      return t != st_.t.end() && r.counter() <= t->second;
    });
  }
  // global flow control: positions older than the retained history are given up
  const Position low = s + 1 - kept;
  for (auto& [g, l] : links_) l.commits->move_window(0, low);
  win_lo_ = s + 1;
  win_hi_ = s + cfg_.window;
  if (parked_ && parked_->s <= win_hi_) {
    Parked p = std::move(*parked_);
    parked_.reset();
    process(p.s, p.item, std::move(p.release));
  }
  ord_->gc(s + 1, cert);
}

}  // namespace georep::replica
