#include "georep/checkpoint/checkpoint.hpp"

#include <algorithm>
#include <set>

#include "georep/core/crypto.hpp"

namespace georep::checkpoint {

namespace {

bool contains(const std::vector<NodeId>& v, NodeId n) { return std::find(v.begin(), v.end(), n) != v.end(); }

Bytes vote_bytes(const CheckpointMsg& cp) { return encode(Message{cp}); }

}  // namespace

bool valid_bundle(const CryptoProvider& crypto, const GroupView& group, const CpState& st) {
  const Digest h = sha256(st.state);
  std::set<NodeId> signers;
  for (const auto& v : st.certificate) {
    if (v.cp.group != group.id || v.cp.s != st.s || v.cp.h != h) return false;
    if (!contains(group.members, v.sig.signer) || !signers.insert(v.sig.signer).second) return false;
    if (!crypto.valid_signature(v.sig, vote_bytes(v.cp))) return false;
  }
  return signers.size() >= group.f + 1;
}

CheckpointComponent::CheckpointComponent(CheckpointConfig cfg, Runtime& rt, StableFn on_stable)
    : cfg_(std::move(cfg)), rt_(rt), on_stable_(std::move(on_stable)) {
  gossip();
}

bool CheckpointComponent::member(NodeId n) const { return contains(cfg_.group.members, n); }

std::vector<NodeId> CheckpointComponent::peers() const {
  std::vector<NodeId> out;
  for (NodeId n : cfg_.group.members) {
    if (n != rt_.self()) out.push_back(n);
  }
  return out;
}

void CheckpointComponent::gen_cp(Seq s, Bytes state) {
  if (closed_ || s <= delivered_ || own_.count(s)) return;
  CheckpointMsg cp{cfg_.group.id, s, sha256(state)};
  rt_.log("cp_gen", "Checkpoint", Detail().add("group", cfg_.group.id.value).add("s", s).str(), cp.h.hex());
  own_.emplace(s, std::move(state));
  SignedCheckpoint v{cp, rt_.out().signer().sign(vote_bytes(cp))};
  votes_[s].emplace(rt_.self(), Vote{cp.h, v});
  // the envelope signature over the vote is the certificate entry
  rt_.out().multicast(peers(), cp, AuthKind::Signature);
  try_stable(s);
}

bool CheckpointComponent::handle(const Envelope& env) {
  const Message& m = env.msg();
  if (const auto* cp = std::get_if<CheckpointMsg>(&m)) {
    if (const auto* sig = std::get_if<Signature>(&env.auth())) on_vote(env.from, SignedCheckpoint{*cp, *sig});
  } else if (const auto* a = std::get_if<CpAnnounce>(&m)) {
    on_announce(env.from, *a);
  } else if (const auto* f = std::get_if<CpFetch>(&m)) {
    on_fetch(env.from, *f);
  } else if (const auto* st = std::get_if<CpState>(&m)) {
    on_state(env.from, *st);
  } else {
    return false;
  }
  return true;
}

void CheckpointComponent::on_vote(NodeId from, const SignedCheckpoint& v) {
  if (closed_ || !member(from) || v.sig.signer != from || v.cp.group != cfg_.group.id) return;
  if (v.cp.s <= delivered_) return;
  if (!rt_.crypto().valid_signature(v.sig, vote_bytes(v.cp))) return;
  auto& slot = votes_[v.cp.s];
  if (slot.count(from)) return;
  slot.emplace(from, Vote{v.cp.h, v});
  // a member cannot pin unbounded memory with votes for far-away sequences
  std::vector<Seq> mine;
  for (const auto& [s, by] : votes_) {
    if (by.count(from)) mine.push_back(s);
  }
  if (mine.size() > cfg_.pending_votes) {
    votes_[mine.front()].erase(from);
    if (votes_[mine.front()].empty()) votes_.erase(mine.front());
  }
  try_stable(v.cp.s);
}

void CheckpointComponent::try_stable(Seq s) {
  if (s <= delivered_) return;
  auto it = votes_.find(s);
  if (it == votes_.end()) return;
  std::map<Digest, std::vector<SignedCheckpoint>> by_digest;
  for (const auto& [n, vote] : it->second) by_digest[vote.h].push_back(vote.signed_cp);
  for (auto& [h, cert] : by_digest) {
    if (cert.size() < cfg_.group.f + 1) continue;
    auto own = own_.find(s);
    if (own != own_.end() && sha256(own->second) == h) {
      cert.resize(cfg_.group.f + 1);
      deliver(Bundle{s, own->second, std::move(cert)}, "votes");
      return;
    }
    // certified elsewhere; our own state is missing or differs
    if (own != own_.end()) {
      fetch_cp(s);
    } else {
      catch_up_later(s);
    }
    return;
  }
}

void CheckpointComponent::deliver(Bundle b, const char* via) {
  if (b.s <= delivered_) return;
  delivered_ = b.s;
  const Seq s = b.s;
  const Digest h = sha256(b.state);
  Bytes state = b.state;
  stable_[s] = std::move(b);
  while (stable_.size() > cfg_.retained) stable_.erase(stable_.begin());
  own_.erase(own_.begin(), own_.upper_bound(s));
  votes_.erase(votes_.begin(), votes_.upper_bound(s));
  if (fetch_target_ && *fetch_target_ <= s) {
    fetch_target_.reset();
    fetch_timer_.cancel();
  }
  rt_.log("cp_stable", "Checkpoint", Detail().add("group", cfg_.group.id.value).add("s", s).add("via", via).str(),
          h.hex());
  announce();
  on_stable_(s, state);
}

void CheckpointComponent::announce() {
  if (delivered_ == 0) return;
  rt_.out().multicast(peers(), CpAnnounce{cfg_.group.id, delivered_});
}

// Peers not known to hold our latest stable checkpoint hear about it periodically.
void CheckpointComponent::gossip() {
  gossip_timer_ = rt_.after(cfg_.gossip_period, [this] {
    if (closed_) return;
    if (delivered_ > 0) {
      std::vector<NodeId> behind;
      for (NodeId p : peers()) {
        if (peer_latest_[p] < delivered_) behind.push_back(p);
      }
      if (!behind.empty()) rt_.out().multicast(behind, CpAnnounce{cfg_.group.id, delivered_});
    }
    gossip();
  });
}

void CheckpointComponent::on_announce(NodeId from, const CpAnnounce& a) {
  if (closed_ || !member(from) || a.group != cfg_.group.id) return;
  Seq& latest = peer_latest_[from];
  latest = std::max(latest, a.s);
  if (a.s > delivered_) catch_up_later(a.s);
}

void CheckpointComponent::catch_up_later(Seq s) {
  if (fetch_target_ && *fetch_target_ >= s) return;
  grace_target_ = std::max(grace_target_, s);
  if (grace_timer_.pending()) return;
  grace_timer_ = rt_.after(cfg_.fetch_grace, [this] {
    if (!closed_ && delivered_ < grace_target_) fetch_cp(grace_target_);
  });
}

void CheckpointComponent::fetch_cp(Seq s_min, bool remote_first) {
  if (closed_ || s_min <= delivered_) return;
  const bool can_go_remote = remote_source(0).has_value();
  if (fetch_target_) {
    fetch_target_ = std::max(*fetch_target_, s_min);
    return;
  }
  fetch_target_ = s_min;
  remote_phase_ = remote_first && can_go_remote;
  remote_index_ = 0;
  phase_started_ = rt_.now();
  rt_.log("cp_fetch", "Checkpoint",
          Detail().add("group", cfg_.group.id.value).add("s_min", s_min).add("scope", remote_phase_ ? "remote" : "local").str());
  fetch_round();
}

std::optional<GroupView> CheckpointComponent::remote_source(std::size_t k) const {
  if (!remote_groups_) return std::nullopt;
  std::vector<GroupView> groups;
  for (auto& g : remote_groups_()) {
    if (g.id != cfg_.group.id && !g.members.empty()) groups.push_back(std::move(g));
  }
  if (groups.empty()) return std::nullopt;
  std::sort(groups.begin(), groups.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  return groups[k % groups.size()];
}

void CheckpointComponent::fetch_round() {
  if (closed_ || !fetch_target_) return;
  const CpFetch req{*fetch_target_};
  if (!remote_phase_ && rt_.now() - phase_started_ >= cfg_.fetch_grace && remote_source(0)) {
    remote_phase_ = true;
    rt_.log("cp_fetch", "Checkpoint",
            Detail().add("group", cfg_.group.id.value).add("s_min", req.s_min).add("scope", "remote").str());
  }
  if (!remote_phase_) {
    rt_.out().multicast(peers(), req);
    fetch_timer_ = rt_.after(cfg_.fetch_retry, [this] { fetch_round(); });
    return;
  }
  // one remote group per round, in id order, so members of a group tend to adopt the same source
  if (auto g = remote_source(remote_index_)) rt_.out().multicast(g->members, req);
  fetch_timer_ = rt_.after(cfg_.remote_retry, [this] {
    ++remote_index_;
    fetch_round();
  });
}

void CheckpointComponent::on_fetch(NodeId from, const CpFetch& f) {
  if (closed_ || stable_.empty() || from == rt_.self()) return;
  const Bundle& latest = stable_.rbegin()->second;
  if (latest.s < f.s_min) return;
  rt_.out().send(from, CpState{latest.s, latest.state, latest.certificate});
}

void CheckpointComponent::on_state(NodeId from, const CpState& st) {
  (void)from;
  if (closed_ || st.s <= delivered_ || st.certificate.empty()) return;
  const GroupId source = st.certificate.front().cp.group;
  std::optional<GroupView> view;
  if (source == cfg_.group.id) {
    view = cfg_.group;
  } else if (remote_groups_) {
    for (auto& g : remote_groups_()) {
      if (g.id == source) view = std::move(g);
    }
  }
  if (!view || !valid_bundle(rt_.crypto(), *view, st)) return;
  deliver(Bundle{st.s, st.state, st.certificate}, source == cfg_.group.id ? "fetch" : "remote");
}

void CheckpointComponent::close() {
  closed_ = true;
  fetch_timer_.cancel();
  grace_timer_.cancel();
  gossip_timer_.cancel();
}

}  // namespace georep::checkpoint
