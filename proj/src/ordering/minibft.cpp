#include <algorithm>
#include <deque>
#include <set>

#include "delivery.hpp"
#include "georep/core/crypto.hpp"

namespace georep::ordering {

std::vector<std::string> validate(const OrderingConfig& cfg) {
  std::vector<std::string> errors;
  if (cfg.members.size() < 3 * static_cast<std::size_t>(cfg.f) + 1) {
    errors.push_back("ordering needs at least 3f+1 members, got " + std::to_string(cfg.members.size()));
  }
  std::set<NodeId> seen(cfg.members.begin(), cfg.members.end());
  if (seen.size() != cfg.members.size()) errors.push_back("ordering members must be distinct");
  if (cfg.batch_cap == 0) errors.push_back("batch_cap must be positive");
  if (cfg.max_inflight == 0) errors.push_back("max_inflight must be positive");
  if (cfg.pipeline == 0) errors.push_back("pipeline must be positive");
  if (cfg.view_timeout <= 0) errors.push_back("view_timeout must be positive");
  return errors;
}

bool acceptable_item(const CryptoProvider& crypto, const Request& r) {
  if (r.kind() == RequestKind::Noop) return r == make_noop();
  return valid_write(crypto, r.request);
}

void log_delivery(Runtime& rt, Seq s, const Request& item) {
  rt.log("a_deliver", std::string(kind_name(item.kind())),
         Detail().add("s", s).add("client", item.client().value).add("t", item.counter()).str(),
         digest_of(item).short_hex());
}

namespace {

using Key = std::pair<ClientId, Counter>;

Key key_of(const Request& r) { return {r.client(), r.counter()}; }

class MiniBft final : public Ordering {
 public:
  MiniBft(OrderingConfig cfg, Runtime& rt, DeliverFn deliver)
      : cfg_(std::move(cfg)), rt_(rt), queue_(std::move(deliver)) {
    if (auto errors = validate(cfg_); !errors.empty()) throw ConfigError(errors.front());
    for (NodeId n : cfg_.members) {
      if (n != rt_.self()) others_.push_back(n);
    }
    queue_.on_deliver = [this](Seq s, const Request& item) { on_deliver(s, item); };
    queue_.on_release = [this] {
      for (auto& [c, by_t] : waiting_) {
        for (auto& [t, w] : by_t) w.since = rt_.now();
      }
      arm();
    };
  }

  void order(const Request& r) override {
    if (closed_ || r.kind() == RequestKind::Noop || delivered(r)) return;
    if (!acceptable_item(rt_.crypto(), r)) return;
    auto& by_t = waiting_[r.client()];
    if (by_t.count(r.counter())) return;
    by_t.emplace(r.counter(), Waiting{r, rt_.now()});
    if (leader() == rt_.self() && proposed_.insert(key_of(r)).second) pending_.push_back(r);
    try_propose();
    arm();
    finish();
  }

  void gc(Seq s_min, std::vector<SignedCheckpoint> proof) override {
    if (closed_ || s_min <= low_) return;
    low_ = s_min;
    low_proof_ = std::move(proof);
    rt_.log("a_gc", "Order", Detail().add("s", s_min).str());
    slots_.erase(slots_.begin(), slots_.lower_bound(s_min));
    for (auto it = votes_.begin(); it != votes_.end();) {
      it = it->first.second < s_min ? votes_.erase(it) : std::next(it);
    }
    committed_upto_ = std::max(committed_upto_, s_min - 1);
    next_seq_ = std::max(next_seq_, s_min);
    advance_committed();
    queue_.gc(s_min);
    try_propose();
    finish();
  }

  void retire(const std::function<bool(const Request&)>& covered) override {
    for (auto& [c, by_t] : waiting_) {
      std::erase_if(by_t, [&](const auto& kv) { return covered(kv.second.item); });
    }
    std::erase_if(waiting_, [](const auto& kv) { return kv.second.empty(); });
    std::erase_if(pending_, [&](const Request& r) { return covered(r); });
  }

  bool handle(const Envelope& env) override {
    const Message& m = env.msg();
    const auto* sig = std::get_if<Signature>(&env.auth());
    if (const auto* pp = std::get_if<PrePrepare>(&m)) {
      on_preprepare(env.from, *pp);
    } else if (const auto* p = std::get_if<Prepare>(&m)) {
      if (sig) on_prepare(env.from, SignedPrepare{*p, *sig});
    } else if (const auto* c = std::get_if<CommitPhase>(&m)) {
      on_commit(env.from, *c);
    } else if (const auto* su = std::get_if<Suspect>(&m)) {
      on_suspect(env.from, *su);
    } else if (const auto* vc = std::get_if<ViewChange>(&m)) {
      if (sig) on_view_change(env.from, SignedViewChange{*vc, *sig});
    } else if (const auto* nv = std::get_if<NewView>(&m)) {
      on_new_view(env.from, *nv);
    } else {
      return false;
    }
    finish();
    return true;
  }

  void close() override {
    closed_ = true;
    req_timer_.cancel();
    vc_timer_.cancel();
  }

  View view() const override { return view_; }
  NodeId leader() const override { return leader_of(view_); }
  Seq next_delivery() const override { return queue_.next(); }

 private:
  struct Waiting {
    Request item;
    SimTime since = 0;
  };

  struct Slot {
    View view = 0;  // view of the accepted proposal
    std::optional<Request> item;
    Digest d;
    bool sent_commit = false;
    bool committed = false;
    std::optional<PreparedEntry> prepared;  // survives view changes
  };

  struct Votes {
    std::map<NodeId, std::pair<Digest, std::shared_ptr<const SignedPrepare>>> prepares;
    std::map<NodeId, Digest> commits;
  };

  std::size_t quorum() const { return 2 * cfg_.f + 1; }
  NodeId leader_of(View v) const { return cfg_.members[v % cfg_.members.size()]; }
  bool member(NodeId n) const { return std::find(cfg_.members.begin(), cfg_.members.end(), n) != cfg_.members.end(); }
  bool in_range(Seq s) const { return s >= low_ && s >= 1 && s < queue_.next() + 4 * cfg_.max_inflight; }
  bool accepts_votes_for(View v) const { return v >= view_ && v <= view_ + cfg_.members.size(); }

  bool delivered(const Request& r) const {
    auto it = delivered_counter_.find(r.client());
    return it != delivered_counter_.end() && it->second >= r.counter();
  }

  // ---- normal case ----

  void try_propose() {
    if (closed_ || in_vc_ || leader() != rt_.self()) return;
    while (!pending_.empty() && batches_.size() < cfg_.pipeline && next_seq_ < queue_.next() + cfg_.max_inflight) {
      PrePrepare pp{view_, {}};
      while (!pending_.empty() && pp.proposals.size() < cfg_.batch_cap &&
             next_seq_ < queue_.next() + cfg_.max_inflight) {
        Request r = std::move(pending_.front());
        pending_.pop_front();
        if (delivered(r)) continue;
        pp.proposals.push_back(Proposal{next_seq_++, std::move(r)});
      }
      if (pp.proposals.empty()) break;
      batches_.push_back(pp.proposals.back().s);
      rt_.out().multicast(others_, pp);
      for (const auto& p : pp.proposals) accept(p.s, p.item);
    }
  }

  void on_preprepare(NodeId from, const PrePrepare& pp) {
    if (closed_ || in_vc_ || pp.view != view_ || from != leader() || from == rt_.self()) return;
    for (const auto& p : pp.proposals) {
      if (!in_range(p.s) || !acceptable_item(rt_.crypto(), p.item)) continue;
      auto it = slots_.find(p.s);
      if (it != slots_.end() && it->second.item && it->second.view == view_) continue;  // first proposal wins
      accept(p.s, p.item);
    }
  }

  void accept(Seq s, const Request& item) {
    Slot& sl = slots_[s];
    const Digest d = digest_of(item);
    if (sl.committed && sl.d != d) return;
    sl.view = view_;
    sl.item = item;
    sl.d = d;
    sl.sent_commit = false;
    prepare_out_.push_back(PhaseVote{s, d});
  }

  void on_prepare(NodeId from, const SignedPrepare& sp) {
    if (closed_ || !member(from) || sp.sig.signer != from || !accepts_votes_for(sp.prepare.view)) return;
    auto shared = std::make_shared<const SignedPrepare>(sp);
    for (const auto& v : sp.prepare.votes) {
      if (!in_range(v.s)) continue;
      votes_[{sp.prepare.view, v.s}].prepares.emplace(from, std::make_pair(v.d, shared));
    }
    if (sp.prepare.view != view_) return;
    for (const auto& v : sp.prepare.votes) check_prepared(v.s);
  }

  void on_commit(NodeId from, const CommitPhase& c) {
    if (closed_ || !member(from) || !accepts_votes_for(c.view)) return;
    for (const auto& v : c.votes) {
      if (in_range(v.s)) votes_[{c.view, v.s}].commits.emplace(from, v.d);
    }
    if (c.view != view_) return;
    for (const auto& v : c.votes) check_committed(v.s);
  }

  void check_prepared(Seq s) {
    if (in_vc_) return;
    auto it = slots_.find(s);
    if (it == slots_.end()) return;
    Slot& sl = it->second;
    if (!sl.item || sl.view != view_ || sl.sent_commit) return;
    auto vit = votes_.find({view_, s});
    if (vit == votes_.end()) return;
    std::vector<SignedPrepare> proof;
    for (const auto& [n, vote] : vit->second.prepares) {
      if (vote.first == sl.d) proof.push_back(*vote.second);
    }
    if (proof.size() < quorum()) return;
    proof.resize(quorum());
    sl.prepared = PreparedEntry{s, view_, *sl.item, std::move(proof)};
    sl.sent_commit = true;
    commit_out_.push_back(PhaseVote{s, sl.d});
  }

  void check_committed(Seq s) {
    if (in_vc_) return;
    auto it = slots_.find(s);
    if (it == slots_.end()) return;
    Slot& sl = it->second;
    if (sl.committed || !sl.prepared || sl.prepared->view != view_) return;
    auto vit = votes_.find({view_, s});
    if (vit == votes_.end()) return;
    std::size_t matching = 0;
    for (const auto& [n, d] : vit->second.commits) matching += d == sl.d;
    if (matching < quorum()) return;
    sl.committed = true;
    ready_out_.emplace_back(s, *sl.item);
    advance_committed();
  }

  void advance_committed() {
    for (;;) {
      auto it = slots_.find(committed_upto_ + 1);
      if (it == slots_.end() || !it->second.committed) break;
      ++committed_upto_;
    }
    while (!batches_.empty() && batches_.front() <= committed_upto_) batches_.pop_front();
    try_propose();
  }

  // Sends the votes gathered while handling one input, then hands out commits.
  void finish() {
    while (!prepare_out_.empty() || !commit_out_.empty()) {
      if (!prepare_out_.empty()) {
        Prepare p{view_, std::move(prepare_out_)};
        prepare_out_.clear();
        auto own = std::make_shared<const SignedPrepare>(
            SignedPrepare{p, rt_.out().signer().sign(encode(Message{p}))});
        rt_.out().multicast(others_, p, AuthKind::Signature);
        for (const auto& v : p.votes) votes_[{view_, v.s}].prepares.insert_or_assign(rt_.self(), std::make_pair(v.d, own));
        for (const auto& v : p.votes) check_prepared(v.s);
      }
      if (!commit_out_.empty()) {
        CommitPhase c{view_, std::move(commit_out_)};
        commit_out_.clear();
        rt_.out().multicast(others_, c);
        for (const auto& v : c.votes) votes_[{view_, v.s}].commits.insert_or_assign(rt_.self(), v.d);
        for (const auto& v : c.votes) check_committed(v.s);
      }
    }
    if (draining_) return;
    draining_ = true;
    while (!ready_out_.empty()) {
      auto [s, item] = std::move(ready_out_.front());
      ready_out_.pop_front();
      queue_.offer(s, std::move(item));
    }
    draining_ = false;
  }

  void on_deliver(Seq s, const Request& item) {
    log_delivery(rt_, s, item);
    if (item.kind() == RequestKind::Noop) return;
    Counter& c = delivered_counter_[item.client()];
    c = std::max(c, item.counter());
    auto it = waiting_.find(item.client());
    if (it != waiting_.end()) {
      it->second.erase(it->second.begin(), it->second.upper_bound(c));
      if (it->second.empty()) waiting_.erase(it);
    }
  }

  // ---- suspicion ----

  void arm() {
    if (closed_ || in_vc_ || queue_.busy() || req_timer_.pending() || waiting_.empty()) return;
    SimTime earliest = std::numeric_limits<SimTime>::max();
    for (const auto& [c, by_t] : waiting_) {
      for (const auto& [t, w] : by_t) earliest = std::min(earliest, w.since);
    }
    const SimTime delay = std::max<SimTime>(0, earliest + cfg_.view_timeout - rt_.now());
    req_timer_ = rt_.after(delay, [this] { on_request_timer(); });
  }

  void on_request_timer() {
    if (closed_ || in_vc_ || queue_.busy()) return;
    bool overdue = false;
    for (const auto& [c, by_t] : waiting_) {
      for (const auto& [t, w] : by_t) overdue |= w.since + cfg_.view_timeout <= rt_.now();
    }
    if (!overdue) {
      arm();
      return;
    }
    if (!suspects_[view_].insert(rt_.self()).second) return;
    rt_.log("a_suspect", "Order", Detail().add("view", view_).str());
    rt_.out().multicast(others_, Suspect{view_});
    check_suspects();
    finish();
  }

  void on_suspect(NodeId from, const Suspect& su) {
    if (closed_ || !member(from) || su.view != view_) return;
    suspects_[view_].insert(from);
    check_suspects();
  }

  void check_suspects() {
    if (!in_vc_ && suspects_[view_].size() >= cfg_.f + 1) start_view_change(view_ + 1);
  }

  // ---- view change ----

  void start_view_change(View nv) {
    if (closed_ || nv <= view_ || (in_vc_ && vc_target_ >= nv)) return;
    in_vc_ = true;
    vc_target_ = nv;
    req_timer_.cancel();
    ViewChange vc{nv, low_, low_proof_, {}};
    for (const auto& [s, sl] : slots_) {
      if (s >= low_ && sl.prepared) vc.prepared.push_back(*sl.prepared);
    }
    SignedViewChange own{vc, rt_.out().signer().sign(encode(Message{vc}))};
    rt_.log("a_view_change", "Order", Detail().add("from", view_).add("to", nv).str());
    latest_vc_.insert_or_assign(rt_.self(), own);
    rt_.out().multicast(others_, vc, AuthKind::Signature);
    ++vc_attempts_;
    const SimTime wait = cfg_.view_timeout << std::min<std::uint32_t>(vc_attempts_, 10);
    vc_timer_ = rt_.after(wait, [this, nv] {
      if (!closed_ && in_vc_ && vc_target_ == nv) {
        start_view_change(nv + 1);
        finish();
      }
    });
    maybe_send_new_view();
  }

  bool valid_proof(const PreparedEntry& e) const {
    const PhaseVote want{e.s, digest_of(e.item)};
    std::set<NodeId> signers;
    for (const auto& sp : e.proof) {
      if (sp.prepare.view != e.view || !member(sp.sig.signer)) continue;
      const bool has = std::any_of(sp.prepare.votes.begin(), sp.prepare.votes.end(),
                                   [&](const PhaseVote& v) { return v.s == want.s && v.d == want.d; });
      if (!has || !rt_.crypto().valid_signature(sp.sig, encode(Message{sp.prepare}))) continue;
      signers.insert(sp.sig.signer);
    }
    return signers.size() >= quorum();
  }

  bool valid_low(const ViewChange& vc) const {
    if (vc.low <= 1) return vc.low == 1;
    std::set<NodeId> signers;
    std::optional<Digest> h;
    for (const auto& c : vc.low_proof) {
      if (c.cp.group != cfg_.group || c.cp.s != vc.low - 1 || !member(c.sig.signer)) return false;
      if (h && *h != c.cp.h) return false;
      h = c.cp.h;
      if (!rt_.crypto().valid_signature(c.sig, encode(Message{c.cp}))) return false;
      signers.insert(c.sig.signer);
    }
    return signers.size() >= cfg_.f + 1;
  }

  bool valid_view_change(const SignedViewChange& svc) const {
    const ViewChange& vc = svc.vc;
    if (!member(svc.sig.signer) || !rt_.crypto().valid_signature(svc.sig, encode(Message{vc}))) return false;
    if (!valid_low(vc)) return false;
    for (const auto& e : vc.prepared) {
      if (e.s < vc.low || e.view >= vc.new_view) return false;
      if (!acceptable_item(rt_.crypto(), e.item) || !valid_proof(e)) return false;
    }
    return true;
  }

  void on_view_change(NodeId from, const SignedViewChange& svc) {
    if (closed_ || !member(from) || svc.sig.signer != from || svc.vc.new_view <= view_) return;
    auto it = latest_vc_.find(from);
    if (it != latest_vc_.end() && it->second.vc.new_view >= svc.vc.new_view) return;
    if (!valid_view_change(svc)) return;
    latest_vc_.insert_or_assign(from, svc);
    // f+1 replicas moving on means at least one correct one did
    const View current = in_vc_ ? vc_target_ : view_;
    std::vector<View> ahead;
    for (const auto& [n, v] : latest_vc_) {
      if (v.vc.new_view > current) ahead.push_back(v.vc.new_view);
    }
    if (ahead.size() >= cfg_.f + 1) {
      std::sort(ahead.rbegin(), ahead.rend());
      start_view_change(ahead[cfg_.f]);
    }
    maybe_send_new_view();
  }

  void maybe_send_new_view() {
    if (!in_vc_ || leader_of(vc_target_) != rt_.self()) return;
    NewView nv{vc_target_, {}};
    for (const auto& [n, v] : latest_vc_) {
      if (v.vc.new_view == vc_target_ && nv.proofs.size() < quorum()) nv.proofs.push_back(v);
    }
    if (nv.proofs.size() < quorum()) return;
    rt_.out().multicast(others_, nv);
    install_view(nv.view, nv.proofs);
  }

  void on_new_view(NodeId from, const NewView& nv) {
    if (closed_ || nv.view <= view_ || from != leader_of(nv.view)) return;
    std::set<NodeId> signers;
    for (const auto& p : nv.proofs) {
      if (p.vc.new_view != nv.view || !valid_view_change(p)) return;
      signers.insert(p.sig.signer);
    }
    if (signers.size() < quorum()) return;
    install_view(nv.view, nv.proofs);
  }

  void install_view(View nv, const std::vector<SignedViewChange>& proofs) {
    view_ = nv;
    in_vc_ = false;
    vc_target_ = nv;
    vc_timer_.cancel();
    vc_attempts_ = 0;
    std::erase_if(latest_vc_, [nv](const auto& kv) { return kv.second.vc.new_view <= nv; });
    suspects_.erase(suspects_.begin(), suspects_.lower_bound(nv));
    for (auto it = votes_.begin(); it != votes_.end();) {
      it = it->first.first < nv ? votes_.erase(it) : std::next(it);
    }

    // Every replica derives the same reproposals from the same certificate set.
    Seq start = 1;
    for (const auto& p : proofs) start = std::max(start, p.vc.low);
    std::map<Seq, const PreparedEntry*> best;
    for (const auto& p : proofs) {
      for (const auto& e : p.vc.prepared) {
        if (e.s < start) continue;
        auto& b = best[e.s];
        if (!b || e.view > b->view) b = &e;
      }
    }
    const Seq last = best.empty() ? start - 1 : best.rbegin()->first;

    for (auto& [s, sl] : slots_) {
      if (!sl.committed) sl.item.reset();
      sl.sent_commit = false;
    }
    proposed_.clear();
    for (Seq s = start; s <= last; ++s) {
      auto it = best.find(s);
      const Request item = it == best.end() ? make_noop() : it->second->item;
      proposed_.insert(key_of(item));
      if (in_range(s)) accept(s, item);
    }

    batches_.clear();
    pending_.clear();
    next_seq_ = std::max({last + 1, start, queue_.next(), committed_upto_ + 1, low_});
    if (last >= start) batches_.push_back(last);
    for (auto& [c, by_t] : waiting_) {
      for (auto& [t, w] : by_t) {
        w.since = rt_.now();
        if (leader() == rt_.self() && proposed_.insert({c, t}).second) pending_.push_back(w.item);
      }
    }
    rt_.log("a_view", "Order", Detail().add("view", nv).add("leader", leader().value).add("start", start).str());
    advance_committed();
    arm();
  }

  OrderingConfig cfg_;
  Runtime& rt_;
  DeliveryQueue queue_;
  std::vector<NodeId> others_;
  bool closed_ = false;

  View view_ = 0;
  bool in_vc_ = false;
  View vc_target_ = 0;
  std::uint32_t vc_attempts_ = 0;
  Seq low_ = 1;
  std::vector<SignedCheckpoint> low_proof_;

  std::map<Seq, Slot> slots_;
  std::map<std::pair<View, Seq>, Votes> votes_;
  std::map<View, std::set<NodeId>> suspects_;
  std::map<NodeId, SignedViewChange> latest_vc_;

  std::map<ClientId, std::map<Counter, Waiting>> waiting_;
  std::map<ClientId, Counter> delivered_counter_;

  // leader only
  std::deque<Request> pending_;
  std::set<Key> proposed_;
  std::deque<Seq> batches_;  // last sequence of each uncommitted batch
  Seq next_seq_ = 1;
  Seq committed_upto_ = 0;

  std::vector<PhaseVote> prepare_out_;
  std::vector<PhaseVote> commit_out_;
  std::deque<std::pair<Seq, Request>> ready_out_;
  bool draining_ = false;

  Timer req_timer_;
  Timer vc_timer_;
};

}  // namespace

std::unique_ptr<Ordering> make_minibft(OrderingConfig cfg, Runtime& rt, Ordering::DeliverFn deliver) {
  return std::make_unique<MiniBft>(std::move(cfg), rt, std::move(deliver));
}

}  // namespace georep::ordering
