#include "base.hpp"

#include <algorithm>

namespace georep::irmc {

const char* variant_name(Variant v) { return v == Variant::Rc ? "rc" : "sc"; }

std::vector<std::string> validate(const ChannelConfig& cfg) {
  std::vector<std::string> problems;
  if (cfg.capacity < 1) problems.push_back("capacity must be at least 1");
  if (cfg.senders.size() < 2 * static_cast<std::size_t>(cfg.f_s) + 1) {
    problems.push_back("need at least 2f_s+1 senders");
  }
  if (cfg.receivers.size() < 2 * static_cast<std::size_t>(cfg.f_r) + 1) {
    problems.push_back("need at least 2f_r+1 receivers");
  }
  if (cfg.progress_period <= 0) problems.push_back("progress period must be positive");
  if (cfg.collector_timeout <= 0) problems.push_back("collector timeout must be positive");
  return problems;
}

bool is_member(const std::vector<NodeId>& group, NodeId n) {
  return std::find(group.begin(), group.end(), n) != group.end();
}

std::size_t index_of(const std::vector<NodeId>& group, NodeId n) {
  return static_cast<std::size_t>(std::find(group.begin(), group.end(), n) - group.begin());
}

// ---- sender ------------------------------------------------------------------

SenderBase::SenderBase(ChannelConfig cfg, Runtime& rt) : cfg_(std::move(cfg)), rt_(rt) {
  auto problems = validate(cfg_);
  if (!problems.empty()) throw ConfigError("channel " + to_string(cfg_.id) + ": " + problems.front());
}

void SenderBase::start_retransmit() {
  if (cfg_.retransmit_period <= 0 || closed_) return;
  retransmit_timer_ = rt_.after(cfg_.retransmit_period, [this] {
    if (closed_) return;
    // restate every own move; a single lost Move must not strand a subchannel
    std::vector<MoveEntry> all;
    for (const auto& [sc, s] : subs_) {
      if (s.own_move > 1) all.push_back(MoveEntry{sc, s.own_move});
    }
    if (!all.empty()) {
      rt_.out().multicast(cfg_.receivers, MoveMsg{cfg_.id, ++move_counter_, all, std::nullopt}, AuthKind::Signature);
    }
    retransmit();
    start_retransmit();
  });
}

Window SenderBase::window(Subchannel sc) const {
  auto it = subs_.find(sc);
  return Window{it == subs_.end() ? 1 : it->second.start, cfg_.capacity};
}

Position SenderBase::receiver_start(const Sub& s, NodeId r) const {
  auto it = s.receiver_moves.find(r);
  return std::max(s.start, it == s.receiver_moves.end() ? Position{1} : it->second);
}

Position SenderBase::gate(const Sub& s, NodeId r) const {
  auto it = s.receiver_moves.find(r);
  Position announced = it == s.receiver_moves.end() ? 1 : it->second;
  return std::max(announced, s.own_move) + cfg_.capacity;
}

void SenderBase::send(Subchannel sc, Position p, Bytes m, Done done) {
  if (closed_) {
    if (done) done();
    return;
  }
  Sub& s = sub(sc);
  switch (classify_send(p, Window{s.start, cfg_.capacity})) {
    case SendClass::Drop:
      if (done) done();
      return;
    case SendClass::Blocked:
      s.blocked.emplace(p, Blocked{std::move(m), std::move(done)});
      return;
    case SendClass::Transmit:
      transmit(sc, p, std::move(m));
      if (done) done();
      return;
  }
}

void SenderBase::advance(Subchannel sc, Position w) {
  Sub& s = sub(sc);
  if (w <= s.start) return;
  s.start = w;
  for (auto& [r, positions] : s.sent) positions.erase(positions.begin(), positions.lower_bound(w));
  collect_garbage(sc, s);

  const Position end = s.start + cfg_.capacity - 1;
  std::vector<std::pair<Position, Blocked>> released;
  for (auto it = s.blocked.begin(); it != s.blocked.end() && it->first <= end;) {
    released.emplace_back(it->first, std::move(it->second));
    it = s.blocked.erase(it);
  }
  for (auto& [p, b] : released) {
    if (p >= subs_[sc].start) transmit(sc, p, std::move(b.m));
    if (b.done) b.done();
  }
}

void SenderBase::move_windows(const std::vector<MoveEntry>& moves) {
  if (closed_) return;
  std::vector<MoveEntry> announce;
  for (const auto& mv : moves) {
    Sub& s = sub(mv.sc);
    if (mv.p <= s.own_move) continue;
    s.own_move = mv.p;
    announce.push_back(mv);
  }
  if (announce.empty()) return;
  MoveMsg msg{cfg_.id, ++move_counter_, announce, std::nullopt};
  rt_.out().multicast(cfg_.receivers, msg, AuthKind::Signature);
  for (const auto& mv : announce) advance(mv.sc, mv.p);
  for (NodeId r : cfg_.receivers) {
    for (const auto& mv : announce) flush(r, mv.sc);
  }
}

void SenderBase::handle(const Envelope& env) {
  if (closed_) return;
  const auto* mv = std::get_if<MoveMsg>(&env.msg());
  if (!mv) {
    handle_variant(env);
    return;
  }
  if (mv->ch != cfg_.id || !is_member(cfg_.receivers, env.from)) return;
  Counter& last = receiver_counter_[env.from];
  if (mv->counter <= last) return;  // replayed or stale
  last = mv->counter;
  std::vector<MoveEntry> overtaken;
  for (const auto& e : mv->entries) {
    Sub& s = sub(e.sc);
    Position& known = s.receiver_moves[env.from];
    if (e.p <= known) continue;
    known = e.p;
    advance(e.sc, sender_window_after_moves(s.receiver_moves, cfg_.f_r, s.start));
    if (s.start > s.own_move) overtaken.push_back(MoveEntry{e.sc, s.start});
  }
  // Announce the new start so receivers that fell behind learn about it.
  if (!overtaken.empty()) move_windows(overtaken);
  if (mv->collector) {
    on_collector_choice(env.from, *mv->collector);
    flush(env.from, std::nullopt);
  } else {
    for (const auto& e : mv->entries) flush(env.from, e.sc);
  }
}

void SenderBase::close() {
  closed_ = true;
  retransmit_timer_.cancel();
  std::vector<Done> waiting;
  for (auto& [sc, s] : subs_) {
    for (auto& [p, b] : s.blocked) waiting.push_back(std::move(b.done));
    s.blocked.clear();
  }
  for (auto& d : waiting) {
    if (d) d();
  }
}

// ---- receiver ----------------------------------------------------------------

ReceiverBase::ReceiverBase(ChannelConfig cfg, Runtime& rt) : cfg_(std::move(cfg)), rt_(rt) {
  auto problems = validate(cfg_);
  if (!problems.empty()) throw ConfigError("channel " + to_string(cfg_.id) + ": " + problems.front());
}

void ReceiverBase::start_retransmit() {
  if (cfg_.retransmit_period <= 0 || closed_) return;
  retransmit_timer_ = rt_.after(cfg_.retransmit_period, [this] {
    if (closed_) return;
    std::vector<MoveEntry> all;
    for (const auto& [sc, p] : announced_) all.push_back(MoveEntry{sc, p});
    if (!all.empty()) {
      MoveMsg msg{cfg_.id, ++move_counter_, all, collector_for_move()};
      rt_.out().multicast(cfg_.senders, msg, AuthKind::Signature);
    }
    start_retransmit();
  });
}

bool ReceiverBase::admitted(Subchannel sc) {
  if (known_.count(sc)) return true;
  if (admit_ && !admit_(sc)) return false;
  known_.insert(sc);
  if (listener_) listener_(sc);
  return true;
}

Window ReceiverBase::window(Subchannel sc) const {
  auto it = subs_.find(sc);
  return Window{it == subs_.end() ? 1 : it->second.start, cfg_.capacity};
}

bool ReceiverBase::acceptable(Subchannel sc, NodeId sender, Position p) {
  Sub& s = sub(sc);
  if (p < s.start) return false;
  auto it = s.sender_moves.find(sender);
  Position moved = it == s.sender_moves.end() ? 1 : it->second;
  return p < std::max(s.start, moved) + cfg_.capacity;
}

void ReceiverBase::receive(Subchannel sc, Position p, Callback cb) {
  if (closed_) return;
  sub(sc).pending = Pending{p, std::move(cb)};
  evaluate(sc);
}

void ReceiverBase::evaluate(Subchannel sc) {
  Sub& s = sub(sc);
  if (!s.pending) return;
  const Position p = s.pending->p;
  const ReceiveClass cls = classify_receive(p, Window{s.start, cfg_.capacity});
  if (const auto* old = std::get_if<TooOld>(&cls)) {
    auto cb = std::move(s.pending->cb);
    s.pending.reset();
    if (rt_.trace().full()) {
      rt_.log("too_old", to_string(cfg_.id), Detail().add("sc", sc).add("p", p).add("start", old->start).str());
    }
    cb(*old);
    return;
  }
  if (auto m = deliverable(sc, p)) {
    auto cb = std::move(s.pending->cb);
    s.pending.reset();
    cb(std::move(*m));
  }
}

void ReceiverBase::announce(const std::vector<MoveEntry>& moves) {
  std::vector<MoveEntry> fresh;
  for (const auto& mv : moves) {
    Position& a = announced_[mv.sc];
    if (mv.p <= a) continue;
    a = mv.p;
    fresh.push_back(mv);
  }
  if (fresh.empty()) return;
  MoveMsg msg{cfg_.id, ++move_counter_, fresh, collector_for_move()};
  rt_.out().multicast(cfg_.senders, msg, AuthKind::Signature);
}

void ReceiverBase::move_windows(const std::vector<MoveEntry>& moves) {
  if (closed_) return;
  std::vector<MoveEntry> advanced;
  for (const auto& mv : moves) {
    Sub& s = sub(mv.sc);
    if (mv.p <= s.start) continue;
    s.start = mv.p;
    collect_garbage(mv.sc, s.start);
    advanced.push_back(mv);
  }
  announce(advanced);
  for (const auto& mv : advanced) evaluate(mv.sc);
}

void ReceiverBase::handle(const Envelope& env) {
  if (closed_) return;
  const auto* mv = std::get_if<MoveMsg>(&env.msg());
  if (!mv) {
    handle_variant(env);
    return;
  }
  if (mv->ch != cfg_.id || !is_member(cfg_.senders, env.from)) return;
  Counter& last = sender_counter_[env.from];
  if (mv->counter <= last) return;
  last = mv->counter;
  std::vector<MoveEntry> internal;
  for (const auto& e : mv->entries) {
    if (!admitted(e.sc)) continue;
    Sub& s = sub(e.sc);
    Position& known = s.sender_moves[env.from];
    if (e.p <= known) continue;
    known = e.p;
    Position w = receiver_window_after_sender_moves(s.sender_moves, cfg_.f_s, s.start);
    if (w > s.start) internal.push_back(MoveEntry{e.sc, w});
  }
  if (!internal.empty()) move_windows(internal);
}

void ReceiverBase::close() {
  closed_ = true;
  retransmit_timer_.cancel();
  for (auto& [sc, s] : subs_) s.pending.reset();
  on_closed();
}

}  // namespace georep::irmc
