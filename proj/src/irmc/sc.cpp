// Sender-side collection: senders exchange signed hash shares inside their
// group; a collector ships one certificate per receiver. Receivers watch
// Progress claims and switch collectors that fall behind.

#include <map>

#include "base.hpp"
#include "georep/core/crypto.hpp"

namespace georep::irmc {

namespace {

Bytes share_bytes(const ChannelId& ch, Subchannel sc, Position p, const Digest& d) {
  return encode(Message{ShareMsg{ch, sc, p, d}});
}

class ScSender final : public SenderBase {
 public:
  ScSender(ChannelConfig cfg, Runtime& rt) : SenderBase(std::move(cfg), rt) {
    for (std::size_t i = 0; i < cfg_.receivers.size(); ++i) {
      collector_of_[cfg_.receivers[i]] = cfg_.senders[i % cfg_.senders.size()];
    }
    peers_ = cfg_.senders;
    std::erase(peers_, rt_.self());
    schedule_progress();
    start_retransmit();
  }

 private:
  struct Share {
    Digest d;
    Signature sig;
  };

  void transmit(Subchannel sc, Position p, Bytes m) override {
    auto& own = own_[sc];
    if (own.count(p)) return;
    const Digest d = sha256(m);
    own.emplace(p, std::move(m));
    ShareMsg share{cfg_.id, sc, p, d};
    Signature sig = rt_.out().signer().sign(share_bytes(cfg_.id, sc, p, d));
    shares_[sc][p].emplace(rt_.self(), Share{d, sig});
    rt_.out().multicast(peers_, share, AuthKind::Signature);
    try_collect(sc, p);
  }

  void handle_variant(const Envelope& env) override {
    const auto* share = std::get_if<ShareMsg>(&env.msg());
    if (!share || share->ch != cfg_.id || !is_member(cfg_.senders, env.from)) return;
    const Sub& s = sub(share->sc);
    // peers may run ahead of our window, but never by more than a few windows
    if (share->p < s.start || share->p >= s.start + 4 * cfg_.capacity) return;
    auto& slot = shares_[share->sc][share->p];
    if (slot.count(env.from)) return;
    slot.emplace(env.from, Share{share->d, std::get<Signature>(env.auth())});
    try_collect(share->sc, share->p);
  }

  void try_collect(Subchannel sc, Position p) {
    if (certs_[sc].count(p)) return;
    auto own = own_[sc].find(p);
    if (own == own_[sc].end()) return;
    const Digest d = sha256(own->second);
    std::vector<Signature> matching;
    for (const auto& [signer, sh] : shares_[sc][p]) {
      if (sh.d == d) matching.push_back(sh.sig);
      if (matching.size() == cfg_.f_s + 1) break;
    }
    if (matching.size() < cfg_.f_s + 1) return;
    CertificateMsg cert{cfg_.id, sc, p, own->second, std::move(matching)};
    certs_[sc].emplace(p, seal(rt_.out().signer(), std::move(cert), AuthKind::Signature, {}));
    for (NodeId r : cfg_.receivers) ship(sc, r, p);
  }

  bool collecting_for(NodeId r) const { return collector_of_.at(r) == rt_.self(); }

  void ship(Subchannel sc, NodeId r, Position p) {
    if (!collecting_for(r)) return;
    Sub& s = sub(sc);
    if (p < receiver_start(s, r) || p >= gate(s, r)) return;
    if (!s.sent[r].insert(p).second) return;
    rt_.out().post(r, certs_[sc].at(p));
  }

  void flush(NodeId r, std::optional<Subchannel> only) override {
    if (!collecting_for(r)) return;
    auto each = [&](Subchannel sc) {
      auto it = certs_.find(sc);
      if (it == certs_.end()) return;
      Sub& s = sub(sc);
      std::vector<Position> ps;
      for (auto e = it->second.lower_bound(receiver_start(s, r)); e != it->second.end() && e->first < gate(s, r); ++e) {
        ps.push_back(e->first);
      }
      for (Position p : ps) ship(sc, r, p);
    };
    if (only) {
      each(*only);
    } else {
      for (const auto& [sc, c] : certs_) each(sc);
    }
  }

  void on_collector_choice(NodeId receiver, NodeId collector) override {
    if (!is_member(cfg_.senders, collector)) return;
    if (collector_of_[receiver] == collector) return;
    collector_of_[receiver] = collector;
    // a new collector starts from scratch for this receiver
    for (auto& [sc, s] : subs_) s.sent[receiver].clear();
  }

  void collect_garbage(Subchannel sc, Sub& s) override {
    if (auto it = own_.find(sc); it != own_.end()) {
      it->second.erase(it->second.begin(), it->second.lower_bound(s.start));
    }
    if (auto it = shares_.find(sc); it != shares_.end()) {
      it->second.erase(it->second.begin(), it->second.lower_bound(s.start));
    }
    if (auto it = certs_.find(sc); it != certs_.end()) {
      it->second.erase(it->second.begin(), it->second.lower_bound(s.start));
    }
  }

  // Highest position such that every certificate from the window start up to it exists.
  std::optional<Position> certified_prefix(Subchannel sc) const {
    auto it = certs_.find(sc);
    auto st = subs_.find(sc);
    if (it == certs_.end() || st == subs_.end()) return std::nullopt;
    Position p = st->second.start;
    while (it->second.count(p)) ++p;
    if (p == st->second.start) return std::nullopt;
    return p - 1;
  }

  void schedule_progress() {
    progress_timer_ = rt_.after(cfg_.progress_period, [this] {
      if (closed_) return;
      std::vector<MoveEntry> changed;
      for (const auto& [sc, c] : certs_) {
        auto claim = certified_prefix(sc);
        if (!claim) continue;
        Position& last = claimed_[sc];
        if (*claim > last || cfg_.retransmit_period > 0) {
          last = std::max(last, *claim);
          changed.push_back(MoveEntry{sc, *claim});
        }
      }
      if (!changed.empty()) {
        rt_.out().multicast(cfg_.receivers, ProgressMsg{cfg_.id, changed}, AuthKind::Signature);
      }
      schedule_progress();
    });
  }

  void retransmit() override {
    for (auto& [sc, slots] : own_) {
      for (auto& [p, m] : slots) {
        auto mine = shares_[sc][p].find(rt_.self());
        if (mine != shares_[sc][p].end()) {
          rt_.out().multicast(peers_, ShareMsg{cfg_.id, sc, p, mine->second.d}, AuthKind::Signature);
        }
      }
    }
    for (auto& [sc, slots] : certs_) {
      Sub& s = sub(sc);
      for (NodeId r : cfg_.receivers) {
        if (!collecting_for(r)) continue;
        for (auto e = slots.lower_bound(receiver_start(s, r)); e != slots.end() && e->first < gate(s, r); ++e) {
          rt_.out().post(r, e->second);
        }
      }
    }
  }

  std::vector<NodeId> peers_;
  std::map<NodeId, NodeId> collector_of_;
  std::map<Subchannel, std::map<Position, Bytes>> own_;
  std::map<Subchannel, std::map<Position, std::map<NodeId, Share>>> shares_;
  std::map<Subchannel, std::map<Position, std::shared_ptr<const Packet>>> certs_;
  std::map<Subchannel, Position> claimed_;
  Timer progress_timer_;
};

class ScReceiver final : public ReceiverBase {
 public:
  ScReceiver(ChannelConfig cfg, Runtime& rt) : ReceiverBase(std::move(cfg), rt) {
    collector_ = cfg_.senders[index_of(cfg_.receivers, rt_.self()) % cfg_.senders.size()];
    start_retransmit();
  }

  NodeId collector() const { return collector_; }

 private:
  void handle_variant(const Envelope& env) override {
    if (!is_member(cfg_.senders, env.from)) return;
    if (const auto* cert = std::get_if<CertificateMsg>(&env.msg())) {
      on_certificate(env.from, *cert);
    } else if (const auto* prog = std::get_if<ProgressMsg>(&env.msg())) {
      on_progress(env.from, *prog);
    }
  }

  bool valid_certificate(const CertificateMsg& c) const {
    const Bytes signed_bytes = share_bytes(c.ch, c.sc, c.p, sha256(c.m));
    std::vector<NodeId> signers;
    for (const auto& sig : c.shares) {
      if (!is_member(cfg_.senders, sig.signer) || is_member(signers, sig.signer)) return false;
      if (!rt_.crypto().valid_signature(sig, signed_bytes)) return false;
      signers.push_back(sig.signer);
    }
    return signers.size() >= cfg_.f_s + 1;
  }

  void on_certificate(NodeId from, const CertificateMsg& c) {
    if (c.ch != cfg_.id || !admitted(c.sc) || !acceptable(c.sc, from, c.p)) return;
    auto& slots = certified_[c.sc];
    if (slots.count(c.p)) return;
    if (!valid_certificate(c)) return;
    slots.emplace(c.p, c.m);
    evaluate(c.sc);
    check_collector();
  }

  void on_progress(NodeId from, const ProgressMsg& pm) {
    if (pm.ch != cfg_.id) return;
    for (const auto& e : pm.positions) {
      if (!admitted(e.sc)) continue;
      Position& claim = claims_[e.sc][from];
      claim = std::max(claim, e.p);
    }
    check_collector();
  }

  bool lagging() {
    for (const auto& [sc, per_sender] : claims_) {
      std::vector<Position> v;
      for (const auto& [s, p] : per_sender) v.push_back(p);
      auto trusted = kth_largest(std::move(v), cfg_.f_s + 1);
      if (!trusted) continue;
      const Sub& s = sub(sc);
      const Position hi = std::min(*trusted, s.start + cfg_.capacity - 1);
      auto& have = certified_[sc];
      for (Position p = s.start; p <= hi; ++p) {
        if (!have.count(p)) return true;
      }
    }
    return false;
  }

  void check_collector() {
    if (!lagging()) {
      collector_timer_.cancel();
      return;
    }
    if (collector_timer_.pending()) return;
    collector_timer_ = rt_.after(cfg_.collector_timeout, [this] {
      if (closed_ || !lagging()) return;
      collector_ = cfg_.senders[(index_of(cfg_.senders, collector_) + 1) % cfg_.senders.size()];
      rt_.log("collector_switch", to_string(cfg_.id), Detail().add("collector", collector_.value).str());
      MoveMsg msg{cfg_.id, ++move_counter_, {}, collector_};
      rt_.out().multicast(cfg_.senders, msg, AuthKind::Signature);
      check_collector();
    });
  }

  std::optional<Bytes> deliverable(Subchannel sc, Position p) override {
    auto it = certified_.find(sc);
    if (it == certified_.end()) return std::nullopt;
    auto e = it->second.find(p);
    if (e == it->second.end()) return std::nullopt;
    return e->second;
  }

  void collect_garbage(Subchannel sc, Position start) override {
    auto it = certified_.find(sc);
    if (it != certified_.end()) it->second.erase(it->second.begin(), it->second.lower_bound(start));
  }

  std::optional<NodeId> collector_for_move() const override { return collector_; }
  void on_closed() override { collector_timer_.cancel(); }

  NodeId collector_;
  std::map<Subchannel, std::map<Position, Bytes>> certified_;
  std::map<Subchannel, std::map<NodeId, Position>> claims_;
  Timer collector_timer_;
};

}  // namespace

std::unique_ptr<SenderEndpoint> make_sc_sender(ChannelConfig cfg, Runtime& rt) {
  return std::make_unique<ScSender>(std::move(cfg), rt);
}

std::unique_ptr<ReceiverEndpoint> make_sc_receiver(ChannelConfig cfg, Runtime& rt) {
  return std::make_unique<ScReceiver>(std::move(cfg), rt);
}

std::unique_ptr<SenderEndpoint> make_rc_sender(ChannelConfig cfg, Runtime& rt);
std::unique_ptr<ReceiverEndpoint> make_rc_receiver(ChannelConfig cfg, Runtime& rt);

std::unique_ptr<SenderEndpoint> make_sender(Variant v, ChannelConfig cfg, Runtime& rt) {
  return v == Variant::Rc ? make_rc_sender(std::move(cfg), rt) : make_sc_sender(std::move(cfg), rt);
}

std::unique_ptr<ReceiverEndpoint> make_receiver(Variant v, ChannelConfig cfg, Runtime& rt) {
  return v == Variant::Rc ? make_rc_receiver(std::move(cfg), rt) : make_sc_receiver(std::move(cfg), rt);
}

}  // namespace georep::irmc
