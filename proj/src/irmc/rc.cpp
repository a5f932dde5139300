// Receiver-side collection: every sender ships its signed Send to every
// receiver, and receivers wait for f_s+1 matching copies.

#include <map>

#include "base.hpp"
#include "georep/core/crypto.hpp"

namespace georep::irmc {

namespace {

class RcSender final : public SenderBase {
 public:
  RcSender(ChannelConfig cfg, Runtime& rt) : SenderBase(std::move(cfg), rt) { start_retransmit(); }

 private:
  void transmit(Subchannel sc, Position p, Bytes m) override {
    auto& slots = stored_[sc];
    if (slots.count(p)) return;  // a correct sender never sends two payloads for one slot
    auto packet = seal(rt_.out().signer(), SendMsg{cfg_.id, sc, p, std::move(m)}, AuthKind::Signature, {});
    slots.emplace(p, packet);
    for (NodeId r : cfg_.receivers) ship(sc, r, p);
  }

  void ship(Subchannel sc, NodeId r, Position p) {
    Sub& s = sub(sc);
    if (p < receiver_start(s, r) || p >= gate(s, r)) return;
    if (!s.sent[r].insert(p).second) return;
    rt_.out().post(r, stored_[sc].at(p));
  }

  void flush(NodeId r, std::optional<Subchannel> only) override {
    auto each = [&](Subchannel sc) {
      auto it = stored_.find(sc);
      if (it == stored_.end()) return;
      Sub& s = sub(sc);
      const Position lo = receiver_start(s, r), hi = gate(s, r);
      std::vector<Position> ps;
      for (auto e = it->second.lower_bound(lo); e != it->second.end() && e->first < hi; ++e) ps.push_back(e->first);
      for (Position p : ps) ship(sc, r, p);
    };
    if (only) {
      each(*only);
    } else {
      for (const auto& [sc, slots] : stored_) each(sc);
    }
  }

  void collect_garbage(Subchannel sc, Sub& s) override {
    auto it = stored_.find(sc);
    if (it == stored_.end()) return;
    it->second.erase(it->second.begin(), it->second.lower_bound(s.start));
  }

  void retransmit() override {
    for (auto& [sc, slots] : stored_) {
      Sub& s = sub(sc);
      for (NodeId r : cfg_.receivers) {
        for (auto e = slots.lower_bound(receiver_start(s, r)); e != slots.end() && e->first < gate(s, r); ++e) {
          rt_.out().post(r, e->second);
        }
      }
    }
  }

  std::map<Subchannel, std::map<Position, std::shared_ptr<const Packet>>> stored_;
};

class RcReceiver final : public ReceiverBase {
 public:
  RcReceiver(ChannelConfig cfg, Runtime& rt) : ReceiverBase(std::move(cfg), rt) { start_retransmit(); }

 private:
  struct Entry {
    Digest d;
    Bytes m;
  };

  void handle_variant(const Envelope& env) override {
    const auto* send = std::get_if<SendMsg>(&env.msg());
    if (!send || send->ch != cfg_.id || !is_member(cfg_.senders, env.from)) return;
    if (!admitted(send->sc) || !acceptable(send->sc, env.from, send->p)) return;
    auto& slot = store_[send->sc][send->p];
    if (slot.count(env.from)) return;  // first Send per sender and slot wins
    slot.emplace(env.from, Entry{sha256(send->m), send->m});
    evaluate(send->sc);
  }

  std::optional<Bytes> deliverable(Subchannel sc, Position p) override {
    auto it = store_.find(sc);
    if (it == store_.end()) return std::nullopt;
    auto slot = it->second.find(p);
    if (slot == it->second.end()) return std::nullopt;
    std::map<Digest, std::uint32_t> votes;
    for (const auto& [sender, e] : slot->second) {
      if (++votes[e.d] >= cfg_.f_s + 1) return e.m;
    }
    return std::nullopt;
  }

  void collect_garbage(Subchannel sc, Position start) override {
    auto it = store_.find(sc);
    if (it == store_.end()) return;
    it->second.erase(it->second.begin(), it->second.lower_bound(start));
  }

  std::map<Subchannel, std::map<Position, std::map<NodeId, Entry>>> store_;
};

}  // namespace

std::unique_ptr<SenderEndpoint> make_rc_sender(ChannelConfig cfg, Runtime& rt) {
  return std::make_unique<RcSender>(std::move(cfg), rt);
}

std::unique_ptr<ReceiverEndpoint> make_rc_receiver(ChannelConfig cfg, Runtime& rt) {
  return std::make_unique<RcReceiver>(std::move(cfg), rt);
}

}  // namespace georep::irmc
