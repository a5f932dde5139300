#include "georep/harness/faults.hpp"

#include <algorithm>

#include "georep/app/kv.hpp"
#include "georep/core/crypto.hpp"

namespace georep::harness {

namespace {

using Rewrite = std::optional<std::vector<std::pair<NodeId, Message>>>;

void flip(Digest& d) { d.bytes[0] ^= 0x5a; }

void flip(Bytes& b) {
  if (b.empty()) {
    b.push_back(0x5a);
  } else {
    b[b.size() / 2] ^= 0x5a;
  }
}

// A plausible but wrong version of m, or nullopt when there is nothing to corrupt.
std::optional<Message> corrupt(const Message& m) {
  Message out = m;
  if (auto* pp = std::get_if<PrePrepare>(&out)) {
    if (pp->proposals.size() > 1) {
      std::vector<Seq> seqs;
      for (const auto& p : pp->proposals) seqs.push_back(p.s);
      std::reverse(pp->proposals.begin(), pp->proposals.end());
      for (std::size_t k = 0; k < seqs.size(); ++k) pp->proposals[k].s = seqs[k];
    } else {
      for (auto& p : pp->proposals) flip(p.item.request.write.op);
    }
    return out;
  }
  if (auto* p = std::get_if<Prepare>(&out)) {
    for (auto& v : p->votes) flip(v.d);
    return out;
  }
  if (auto* c = std::get_if<CommitPhase>(&out)) {
    for (auto& v : c->votes) flip(v.d);
    return out;
  }
  if (auto* s = std::get_if<SendMsg>(&out)) {
    flip(s->m);
    return out;
  }
  if (auto* s = std::get_if<ShareMsg>(&out)) {
    flip(s->d);
    return out;
  }
  if (auto* c = std::get_if<CertificateMsg>(&out)) {
    flip(c->m);
    return out;
  }
  if (auto* r = std::get_if<Result>(&out)) {
    r->reply = to_bytes("garbage");
    return out;
  }
  if (auto* c = std::get_if<CheckpointMsg>(&out)) {
    flip(c->h);
    return out;
  }
  if (auto* s = std::get_if<CpState>(&out)) {
    flip(s->state);
    return out;
  }
  if (auto* r = std::get_if<RegistryReply>(&out)) {
    r->groups.clear();
    return out;
  }
  return std::nullopt;
}

}  // namespace

Interceptor make_interceptor(Behavior b, const Simulator& sim, SimTime from) {
  return [b, &sim, from](NodeId to, const Message& m) -> Rewrite {
    if (sim.now() < from) return std::nullopt;
    switch (b) {
      case Behavior::Withhold:
        return std::vector<std::pair<NodeId, Message>>{};
      case Behavior::Garbage:
        if (auto bad = corrupt(m)) return std::vector<std::pair<NodeId, Message>>{{to, *bad}};
        return std::nullopt;
      case Behavior::Equivocate:
        // half the receivers see one story, the other half another
        if (to.value % 2 == 0) return std::nullopt;
        if (auto bad = corrupt(m)) return std::vector<std::pair<NodeId, Message>>{{to, *bad}};
        return std::nullopt;
      case Behavior::LyingCollector:
        if (std::holds_alternative<CertificateMsg>(m)) {
          if (auto bad = corrupt(m)) return std::vector<std::pair<NodeId, Message>>{{to, *bad}};
        }
        return std::nullopt;
      default:
        return std::nullopt;
    }
  };
}

EquivocatingClient::EquivocatingClient(Runtime& rt, GroupEntry group, SimTime period, SimTime stop)
    : Node(rt), group_(std::move(group)), period_(period), stop_(stop) {}

void EquivocatingClient::start(SimTime at) {
  timer_ = rt_.after(at > rt_.now() ? at - rt_.now() : 0, [this] { tick(); });
}

void EquivocatingClient::tick() {
  if (rt_.now() >= stop_ || rt_.crashed()) return;
  ++t_;
  const std::string key = "k0";
  for (std::size_t i = 0; i < group_.members.size(); ++i) {
    const std::string value = (i % 2 == 0 ? "R1-" : "R2-") + std::to_string(t_);
    const SignedWrite sw = sign_write(rt_.out().signer(), Write{RequestKind::Update, app::put_op(key, value), id(), t_});
    rt_.out().send(group_.members[i], sw);
  }
  timer_ = rt_.after(period_, [this] { tick(); });
}

}  // namespace georep::harness
