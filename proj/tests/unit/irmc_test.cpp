#include <gtest/gtest.h>

#include <chrono>

#include "channel_world.hpp"
#include "georep/irmc/conformance.hpp"
#include "georep/irmc/window.hpp"

using namespace georep;
using namespace georep::irmc;
using fixtures::ChannelWorld;
using fixtures::Outcome;

namespace {

std::map<NodeId, Position> requests(std::initializer_list<Position> ps) {
  std::map<NodeId, Position> m;
  std::uint32_t i = 1;
  for (Position p : ps) m[NodeId{i++}] = p;
  return m;
}

Bytes payload(const char* s) { return to_bytes(s); }

}  // namespace

TEST(Window, SenderFollowsSecondHighestReceiverRequest) {
  EXPECT_EQ(sender_window_after_moves(requests({7, 5, 3}), 1, 1), 5u);
  EXPECT_EQ(sender_window_after_moves(requests({100}), 1, 1), 1u);
  EXPECT_EQ(sender_window_after_moves(requests({10, 10, 10}), 1, 12), 12u);
}

TEST(Window, ReceiverFollowsSecondLargestSenderRequest) {
  EXPECT_EQ(receiver_window_after_sender_moves(requests({9, 9, 4}), 1, 1), 9u);
  EXPECT_EQ(receiver_window_after_sender_moves(requests({9}), 1, 1), 1u);
  EXPECT_EQ(receiver_window_after_sender_moves(requests({3, 5, 8, 8}), 1, 6), 8u);
}

TEST(Window, ClassifySendAndReceive) {
  EXPECT_EQ(classify_send(11, Window{1, 10}), SendClass::Blocked);
  EXPECT_EQ(classify_send(3, Window{5, 10}), SendClass::Drop);
  EXPECT_EQ(classify_send(5, Window{5, 10}), SendClass::Transmit);
  EXPECT_EQ(classify_receive(3, Window{5, 10}), ReceiveClass(TooOld{5}));
  EXPECT_EQ(classify_receive(5, Window{5, 10}), ReceiveClass(Wait{}));
  EXPECT_EQ(classify_receive(20, Window{5, 10}), ReceiveClass(Wait{}));
}

TEST(Window, KthLargest) {
  EXPECT_EQ(kth_largest({4, 9, 1}, 1), 9u);
  EXPECT_EQ(kth_largest({4, 9, 1}, 3), 1u);
  EXPECT_FALSE(kth_largest({4}, 2).has_value());
}

TEST(WindowProperty, RulesAreMonotoneAndBounded) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 2000; ++trial) {
    const std::uint32_t f = rng() % 3;
    const std::size_t n = rng() % 7;
    std::map<NodeId, Position> req;
    std::vector<Position> values;
    for (std::size_t i = 0; i < n; ++i) {
      Position p = 1 + rng() % 30;
      req[NodeId{static_cast<std::uint32_t>(i + 1)}] = p;
      values.push_back(p);
    }
    const Position current = 1 + rng() % 30;
    const Position s = sender_window_after_moves(req, f, current);
    const Position r = receiver_window_after_sender_moves(req, f, current);
    EXPECT_GE(s, current);
    EXPECT_GE(r, current);
    std::sort(values.rbegin(), values.rend());
    if (values.size() > f) {
      EXPECT_EQ(s, std::max(current, values[f]));
      EXPECT_EQ(r, std::max(current, values[f]));
    } else {
      EXPECT_EQ(s, current);
      EXPECT_EQ(r, current);
    }
  }
}

class Channel : public ::testing::TestWithParam<Variant> {};

TEST_P(Channel, MatchingSendsFromCorrectSendersAreDelivered) {
  ChannelWorld w(GetParam(), 3, 3, 1, 4);
  for (auto& s : w.senders) s->send(7, 1, payload("m"), nullptr);
  std::vector<Outcome> got(3);
  for (std::size_t j = 0; j < 3; ++j) w.receivers[j]->receive(7, 1, got[j].callback());
  w.run(500);
  for (auto& o : got) EXPECT_TRUE(o.delivered(payload("m")));
}

TEST_P(Channel, SingleSenderCannotReachQuorum) {
  ChannelWorld w(GetParam(), 3, 3, 1, 4);
  w.senders[0]->send(7, 1, payload("evil"), nullptr);
  Outcome o;
  w.receivers[0]->receive(7, 1, o.callback());
  w.run(1000);
  EXPECT_FALSE(o.result.has_value());
}

TEST_P(Channel, MajorityPayloadWinsOverDivergentSender) {
  ChannelWorld w(GetParam(), 3, 3, 1, 4);
  w.senders[0]->send(0, 1, payload("a"), nullptr);
  w.senders[1]->send(0, 1, payload("a"), nullptr);
  w.senders[2]->send(0, 1, payload("b"), nullptr);
  std::vector<Outcome> got(3);
  for (std::size_t j = 0; j < 3; ++j) w.receivers[j]->receive(0, 1, got[j].callback());
  w.run(1000);
  for (auto& o : got) EXPECT_TRUE(o.delivered(payload("a")));
}

TEST_P(Channel, SendBeyondWindowBlocksUntilReceiversMove) {
  ChannelWorld w(GetParam(), 3, 3, 1, 2);
  bool done = false;
  w.senders[0]->send(0, 50, payload("late"), [&] { done = true; });
  w.run(300);
  EXPECT_FALSE(done);
  w.receivers[0]->move_window(0, 49);
  w.run(600);
  EXPECT_FALSE(done);
  w.receivers[1]->move_window(0, 49);
  w.run(900);
  EXPECT_TRUE(done);
  EXPECT_EQ(w.senders[0]->window(0).start, 49u);
}

TEST_P(Channel, SenderWindowsFollowReceiverQuorum) {
  ChannelWorld w(GetParam(), 3, 3, 1, 4);
  w.receivers[0]->move_window(0, 11);
  w.run(200);
  for (auto& s : w.senders) EXPECT_EQ(s->window(0).start, 1u);
  w.receivers[1]->move_window(0, 11);
  w.receivers[2]->move_window(0, 11);
  w.run(400);
  for (auto& s : w.senders) EXPECT_EQ(s->window(0), (Window{11, 4}));
}

TEST_P(Channel, SenderMovesResolvePendingReceiveAsTooOld) {
  ChannelWorld w(GetParam(), 3, 3, 1, 4);
  Outcome o;
  w.receivers[0]->receive(3, 5, o.callback());
  w.senders[0]->move_window(3, 8);
  w.run(200);
  EXPECT_FALSE(o.result.has_value());
  w.senders[1]->move_window(3, 8);
  w.run(400);
  EXPECT_EQ(o.too_old(), 8u);
  EXPECT_EQ(w.receivers[0]->window(3).start, 8u);
}

TEST_P(Channel, ReceiveBelowWindowIsTooOldAtOnce) {
  ChannelWorld w(GetParam(), 3, 3, 1, 4);
  w.receivers[0]->move_window(0, 6);
  Outcome o;
  w.receivers[0]->receive(0, 2, o.callback());
  w.run(1);
  EXPECT_EQ(o.too_old(), 6u);
}

TEST_P(Channel, ForgedTrafficFromOutsidersIsRejected) {
  ChannelWorld w(GetParam(), 3, 3, 1, 4);
  // a receiver principal claims to be a sender
  const NodeId rogue = w.cfg.receivers[2];
  w.inject(rogue, w.cfg.receivers[0], SendMsg{w.cfg.id, 0, 1, payload("x")});
  w.inject(rogue, w.cfg.receivers[0], MoveMsg{w.cfg.id, 1, {MoveEntry{0, 9}}, std::nullopt});
  Outcome o;
  w.receivers[0]->receive(0, 1, o.callback());
  w.run(500);
  EXPECT_FALSE(o.result.has_value());
  EXPECT_EQ(w.receivers[0]->window(0).start, 1u);
}

TEST_P(Channel, MovesAreReplayProtected) {
  ChannelWorld w(GetParam(), 3, 3, 1, 4);
  const NodeId r0 = w.cfg.receivers[0];
  const NodeId r1 = w.cfg.receivers[1];
  w.inject(r0, w.cfg.senders[0], MoveMsg{w.cfg.id, 5, {MoveEntry{0, 9}}, std::nullopt});
  w.run(100);
  // stale counter from another receiver is fine; a second stale one from r0 must be ignored
  w.inject(r0, w.cfg.senders[0], MoveMsg{w.cfg.id, 5, {MoveEntry{0, 20}}, std::nullopt});
  w.inject(r1, w.cfg.senders[0], MoveMsg{w.cfg.id, 1, {MoveEntry{0, 20}}, std::nullopt});
  w.run(200);
  EXPECT_EQ(w.senders[0]->window(0).start, 9u);
}

TEST_P(Channel, WindowAdvanceReleasesObsoleteSends) {
  ChannelWorld w(GetParam(), 3, 3, 1, 2);
  int done = 0;
  w.senders[0]->send(0, 5, payload("x"), [&] { ++done; });
  w.senders[0]->send(0, 1, payload("y"), [&] { ++done; });
  EXPECT_EQ(done, 1);
  for (auto& r : w.receivers) r->move_window(0, 3);
  w.run(300);
  EXPECT_EQ(done, 1);
  for (auto& r : w.receivers) r->move_window(0, 10);
  w.run(600);
  EXPECT_EQ(done, 2);  // position 5 became obsolete
  int late = 0;
  w.senders[0]->send(0, 4, payload("z"), [&] { ++late; });
  EXPECT_EQ(late, 1);
}

TEST_P(Channel, LaggingReceiverSkipsForwardWhenOthersMoveOn) {
  ChannelWorld w(GetParam(), 3, 3, 1, 2);
  w.net.add_partition(Partition{{w.cfg.receivers[2]}, 0, ms(3000), false});
  std::vector<Position> cursor(3, 1);
  std::function<void(std::size_t)> loop = [&](std::size_t j) {
    w.receivers[j]->receive(0, cursor[j], [&, j](ReceiveResult r) {
      if (auto* t = std::get_if<TooOld>(&r)) {
        cursor[j] = t->start;
      } else {
        ++cursor[j];
      }
      w.receivers[j]->move_window(0, cursor[j]);
      loop(j);
    });
  };
  for (std::size_t j = 0; j < 3; ++j) loop(j);
  std::vector<Position> next(3, 1);
  std::function<void(std::size_t)> produce = [&](std::size_t i) {
    if (next[i] > 20) return;
    const Position p = next[i]++;
    w.senders[i]->send(0, p, to_bytes("m" + std::to_string(p)), [&, i] { produce(i); });
  };
  for (std::size_t i = 0; i < 3; ++i) produce(i);
  w.run(10000);
  EXPECT_EQ(cursor[0], 21u);
  EXPECT_EQ(cursor[1], 21u);
  EXPECT_EQ(cursor[2], 21u);
}

INSTANTIATE_TEST_SUITE_P(Variants, Channel, ::testing::Values(Variant::Rc, Variant::Sc),
                         [](const auto& info) { return std::string(variant_name(info.param)); });

TEST(ChannelCost, CollectionOnTheSenderSideSavesWideAreaMessages) {
  auto count = [](Variant v, const std::string& kind) {
    ChannelWorld w(v, 4, 3, 1, 4);
    for (auto& s : w.senders) s->send(0, 1, payload("m"), nullptr);
    std::vector<Outcome> got(3);
    for (std::size_t j = 0; j < 3; ++j) w.receivers[j]->receive(0, 1, got[j].callback());
    w.run(120);
    for (auto& o : got) EXPECT_TRUE(o.delivered(payload("m")));
    const auto& c = w.net.counters().wan_by_kind;
    return c.count(kind) ? c.at(kind) : 0;
  };
  EXPECT_EQ(count(Variant::Rc, "Send@test"), 12u);
  EXPECT_EQ(count(Variant::Sc, "Certificate@test"), 3u);
  EXPECT_EQ(count(Variant::Sc, "Send@test"), 0u);
}

TEST(ScChannel, CertificateWithDuplicateSignerIsRejected) {
  ChannelWorld w(Variant::Sc, 3, 3, 1, 4);
  const NodeId s0 = w.cfg.senders[0];
  const Bytes m = payload("evil");
  const Signature share = w.crypto.signer_for(s0).sign(encode(Message{ShareMsg{w.cfg.id, 0, 1, sha256(m)}}));
  w.inject(s0, w.cfg.receivers[0], CertificateMsg{w.cfg.id, 0, 1, m, {share, share}});
  Outcome o;
  w.receivers[0]->receive(0, 1, o.callback());
  w.run(500);
  EXPECT_FALSE(o.result.has_value());
}

TEST(ScChannel, CertificateFromTwoSharesIsSelfVerifying) {
  ChannelWorld w(Variant::Sc, 3, 3, 1, 4);
  const Bytes m = payload("ok");
  std::vector<Signature> shares;
  for (std::size_t i = 0; i < 2; ++i) {
    shares.push_back(
        w.crypto.signer_for(w.cfg.senders[i]).sign(encode(Message{ShareMsg{w.cfg.id, 0, 1, sha256(m)}})));
  }
  // carried by the third sender, which never called send itself
  w.inject(w.cfg.senders[2], w.cfg.receivers[0], CertificateMsg{w.cfg.id, 0, 1, m, shares});
  Outcome o;
  w.receivers[0]->receive(0, 1, o.callback());
  w.run(100);
  EXPECT_TRUE(o.delivered(m));
}

TEST(ScChannel, WithholdingCollectorIsReplacedAfterTimeout) {
  ChannelWorld w(Variant::Sc, 3, 3, 1, 4);
  // receiver 0 starts with sender 0 as collector; sender 0 ships no certificates
  w.sender_rt(0).out().set_interceptor([](NodeId, const Message& m) -> std::optional<std::vector<std::pair<NodeId, Message>>> {
    if (std::holds_alternative<CertificateMsg>(m)) return std::vector<std::pair<NodeId, Message>>{};
    return std::nullopt;
  });
  for (auto& s : w.senders) s->send(0, 1, payload("m"), nullptr);
  Outcome o;
  w.receivers[0]->receive(0, 1, o.callback());
  Outcome other;
  w.receivers[1]->receive(0, 1, other.callback());
  w.run(150);
  EXPECT_FALSE(o.result.has_value());
  EXPECT_TRUE(other.delivered(payload("m")));
  w.run(1000);
  EXPECT_TRUE(o.delivered(payload("m")));
  bool switched = false;
  for (const auto& r : w.trace.records()) switched |= r.event == "collector_switch";
  EXPECT_TRUE(switched);
}

namespace {

void expect_conformance(Variant v, std::uint32_t f, std::size_t schedules) {
  ConformanceOptions opts;
  opts.f = f;
  opts.schedules = schedules;
  opts.seed = 1000 + f;
  const auto t0 = std::chrono::steady_clock::now();
  const auto report = run_conformance(factory_for(v), opts);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  for (const auto& e : report.examples) ADD_FAILURE() << e;
  EXPECT_TRUE(report.passed());
  EXPECT_EQ(report.schedules, schedules);
  EXPECT_GT(report.deliveries, 0u);
  EXPECT_GT(report.too_old, 0u);
  EXPECT_GT(report.faulty_messages, 0u);
  EXPECT_LT(secs, 120.0);
}

}  // namespace

TEST(Conformance, RcSingleFault) { expect_conformance(Variant::Rc, 1, 3000); }
TEST(Conformance, ScSingleFault) { expect_conformance(Variant::Sc, 1, 3000); }
TEST(Conformance, RcTwoFaults) { expect_conformance(Variant::Rc, 2, 2000); }
TEST(Conformance, ScTwoFaults) { expect_conformance(Variant::Sc, 2, 2000); }

namespace {

// Delivers the first Send it sees for a slot: no quorum at all.
class TrustingReceiver final : public ReceiverEndpoint {
 public:
  TrustingReceiver(ChannelConfig cfg, Runtime&) : cfg_(std::move(cfg)) {}

  void receive(Subchannel sc, Position p, Callback cb) override {
    pending_[sc] = {p, std::move(cb)};
    evaluate(sc);
  }
  void move_window(Subchannel sc, Position p) override { start_[sc] = std::max(start_[sc], p); }
  void move_windows(const std::vector<MoveEntry>& moves) override {
    for (const auto& m : moves) move_window(m.sc, m.p);
  }
  Window window(Subchannel sc) const override {
    auto it = start_.find(sc);
    return Window{it == start_.end() ? 1 : it->second, cfg_.capacity};
  }
  void handle(const Envelope& env) override {
    if (const auto* s = std::get_if<SendMsg>(&env.msg())) {
      seen_[s->sc].emplace(s->p, s->m);
      evaluate(s->sc);
    }
  }
  void close() override {}
  const ChannelConfig& config() const override { return cfg_; }
  void set_admission(std::function<bool(Subchannel)>) override {}
  void set_subchannel_listener(std::function<void(Subchannel)>) override {}

 private:
  void evaluate(Subchannel sc) {
    auto it = pending_.find(sc);
    if (it == pending_.end() || !it->second.second) return;
    auto m = seen_[sc].find(it->second.first);
    if (m == seen_[sc].end()) return;
    auto cb = std::move(it->second.second);
    pending_.erase(it);
    cb(m->second);
  }

  ChannelConfig cfg_;
  std::map<Subchannel, Position> start_;
  std::map<Subchannel, std::map<Position, Bytes>> seen_;
  std::map<Subchannel, std::pair<Position, Callback>> pending_;
};

}  // namespace

TEST(Conformance, DetectsReceiverWithoutQuorum) {
  EndpointFactory broken = factory_for(Variant::Rc);
  broken.name = "trusting";
  broken.receiver = [](ChannelConfig cfg, Runtime& rt) -> std::unique_ptr<ReceiverEndpoint> {
    return std::make_unique<TrustingReceiver>(std::move(cfg), rt);
  };
  ConformanceOptions opts;
  opts.schedules = 50;
  const auto report = run_conformance(broken, opts);
  EXPECT_FALSE(report.passed());
  EXPECT_GT(report.violations.count("quorum_delivery"), 0u);
}
