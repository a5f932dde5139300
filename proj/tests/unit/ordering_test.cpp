#include <gtest/gtest.h>

#include <random>
#include <set>

#include "georep/core/crypto.hpp"
#include "georep/ordering/ordering.hpp"
#include "georep/sim/network.hpp"

using namespace georep;
using namespace georep::ordering;

namespace {

struct Replica : Node {
  using Node::Node;
  void on_message(const Envelope& env) override {
    if (ord) ord->handle(env);
  }
  std::unique_ptr<Ordering> ord;
  std::vector<std::pair<Seq, Request>> log;
  std::vector<Seq> gc_points;
  SimTime hold = 0;  // how long the owner keeps each delivery
};

enum class Impl { MiniBft, Sequencer };

// n = 3f+1 ordering members in one region, plus a few signing clients.
struct OrderWorld {
  explicit OrderWorld(std::uint32_t f, std::uint64_t seed = 1, Impl impl = Impl::MiniBft, double jitter_ms = 0)
      : sim(seed), crypto(seed), net(sim, topo, dir, trace) {
    topo.set_jitter(jitter_ms);
    cfg.f = f;
    cfg.group = kAgreementGroup;
    const std::uint32_t n = 3 * f + 1;
    for (std::uint32_t i = 0; i < n; ++i) cfg.members.push_back(NodeId{i + 1});
    for (std::uint32_t i = 0; i < n; ++i) {
      const NodeId id = cfg.members[i];
      dir.add(NodeInfo{id, Role::Agreement, kAgreementGroup, i, {"A", i % 3}});
      crypto.register_principal(id);
      rts.push_back(std::make_unique<Runtime>(sim, net, crypto, trace, id));
      replicas.push_back(std::make_unique<Replica>(*rts.back()));
      Replica* r = replicas.back().get();
      auto deliver = [this, r](Seq s, const Request& item, Ordering::Release release) {
        r->log.emplace_back(s, item);
        if (r->hold == 0) {
          release();
        } else {
          r->runtime().after(r->hold, release);
        }
      };
      r->ord = impl == Impl::MiniBft ? make_minibft(cfg, *rts.back(), deliver) : make_sequencer(cfg, *rts.back(), deliver);
      net.attach(id, [r](const Envelope& e) { r->receive(e); });
    }
    for (std::uint32_t c = 0; c < 4; ++c) {
      const NodeId id{100 + c};
      dir.add(NodeInfo{id, Role::Client, GroupId{1}, c, {"A", 0}});
      crypto.register_principal(id);
    }
  }

  Request request(std::uint32_t client, Counter t, const std::string& op = "x") {
    const NodeId id{100 + client};
    return Request{sign_write(crypto.signer_for(id), Write{RequestKind::Update, to_bytes(op), id, t}), GroupId{1}};
  }

  // Hands the request to every replica at time `at`.
  void submit(const Request& r, double at_ms = -1) {
    const SimTime at = at_ms < 0 ? sim.now() : ms(at_ms);
    sim.schedule_at(at, NodeId{999}, [this, r] {
      for (std::size_t i = 0; i < replicas.size(); ++i) {
        if (!net.crashed(replicas[i]->id())) replicas[i]->ord->order(r);
      }
    });
  }

  void run(double until_ms) { sim.run_until(ms(until_ms)); }
  Replica& at(std::size_t i) { return *replicas[i]; }

  std::vector<SignedCheckpoint> certificate(Seq s, const std::string& state, std::vector<std::size_t> signers) {
    std::vector<SignedCheckpoint> out;
    const CheckpointMsg cp{kAgreementGroup, s, sha256(state)};
    for (std::size_t i : signers) {
      out.push_back(SignedCheckpoint{cp, crypto.signer_for(cfg.members[i]).sign(encode(Message{cp}))});
    }
    return out;
  }

  std::size_t count(const std::string& event) const {
    std::size_t n = 0;
    for (const auto& r : trace.records()) n += r.event == event;
    return n;
  }

  Simulator sim;
  Topology topo;
  Directory dir;
  TraceLog trace;
  CryptoProvider crypto;
  Network net;
  OrderingConfig cfg;
  std::vector<std::unique_ptr<Runtime>> rts;
  std::vector<std::unique_ptr<Replica>> replicas;
};

using Key = std::pair<std::uint32_t, Counter>;
Key key(const Request& r) { return {r.client().value, r.counter()}; }

// Same item at the same sequence everywhere; every log is gap-free and
// increasing except for jumps to a gc point.
void expect_safe(OrderWorld& w, const std::set<std::size_t>& correct, const std::set<Seq>& jumps = {}) {
  std::map<Seq, Digest> chosen;
  for (std::size_t i : correct) {
    const auto& log = w.at(i).log;
    for (std::size_t k = 0; k < log.size(); ++k) {
      if (k > 0 && !jumps.count(log[k].first)) ASSERT_EQ(log[k].first, log[k - 1].first + 1) << "replica " << i;
      if (k > 0) ASSERT_GT(log[k].first, log[k - 1].first) << "replica " << i;
      const Digest d = digest_of(log[k].second);
      auto [it, fresh] = chosen.emplace(log[k].first, d);
      ASSERT_EQ(it->second, d) << "replica " << i << " diverges at " << log[k].first;
      if (log[k].second.kind() != RequestKind::Noop) {
        ASSERT_TRUE(acceptable_item(w.crypto, log[k].second));
      }
    }
  }
}

std::set<Key> delivered_keys(const Replica& r) {
  std::set<Key> out;
  for (const auto& [s, item] : r.log) {
    if (item.kind() != RequestKind::Noop) out.insert(key(item));
  }
  return out;
}

std::set<std::size_t> all_of(const OrderWorld& w) {
  std::set<std::size_t> out;
  for (std::size_t i = 0; i < w.replicas.size(); ++i) out.insert(i);
  return out;
}

}  // namespace

TEST(Ordering, ConfigValidation) {
  OrderingConfig cfg;
  cfg.f = 1;
  cfg.members = {NodeId{1}, NodeId{2}, NodeId{3}};
  EXPECT_FALSE(validate(cfg).empty());
  cfg.members.push_back(NodeId{4});
  EXPECT_TRUE(validate(cfg).empty());
  cfg.members.back() = NodeId{3};
  EXPECT_FALSE(validate(cfg).empty());
  cfg.members.back() = NodeId{4};
  cfg.batch_cap = 0;
  EXPECT_FALSE(validate(cfg).empty());
}

TEST(Ordering, AcceptableItems) {
  OrderWorld w(1);
  Request r = w.request(0, 1);
  EXPECT_TRUE(acceptable_item(w.crypto, r));
  EXPECT_TRUE(acceptable_item(w.crypto, make_noop()));
  Request tampered = r;
  tampered.request.write.op = to_bytes("y");
  EXPECT_FALSE(acceptable_item(w.crypto, tampered));
  Request odd_noop = make_noop();
  odd_noop.request.write.op = to_bytes("payload");
  EXPECT_FALSE(acceptable_item(w.crypto, odd_noop));
}

TEST(Ordering, FaultFreeDeliversEverythingOnceInTheSameOrder) {
  OrderWorld w(1);
  for (Counter t = 1; t <= 30; ++t) w.submit(w.request(t % 4, t), t * 0.7);
  w.run(500);
  expect_safe(w, all_of(w));
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_EQ(w.at(i).log.size(), 30u);
    EXPECT_EQ(delivered_keys(w.at(i)).size(), 30u);
    EXPECT_EQ(w.at(i).ord->view(), 0u);
  }
}

TEST(Ordering, DuplicateOrdersAreDeliveredOnce) {
  OrderWorld w(1);
  const Request r = w.request(0, 1);
  w.submit(r, 0);
  w.submit(r, 0.1);
  w.run(100);
  w.submit(r, 150);
  w.run(300);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(w.at(i).log.size(), 1u);
}

TEST(Ordering, ConcurrentRequestsAreBatched) {
  OrderWorld w(1);
  std::size_t preprepares = 0;
  std::size_t largest = 0;
  w.rts[0]->out().set_interceptor([&](NodeId, const Message& m) -> std::optional<std::vector<std::pair<NodeId, Message>>> {
    if (const auto* pp = std::get_if<PrePrepare>(&m)) {
      ++preprepares;
      largest = std::max(largest, pp->proposals.size());
    }
    return std::nullopt;
  });
  for (Counter t = 1; t <= 100; ++t) w.submit(w.request(t % 4, t), 0);
  w.run(300);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(w.at(i).log.size(), 100u);
  EXPECT_EQ(largest, w.cfg.batch_cap);
  EXPECT_LT(preprepares / 3, 100u / 4);
}

TEST(Ordering, LeaderCrashLeadsToNewView) {
  OrderWorld w(1);
  w.net.crash_at(w.at(0).id(), ms(20));
  for (Counter t = 1; t <= 20; ++t) w.submit(w.request(t % 4, t), t * 2.0);
  w.run(1000);
  expect_safe(w, {1, 2, 3});
  for (std::size_t i = 1; i < 4; ++i) {
    EXPECT_EQ(w.at(i).ord->view(), 1u);
    EXPECT_EQ(w.at(i).ord->leader(), w.at(1).id());
    EXPECT_EQ(delivered_keys(w.at(i)).size(), 20u);
  }
  EXPECT_GE(w.count("a_view"), 3u);
}

TEST(Ordering, LeaderIgnoringARequestIsReplaced) {
  OrderWorld w(1);
  const NodeId victim{102};
  w.rts[0]->out().set_interceptor([&](NodeId to, const Message& m) -> std::optional<std::vector<std::pair<NodeId, Message>>> {
    if (const auto* pp = std::get_if<PrePrepare>(&m)) {
      PrePrepare censored = *pp;
      std::erase_if(censored.proposals, [&](const Proposal& p) { return p.item.client() == victim; });
      return std::vector<std::pair<NodeId, Message>>{{to, censored}};
    }
    return std::nullopt;
  });
  for (Counter t = 1; t <= 12; ++t) w.submit(w.request(t % 4, t), t * 1.0);
  w.run(1000);
  expect_safe(w, all_of(w));
  for (std::size_t i = 1; i < 4; ++i) {
    EXPECT_GE(w.at(i).ord->view(), 1u);
    EXPECT_EQ(delivered_keys(w.at(i)).size(), 12u);
  }
}

TEST(Ordering, EquivocatingLeaderCannotSplitReplicas) {
  OrderWorld w(1);
  w.rts[0]->out().set_interceptor([&](NodeId to, const Message& m) -> std::optional<std::vector<std::pair<NodeId, Message>>> {
    if (const auto* pp = std::get_if<PrePrepare>(&m); pp && to.value % 2 == 0) {
      PrePrepare other = *pp;
      for (auto& p : other.proposals) p.item = w.request(3, 1000 + p.s, "forked");
      return std::vector<std::pair<NodeId, Message>>{{to, other}};
    }
    return std::nullopt;
  });
  for (Counter t = 1; t <= 10; ++t) w.submit(w.request(t % 3, t), t * 1.0);
  w.run(2000);
  expect_safe(w, {1, 2, 3});
  for (std::size_t i = 1; i < 4; ++i) {
    const auto keys = delivered_keys(w.at(i));
    for (Counter t = 1; t <= 10; ++t) EXPECT_TRUE(keys.count({100 + t % 3, t})) << "replica " << i << " t=" << t;
  }
}

TEST(Ordering, BlockedOwnerDoesNotTriggerSuspicion) {
  OrderWorld w(1);
  for (std::size_t i = 0; i < 4; ++i) w.at(i).hold = ms(10 * w.cfg.view_timeout / 1000);
  for (Counter t = 1; t <= 10; ++t) w.submit(w.request(t % 4, t), 0);
  w.run(2000);
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_EQ(w.at(i).log.size(), 10u);
    EXPECT_EQ(w.at(i).ord->view(), 0u);
  }
  EXPECT_EQ(w.count("a_suspect"), 0u);
}

TEST(Ordering, GcSkipsAheadAndViewChangeStartsAboveIt) {
  OrderWorld w(1);
  for (Counter t = 1; t <= 5; ++t) w.submit(w.request(0, t), 0);
  w.run(100);
  // replica 3 jumps over sequences it never saw, as after a checkpoint transfer
  const auto proof = w.certificate(10, "state@10", {0, 1});
  for (std::size_t i = 0; i < 4; ++i) w.at(i).ord->gc(11, proof);
  EXPECT_EQ(w.at(3).ord->next_delivery(), 11u);
  w.net.crash_at(w.at(0).id(), ms(150));
  for (Counter t = 1; t <= 3; ++t) w.submit(w.request(1, t), 160 + t);
  w.run(1500);
  expect_safe(w, {1, 2, 3}, {11});
  for (std::size_t i = 1; i < 4; ++i) {
    EXPECT_EQ(w.at(i).ord->view(), 1u);
    const auto& log = w.at(i).log;
    ASSERT_EQ(log.size(), 8u);
    EXPECT_EQ(log[5].first, 11u);
  }
}

TEST(Ordering, BlockedDeliveryIsAbandonedByGc) {
  OrderWorld w(1);
  w.at(2).hold = ms(10000);
  for (Counter t = 1; t <= 4; ++t) w.submit(w.request(0, t), 0);
  w.run(100);
  EXPECT_EQ(w.at(2).log.size(), 1u);
  w.at(2).ord->gc(4, w.certificate(3, "s3", {0, 1}));
  w.at(2).hold = 0;
  w.run(200);
  ASSERT_EQ(w.at(2).log.size(), 2u);
  EXPECT_EQ(w.at(2).log[1].first, 4u);
}

TEST(Ordering, ForgedViewChangesAreIgnored) {
  OrderWorld w(1);
  const NodeId evil = w.at(3).id();
  // a prepared entry with no proof and a low without certificate
  ViewChange vc{1, 1, {}, {PreparedEntry{1, 0, w.request(2, 7), {}}}};
  ViewChange jump{1, 50, {}, {}};
  for (std::size_t i = 0; i < 3; ++i) {
    for (const auto& m : {vc, jump}) {
      w.net.send(evil, w.at(i).id(), seal(w.crypto.signer_for(evil), m, AuthKind::Signature, {w.at(i).id()}));
    }
  }
  NewView nv{1, {SignedViewChange{vc, w.crypto.signer_for(evil).sign(encode(Message{vc}))}}};
  w.net.send(w.at(1).id(), w.at(2).id(), seal(w.crypto.signer_for(w.at(1).id()), nv, AuthKind::Mac, {w.at(2).id()}));
  w.run(200);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(w.at(i).ord->view(), 0u);
  EXPECT_EQ(w.count("a_view_change"), 0u);
}

TEST(Ordering, UnsignedRequestsAreNeverOrdered) {
  OrderWorld w(1);
  Request forged = w.request(0, 1);
  forged.request.write.op = to_bytes("steal");
  w.submit(forged, 0);
  // a faulty leader proposing it directly
  w.net.send(w.at(0).id(), w.at(1).id(),
             seal(w.crypto.signer_for(w.at(0).id()), PrePrepare{0, {Proposal{1, forged}}}, AuthKind::Mac, {w.at(1).id()}));
  w.run(300);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_TRUE(w.at(i).log.empty());
}

TEST(Ordering, SequencerMatchesMiniBftContract) {
  std::vector<std::set<Key>> seen;
  for (Impl impl : {Impl::Sequencer, Impl::MiniBft}) {
    OrderWorld w(1, 5, impl, 0.3);
    for (Counter t = 1; t <= 40; ++t) w.submit(w.request(t % 4, t), t * 0.5);
    w.run(500);
    expect_safe(w, all_of(w));
    for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(w.at(i).log.size(), 40u);
    seen.push_back(delivered_keys(w.at(0)));
  }
  EXPECT_EQ(seen[0], seen[1]);
}

// Random faults per seed: a crashed or equivocating or vote-garbling member,
// jitter, slow owners and a mid-run checkpoint jump.
TEST(Ordering, RandomizedSchedulesStaySafeAndLive) {
  std::size_t view_changes = 0;
  for (std::uint64_t seed = 1; seed <= 150; ++seed) {
    std::mt19937_64 rng(seed);
    const std::uint32_t f = seed % 3 == 0 ? 2 : 1;
    OrderWorld w(f, seed, Impl::MiniBft, std::uniform_real_distribution<double>(0, 1.5)(rng));
    const std::size_t n = w.replicas.size();
    const std::size_t faulty = rng() % 2 == 0 ? 0 : rng() % n;  // the first leader half the time
    const int fault = static_cast<int>(rng() % 4);
    std::set<std::size_t> correct = all_of(w);
    correct.erase(faulty);
    Runtime& bad = *w.rts[faulty];
    switch (fault) {
      case 0:
        w.net.crash_at(bad.self(), ms(std::uniform_real_distribution<double>(0, 60)(rng)));
        break;
      case 1:
        bad.out().set_interceptor([&w](NodeId to, const Message& m) -> std::optional<std::vector<std::pair<NodeId, Message>>> {
          if (const auto* pp = std::get_if<PrePrepare>(&m); pp && to.value % 2 == 0) {
            PrePrepare other = *pp;
            std::reverse(other.proposals.begin(), other.proposals.end());
            for (std::size_t k = 0; k < other.proposals.size(); ++k) other.proposals[k].s = pp->proposals[k].s;
            return std::vector<std::pair<NodeId, Message>>{{to, other}};
          }
          return std::nullopt;
        });
        break;
      case 2:
        bad.out().set_interceptor([](NodeId to, const Message& m) -> std::optional<std::vector<std::pair<NodeId, Message>>> {
          if (const auto* p = std::get_if<Prepare>(&m)) {
            Prepare lie = *p;
            for (auto& v : lie.votes) v.d.bytes[0] ^= 0x5a;
            return std::vector<std::pair<NodeId, Message>>{{to, lie}};
          }
          if (const auto* c = std::get_if<CommitPhase>(&m)) {
            CommitPhase lie = *c;
            for (auto& v : lie.votes) v.d.bytes[1] ^= 0x5a;
            return std::vector<std::pair<NodeId, Message>>{{to, lie}};
          }
          return std::nullopt;
        });
        break;
      default:
        bad.out().set_interceptor([](NodeId, const Message& m) -> std::optional<std::vector<std::pair<NodeId, Message>>> {
          if (std::holds_alternative<Suspect>(m) || std::holds_alternative<ViewChange>(m)) return std::nullopt;
          return std::vector<std::pair<NodeId, Message>>{};
        });
        break;
    }
    for (std::size_t i : correct) {
      if (rng() % 3 == 0) w.at(i).hold = ms(std::uniform_real_distribution<double>(0, 3)(rng));
    }
    const std::size_t requests = 20 + rng() % 30;
    // a client has one request outstanding, so counters grow with submission time
    std::vector<double> times;
    for (std::size_t k = 0; k < requests; ++k) times.push_back(std::uniform_real_distribution<double>(0, 200)(rng));
    std::sort(times.begin(), times.end());
    for (std::size_t k = 1; k <= requests; ++k) w.submit(w.request(k % 4, k), times[k - 1]);
    w.run(5000);
    SCOPED_TRACE("seed=" + std::to_string(seed) + " fault=" + std::to_string(fault) + " faulty=" + std::to_string(faulty));
    expect_safe(w, correct);
    for (std::size_t i : correct) {
      ASSERT_EQ(delivered_keys(w.at(i)).size(), requests) << "replica " << i;
    }
    view_changes += w.count("a_view") > 0;
  }
  EXPECT_GT(view_changes, 30u);
}
