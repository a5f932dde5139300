#include <gtest/gtest.h>

#include "georep/checkpoint/checkpoint.hpp"
#include "georep/core/crypto.hpp"
#include "georep/sim/network.hpp"

using namespace georep;
using namespace georep::checkpoint;

namespace {

struct Member : Node {
  Member(Runtime& rt, CheckpointConfig cfg)
      : Node(rt), cp(std::move(cfg), rt, [this](Seq s, const Bytes& st) { stable.emplace_back(s, st); }) {}
  void on_message(const Envelope& env) override { cp.handle(env); }
  CheckpointComponent cp;
  std::vector<std::pair<Seq, Bytes>> stable;
};

// Group 1 in region A, group 2 in region B.
struct CpWorld {
  explicit CpWorld(std::size_t groups = 1) : crypto(4), net(sim, topo, dir, trace) {
    topo.set_delay("A", "B", 50);
    std::uint32_t next = 1;
    for (std::size_t g = 0; g < groups; ++g) {
      GroupView view{GroupId{static_cast<std::uint32_t>(g + 1)}, {}, 1};
      for (std::uint32_t i = 0; i < 3; ++i) view.members.push_back(NodeId{next++});
      views.push_back(view);
    }
    for (const auto& view : views) {
      for (std::uint32_t i = 0; i < view.members.size(); ++i) {
        const NodeId id = view.members[i];
        dir.add(NodeInfo{id, Role::Execution, view.id, i, {view.id.value == 1 ? "A" : "B", i}});
        crypto.register_principal(id);
        rts.push_back(std::make_unique<Runtime>(sim, net, crypto, trace, id));
        CheckpointConfig cfg;
        cfg.group = view;
        members.push_back(std::make_unique<Member>(*rts.back(), cfg));
        members.back()->cp.set_remote_groups([this] { return views; });
        net.attach(id, [m = members.back().get()](const Envelope& e) { m->receive(e); });
      }
    }
  }

  Member& at(std::size_t i) { return *members[i]; }
  void run(double until_ms) { sim.run_until(ms(until_ms)); }
  std::size_t count(const std::string& event, const std::string& needle = "") const {
    std::size_t n = 0;
    for (const auto& r : trace.records()) {
      if (r.event == event && r.detail.find(needle) != std::string::npos) ++n;
    }
    return n;
  }

  Simulator sim{3};
  Topology topo;
  Directory dir;
  TraceLog trace;
  CryptoProvider crypto;
  Network net;
  std::vector<GroupView> views;
  std::vector<std::unique_ptr<Runtime>> rts;
  std::vector<std::unique_ptr<Member>> members;
};

Bytes state(const std::string& s) { return to_bytes(s); }

CpState certified(CpWorld& w, Seq s, const Bytes& st, std::vector<std::size_t> signers, GroupId g = GroupId{1}) {
  CpState out{s, st, {}};
  CheckpointMsg cp{g, s, sha256(st)};
  for (std::size_t i : signers) {
    out.certificate.push_back(
        SignedCheckpoint{cp, w.crypto.signer_for(w.members[i]->id()).sign(encode(Message{cp}))});
  }
  return out;
}

}  // namespace

TEST(Checkpoint, MatchingStatesBecomeStableEverywhere) {
  CpWorld w;
  for (std::size_t i = 0; i < 3; ++i) w.at(i).cp.gen_cp(10, state("s10"));
  w.run(50);
  for (std::size_t i = 0; i < 3; ++i) {
    ASSERT_EQ(w.at(i).stable.size(), 1u);
    EXPECT_EQ(w.at(i).stable[0], (std::pair<Seq, Bytes>{10, state("s10")}));
    EXPECT_EQ(w.at(i).cp.delivered(), 10u);
  }
}

TEST(Checkpoint, WrongDigestFromOneMemberNeverCertifies) {
  CpWorld w;
  w.at(0).cp.gen_cp(10, state("good"));
  w.at(1).cp.gen_cp(10, state("good"));
  w.at(2).cp.gen_cp(10, state("bad"));
  w.run(500);
  for (const auto& r : w.trace.records()) {
    if (r.event == "cp_stable") EXPECT_EQ(r.digest, sha256(state("good")).hex());
  }
  for (std::size_t i = 0; i < 3; ++i) {
    ASSERT_FALSE(w.at(i).stable.empty());
    EXPECT_EQ(w.at(i).stable.back().second, state("good"));
  }
  // the diverged member replaced its state by fetching
  EXPECT_EQ(w.count("cp_stable", "via=fetch"), 1u);
}

TEST(Checkpoint, OlderCheckpointsAreSkipped) {
  CpWorld w;
  for (std::size_t i = 0; i < 3; ++i) w.at(i).cp.gen_cp(10, state("s10"));
  w.run(50);
  for (std::size_t i = 0; i < 3; ++i) w.at(i).cp.gen_cp(5, state("s5"));
  w.run(100);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(w.at(i).stable.size(), 1u);
}

TEST(Checkpoint, MemberWithoutStateFetchesIt) {
  CpWorld w;
  w.at(0).cp.gen_cp(10, state("s10"));
  w.at(1).cp.gen_cp(10, state("s10"));
  w.run(500);
  ASSERT_EQ(w.at(2).stable.size(), 1u);
  EXPECT_EQ(w.at(2).stable[0].second, state("s10"));
  EXPECT_EQ(w.count("cp_stable", "via=fetch"), 1u);
}

TEST(Checkpoint, LyingStateServerIsIgnored) {
  CpWorld w;
  // member 1 answers fetches with a forged state carrying a real certificate
  w.rts[1]->out().set_interceptor([](NodeId to, const Message& m) -> std::optional<std::vector<std::pair<NodeId, Message>>> {
    if (const auto* st = std::get_if<CpState>(&m)) {
      CpState forged = *st;
      forged.state = to_bytes("forged");
      return std::vector<std::pair<NodeId, Message>>{{to, forged}};
    }
    return std::nullopt;
  });
  w.at(0).cp.gen_cp(10, state("s10"));
  w.at(1).cp.gen_cp(10, state("s10"));
  w.run(500);
  ASSERT_EQ(w.at(2).stable.size(), 1u);
  EXPECT_EQ(w.at(2).stable[0].second, state("s10"));
}

TEST(Checkpoint, LaggingMemberFetchesNewerCheckpoint) {
  CpWorld w;
  for (Seq s : {10, 20}) {
    w.at(0).cp.gen_cp(s, state("s" + std::to_string(s)));
    w.at(1).cp.gen_cp(s, state("s" + std::to_string(s)));
  }
  w.at(2).cp.fetch_cp(11);
  w.run(60);
  ASSERT_FALSE(w.at(2).stable.empty());
  EXPECT_EQ(w.at(2).stable.back().first, 20u);
  EXPECT_EQ(w.at(2).stable.back().second, state("s20"));
  EXPECT_FALSE(w.at(2).cp.fetching());
}

TEST(Checkpoint, FetchBelowDeliveredIsNoop) {
  CpWorld w;
  for (std::size_t i = 0; i < 3; ++i) w.at(i).cp.gen_cp(10, state("s10"));
  w.run(50);
  w.at(0).cp.fetch_cp(5);
  EXPECT_FALSE(w.at(0).cp.fetching());
  EXPECT_EQ(w.count("cp_fetch"), 0u);
}

TEST(Checkpoint, NewGroupFetchesFromRemoteGroupOnce) {
  CpWorld w(2);
  for (std::size_t i = 0; i < 3; ++i) w.at(i).cp.gen_cp(10, state("s10"));
  w.run(50);
  w.at(3).cp.fetch_cp(1, true);
  w.run(400);
  ASSERT_EQ(w.at(3).stable.size(), 1u);
  EXPECT_EQ(w.at(3).stable[0].second, state("s10"));
  EXPECT_EQ(w.count("cp_fetch", "scope=remote"), 1u);
  // its peers then pick the bundle up inside their own group
  EXPECT_EQ(w.at(4).stable.size(), 1u);
  EXPECT_EQ(w.at(5).stable.size(), 1u);
}

TEST(Checkpoint, StalledGroupFallsBackToRemoteAfterGrace) {
  CpWorld w(2);
  for (std::size_t i = 0; i < 3; ++i) w.at(i).cp.gen_cp(10, state("s10"));
  w.run(50);
  w.at(4).cp.fetch_cp(10);
  w.run(120);
  EXPECT_TRUE(w.at(4).stable.empty());
  w.run(400);
  ASSERT_EQ(w.at(4).stable.size(), 1u);
  EXPECT_GE(w.count("cp_fetch", "scope=local"), 1u);
  EXPECT_EQ(w.count("cp_fetch", "scope=remote"), 1u);
}

TEST(Checkpoint, PartitionedMemberCatchesUpThroughGossip) {
  CpWorld w;
  w.net.add_partition(Partition{{w.at(2).id()}, 0, ms(200), true});
  for (Seq s : {10, 20}) {
    w.at(0).cp.gen_cp(s, state("s" + std::to_string(s)));
    w.at(1).cp.gen_cp(s, state("s" + std::to_string(s)));
  }
  w.run(190);
  EXPECT_TRUE(w.at(2).stable.empty());
  w.run(600);
  ASSERT_EQ(w.at(2).stable.size(), 1u);
  EXPECT_EQ(w.at(2).stable[0].first, 20u);
}

TEST(Checkpoint, ForgedVotesAndStatesChangeNothing) {
  CpWorld w(2);
  // a member of group 2 votes in group 1, and pushes a state certified by one signer twice
  const NodeId outsider = w.at(3).id();
  const CheckpointMsg cp{GroupId{1}, 10, sha256(state("evil"))};
  w.net.send(outsider, w.at(0).id(), seal(w.crypto.signer_for(outsider), cp, AuthKind::Signature, {w.at(0).id()}));
  w.net.send(w.at(1).id(), w.at(0).id(), seal(w.crypto.signer_for(w.at(1).id()), cp, AuthKind::Signature, {w.at(0).id()}));
  CpState dup = certified(w, 10, state("evil"), {1, 1});
  w.net.send(w.at(1).id(), w.at(0).id(), seal(w.crypto.signer_for(w.at(1).id()), dup, AuthKind::Mac, {w.at(0).id()}));
  w.run(500);
  EXPECT_TRUE(w.at(0).stable.empty());
}

TEST(Checkpoint, BundleValidation) {
  CpWorld w;
  const GroupView& g = w.views[0];
  EXPECT_TRUE(valid_bundle(w.crypto, g, certified(w, 10, state("x"), {0, 1})));
  EXPECT_FALSE(valid_bundle(w.crypto, g, certified(w, 10, state("x"), {0})));
  EXPECT_FALSE(valid_bundle(w.crypto, g, certified(w, 10, state("x"), {0, 0})));
  CpState wrong_state = certified(w, 10, state("x"), {0, 1});
  wrong_state.state = state("y");
  EXPECT_FALSE(valid_bundle(w.crypto, g, wrong_state));
  CpState wrong_seq = certified(w, 10, state("x"), {0, 1});
  wrong_seq.s = 11;
  EXPECT_FALSE(valid_bundle(w.crypto, g, wrong_seq));
  CpState bad_sig = certified(w, 10, state("x"), {0, 1});
  bad_sig.certificate[1].sig.tag.bytes[0] ^= 1;
  EXPECT_FALSE(valid_bundle(w.crypto, g, bad_sig));
}

TEST(Checkpoint, RetainsOnlyRecentBundles) {
  CpWorld w;
  for (Seq s = 10; s <= 50; s += 10) {
    for (std::size_t i = 0; i < 3; ++i) w.at(i).cp.gen_cp(s, state("s" + std::to_string(s)));
  }
  w.run(100);
  EXPECT_EQ(w.at(0).cp.stable().size(), 2u);
  EXPECT_EQ(w.at(0).cp.stable().rbegin()->first, 50u);
  std::vector<Seq> seen;
  for (const auto& [s, st] : w.at(0).stable) seen.push_back(s);
  EXPECT_TRUE(std::is_sorted(seen.begin(), seen.end()));
}
