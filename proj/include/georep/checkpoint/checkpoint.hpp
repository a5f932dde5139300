#pragma once

#include <functional>
#include <map>
#include <optional>
#include <vector>

#include "georep/core/messages.hpp"
#include "georep/sim/runtime.hpp"

namespace georep::checkpoint {

struct GroupView {
  GroupId id;
  std::vector<NodeId> members;
  std::uint32_t f = 0;
};

struct CheckpointConfig {
  GroupView group;
  SimTime gossip_period = ms(10);
  SimTime fetch_retry = ms(50);     // local fetch rounds
  SimTime fetch_grace = ms(100);    // time to catch up on our own before fetching
  SimTime remote_retry = ms(300);   // cross-group fetch rounds
  std::size_t retained = 2;         // stable bundles kept for serving transfers
  std::size_t pending_votes = 16;   // per member, for sequences not yet stable
};

// A stable checkpoint: the state and the f+1 signed digests that certify it.
struct Bundle {
  Seq s = 0;
  Bytes state;
  std::vector<SignedCheckpoint> certificate;
};

// True when the certificate proves the state for the group.
bool valid_bundle(const CryptoProvider& crypto, const GroupView& group, const CpState& st);

class CheckpointComponent {
 public:
  using StableFn = std::function<void(Seq, const Bytes&)>;
  using RemoteGroups = std::function<std::vector<GroupView>()>;

  CheckpointComponent(CheckpointConfig cfg, Runtime& rt, StableFn on_stable);

  void gen_cp(Seq s, Bytes state);
  // Fetch a stable checkpoint at or above s_min; remote_first skips the local phase.
  void fetch_cp(Seq s_min, bool remote_first = false);
  // Consumes checkpoint traffic; false if the message is not ours.
  bool handle(const Envelope& env);

  // Other groups able to serve state (execution replicas only).
  void set_remote_groups(RemoteGroups fn) { remote_groups_ = std::move(fn); }

  Seq delivered() const { return delivered_; }
  const std::map<Seq, Bundle>& stable() const { return stable_; }
  bool fetching() const { return fetch_target_.has_value(); }
  void close();

 private:
  struct Vote {
    Digest h;
    SignedCheckpoint signed_cp;
  };

  bool member(NodeId n) const;
  std::vector<NodeId> peers() const;
  void on_vote(NodeId from, const SignedCheckpoint& v);
  void on_announce(NodeId from, const CpAnnounce& a);
  void on_fetch(NodeId from, const CpFetch& f);
  void on_state(NodeId from, const CpState& st);
  void try_stable(Seq s);
  void deliver(Bundle b, const char* via);
  void announce();
  void gossip();
  void catch_up_later(Seq s);
  void fetch_round();
  std::optional<GroupView> remote_source(std::size_t k) const;

  CheckpointConfig cfg_;
  Runtime& rt_;
  StableFn on_stable_;
  RemoteGroups remote_groups_;
  bool closed_ = false;

  Seq delivered_ = 0;
  std::map<Seq, Bundle> stable_;
  std::map<Seq, Bytes> own_;                          // generated, not yet stable
  std::map<Seq, std::map<NodeId, Vote>> votes_;       // not yet stable
  std::map<NodeId, Seq> peer_latest_;                 // latest stable each peer announced

  std::optional<Seq> fetch_target_;
  bool remote_phase_ = false;
  std::size_t remote_index_ = 0;
  SimTime phase_started_ = 0;
  Timer fetch_timer_;
  Timer grace_timer_;
  Seq grace_target_ = 0;
  Timer gossip_timer_;
};

}  // namespace georep::checkpoint
