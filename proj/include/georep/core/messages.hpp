#pragma once

#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "georep/core/codec.hpp"
#include "georep/core/types.hpp"

namespace georep {

// ---- authenticators -------------------------------------------------------

struct Signature {
  NodeId signer;
  Digest tag;
  auto tie() { return std::tie(signer, tag); }
  auto tie() const { return std::tie(signer, tag); }
  friend bool operator==(const Signature&, const Signature&) = default;
};

struct MacEntry {
  NodeId receiver;
  Digest tag;
  auto tie() { return std::tie(receiver, tag); }
  auto tie() const { return std::tie(receiver, tag); }
  friend bool operator==(const MacEntry&, const MacEntry&) = default;
};

struct MacVector {
  NodeId signer;
  std::vector<MacEntry> entries;
  auto tie() { return std::tie(signer, entries); }
  auto tie() const { return std::tie(signer, entries); }
  friend bool operator==(const MacVector&, const MacVector&) = default;
};

using Authenticator = std::variant<Signature, MacVector>;

NodeId signer_of(const Authenticator& a);

// ---- client requests and replies ------------------------------------------

enum class RequestKind : std::uint8_t { Update = 0, StrongRead = 1, Admin = 2, Noop = 3 };
constexpr std::uint8_t enum_count(RequestKind) { return 4; }
std::string_view kind_name(RequestKind k);

struct Write {
  RequestKind kind = RequestKind::Update;
  Bytes op;
  ClientId client;
  Counter t_c = 0;
  auto tie() { return std::tie(kind, op, client, t_c); }
  auto tie() const { return std::tie(kind, op, client, t_c); }
  friend bool operator==(const Write&, const Write&) = default;
};

struct SignedWrite {
  Write write;
  Signature sig;
  auto tie() { return std::tie(write, sig); }
  auto tie() const { return std::tie(write, sig); }
  friend bool operator==(const SignedWrite&, const SignedWrite&) = default;
};

// A client request together with the group that received it.
struct Request {
  SignedWrite request;
  GroupId group;
  auto tie() { return std::tie(request, group); }
  auto tie() const { return std::tie(request, group); }
  friend bool operator==(const Request&, const Request&) = default;

  ClientId client() const { return request.write.client; }
  Counter counter() const { return request.write.t_c; }
  RequestKind kind() const { return request.write.kind; }
};

Request make_noop();

struct Placeholder {
  ClientId client;
  Counter t_c = 0;
  auto tie() { return std::tie(client, t_c); }
  auto tie() const { return std::tie(client, t_c); }
  friend bool operator==(const Placeholder&, const Placeholder&) = default;
};

enum class ExecStatus : std::uint8_t { Ok = 0, Rejected = 1 };
constexpr std::uint8_t enum_count(ExecStatus) { return 2; }

struct Execute {
  Seq s = 0;
  std::variant<Request, Placeholder> body;
  ExecStatus status = ExecStatus::Ok;
  auto tie() { return std::tie(s, body, status); }
  auto tie() const { return std::tie(s, body, status); }
  friend bool operator==(const Execute&, const Execute&) = default;
};

enum class ResultStatus : std::uint8_t { Ok = 0, Rejected = 1, Resubmit = 2 };
constexpr std::uint8_t enum_count(ResultStatus) { return 3; }

struct Result {
  ClientId client;
  Counter t_c = 0;  // request counter, or the nonce for weak reads
  ResultStatus status = ResultStatus::Ok;
  bool weak = false;
  Bytes reply;
  auto tie() { return std::tie(client, t_c, status, weak, reply); }
  auto tie() const { return std::tie(client, t_c, status, weak, reply); }
  friend bool operator==(const Result&, const Result&) = default;
};

struct ReadWeak {
  ClientId client;
  Counter nonce = 0;
  Bytes op;
  auto tie() { return std::tie(client, nonce, op); }
  auto tie() const { return std::tie(client, nonce, op); }
};

// ---- message channels ------------------------------------------------------

enum class ChannelKind : std::uint8_t { Request = 0, Commit = 1, Test = 2 };
constexpr std::uint8_t enum_count(ChannelKind) { return 3; }

struct ChannelId {
  ChannelKind kind = ChannelKind::Test;
  GroupId group;
  auto tie() { return std::tie(kind, group); }
  auto tie() const { return std::tie(kind, group); }
  friend auto operator<=>(const ChannelId&, const ChannelId&) = default;
};

std::string to_string(const ChannelId& ch);

struct SendMsg {
  ChannelId ch;
  Subchannel sc = 0;
  Position p = 0;
  Bytes m;
  auto tie() { return std::tie(ch, sc, p, m); }
  auto tie() const { return std::tie(ch, sc, p, m); }
};

struct MoveEntry {
  Subchannel sc = 0;
  Position p = 0;
  auto tie() { return std::tie(sc, p); }
  auto tie() const { return std::tie(sc, p); }
  friend bool operator==(const MoveEntry&, const MoveEntry&) = default;
};

struct MoveMsg {
  ChannelId ch;
  Counter counter = 0;
  std::vector<MoveEntry> entries;
  std::optional<NodeId> collector;
  auto tie() { return std::tie(ch, counter, entries, collector); }
  auto tie() const { return std::tie(ch, counter, entries, collector); }
};

struct ShareMsg {
  ChannelId ch;
  Subchannel sc = 0;
  Position p = 0;
  Digest d;
  auto tie() { return std::tie(ch, sc, p, d); }
  auto tie() const { return std::tie(ch, sc, p, d); }
};

struct CertificateMsg {
  ChannelId ch;
  Subchannel sc = 0;
  Position p = 0;
  Bytes m;
  std::vector<Signature> shares;
  auto tie() { return std::tie(ch, sc, p, m, shares); }
  auto tie() const { return std::tie(ch, sc, p, m, shares); }
};

struct ProgressMsg {
  ChannelId ch;
  std::vector<MoveEntry> positions;
  auto tie() { return std::tie(ch, positions); }
  auto tie() const { return std::tie(ch, positions); }
};

// ---- checkpoints -------------------------------------------------------------

struct CheckpointMsg {
  GroupId group;
  Seq s = 0;
  Digest h;
  auto tie() { return std::tie(group, s, h); }
  auto tie() const { return std::tie(group, s, h); }
  friend bool operator==(const CheckpointMsg&, const CheckpointMsg&) = default;
};

struct SignedCheckpoint {
  CheckpointMsg cp;
  Signature sig;
  auto tie() { return std::tie(cp, sig); }
  auto tie() const { return std::tie(cp, sig); }
};

struct CpAnnounce {
  GroupId group;
  Seq s = 0;
  auto tie() { return std::tie(group, s); }
  auto tie() const { return std::tie(group, s); }
};

struct CpFetch {
  Seq s_min = 0;
  auto tie() { return std::tie(s_min); }
  auto tie() const { return std::tie(s_min); }
};

struct CpState {
  Seq s = 0;
  Bytes state;
  std::vector<SignedCheckpoint> certificate;
  auto tie() { return std::tie(s, state, certificate); }
  auto tie() const { return std::tie(s, state, certificate); }
};

// ---- registry and reconfiguration -------------------------------------------

struct GroupEntry {
  GroupId id;
  std::string region;
  std::vector<NodeId> members;
  auto tie() { return std::tie(id, region, members); }
  auto tie() const { return std::tie(id, region, members); }
  friend bool operator==(const GroupEntry&, const GroupEntry&) = default;
};

struct AddGroup {
  GroupEntry group;
  auto tie() { return std::tie(group); }
  auto tie() const { return std::tie(group); }
};

struct RemoveGroup {
  GroupId id;
  auto tie() { return std::tie(id); }
  auto tie() const { return std::tie(id); }
};

using AdminOp = std::variant<AddGroup, RemoveGroup>;

struct RegistryQuery {
  Counter nonce = 0;
  auto tie() { return std::tie(nonce); }
  auto tie() const { return std::tie(nonce); }
};

struct RegistryReply {
  Counter nonce = 0;
  std::vector<GroupEntry> groups;
  auto tie() { return std::tie(nonce, groups); }
  auto tie() const { return std::tie(nonce, groups); }
};

// ---- ordering ----------------------------------------------------------------

struct Proposal {
  Seq s = 0;
  Request item;
  auto tie() { return std::tie(s, item); }
  auto tie() const { return std::tie(s, item); }
};

struct PrePrepare {
  View view = 0;
  std::vector<Proposal> proposals;
  auto tie() { return std::tie(view, proposals); }
  auto tie() const { return std::tie(view, proposals); }
};

struct PhaseVote {
  Seq s = 0;
  Digest d;
  auto tie() { return std::tie(s, d); }
  auto tie() const { return std::tie(s, d); }
};

struct Prepare {
  View view = 0;
  std::vector<PhaseVote> votes;
  auto tie() { return std::tie(view, votes); }
  auto tie() const { return std::tie(view, votes); }
};

struct CommitPhase {
  View view = 0;
  std::vector<PhaseVote> votes;
  auto tie() { return std::tie(view, votes); }
  auto tie() const { return std::tie(view, votes); }
};

struct Suspect {
  View view = 0;
  auto tie() { return std::tie(view); }
  auto tie() const { return std::tie(view); }
};

// A Prepare as sent, with the sender's signature over its encoding.
struct SignedPrepare {
  Prepare prepare;
  Signature sig;
  auto tie() { return std::tie(prepare, sig); }
  auto tie() const { return std::tie(prepare, sig); }
};

struct PreparedEntry {
  Seq s = 0;
  View view = 0;
  Request item;
  std::vector<SignedPrepare> proof;  // 2f+1 prepares for (view, s, digest(item))
  auto tie() { return std::tie(s, view, item, proof); }
  auto tie() const { return std::tie(s, view, item, proof); }
};

struct ViewChange {
  View new_view = 0;
  Seq low = 1;                              // first sequence not covered by a stable checkpoint
  std::vector<SignedCheckpoint> low_proof;  // certificate of the checkpoint at low-1, empty when low is 1
  std::vector<PreparedEntry> prepared;
  auto tie() { return std::tie(new_view, low, low_proof, prepared); }
  auto tie() const { return std::tie(new_view, low, low_proof, prepared); }
};

struct SignedViewChange {
  ViewChange vc;
  Signature sig;
  auto tie() { return std::tie(vc, sig); }
  auto tie() const { return std::tie(vc, sig); }
};

struct NewView {
  View view = 0;
  std::vector<SignedViewChange> proofs;
  auto tie() { return std::tie(view, proofs); }
  auto tie() const { return std::tie(view, proofs); }
};

struct Assign {
  Seq s = 0;
  Request item;
  auto tie() { return std::tie(s, item); }
  auto tie() const { return std::tie(s, item); }
};

struct OrderForward {
  Request item;
  auto tie() { return std::tie(item); }
  auto tie() const { return std::tie(item); }
};

// Everything that travels in an envelope. The alternative index is the wire tag.
using Message = std::variant<SignedWrite, ReadWeak, Result, SendMsg, MoveMsg, ShareMsg, CertificateMsg,
                             ProgressMsg, CheckpointMsg, CpAnnounce, CpFetch, CpState, RegistryQuery,
                             RegistryReply, PrePrepare, Prepare, CommitPhase, Suspect, ViewChange, NewView,
                             Assign, OrderForward>;

std::string_view kind_name(const Message& m);

// Channel of an IRMC message, if it is one.
std::optional<ChannelId> channel_of(const Message& m);

// Message plus its canonical bytes and authenticator. Shared between all
// copies of a multicast.
struct Packet {
  Message msg;
  Bytes wire;  // canonical encoding of msg; authenticators cover these bytes
  Authenticator auth;
};

struct Envelope {
  NodeId from;
  NodeId to;
  std::shared_ptr<const Packet> packet;
  std::uint32_t wan_hops = 0;  // inter-region hops along the causal chain

  const Message& msg() const { return packet->msg; }
  const Authenticator& auth() const { return packet->auth; }
  const Bytes& wire() const { return packet->wire; }
};

}  // namespace georep
