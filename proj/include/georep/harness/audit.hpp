#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "georep/core/messages.hpp"
#include "georep/sim/trace.hpp"

namespace georep::harness {

struct Verdict {
  Verdict() = default;
  Verdict(std::string n, bool p = true, std::string d = {}) : name(std::move(n)), pass(p), detail(std::move(d)) {}
  std::string name;
  bool pass = true;
  std::string detail;  // the violating records when failed
};

// Placement and fault facts recorded at the start of every trace.
struct NodeFacts {
  Role role = Role::Client;
  GroupId group;
  std::string region;
  std::uint32_t zone = 0;
  bool byzantine = false;
  std::optional<SimTime> crash;
};
using NodeTable = std::map<NodeId, NodeFacts>;
NodeTable node_table(const TraceLog& trace);

// One client operation reconstructed from c_issue / c_accept.
struct HistoryOp {
  NodeId client;
  std::string issued_kind;   // write | strong | weak | admin
  std::string kind;          // as accepted; weak reads may escalate to strong
  Bytes op;
  Counter t = 0;
  SimTime issued = 0;
  std::optional<SimTime> accepted;
  Bytes reply;
  ResultStatus status = ResultStatus::Ok;
  GroupId group;
  std::uint32_t hops = 0;
};
std::vector<HistoryOp> client_history(const TraceLog& trace);

// The four client-visible verdicts: per-sequence Execute equality, real-time
// order, replies matching a reference replay, and weak reads matching some state
// of their group within their interval.
struct HistoryVerdicts {
  Verdict execute_equality{"execute_equality"};
  Verdict real_time{"real_time_order"};
  Verdict replay{"replay_replies"};
  Verdict weak_reads{"weak_read_interval"};
  bool ok() const { return execute_equality.pass && real_time.pass && replay.pass && weak_reads.pass; }
  std::vector<Verdict> list() const { return {execute_equality, real_time, replay, weak_reads}; }
};
HistoryVerdicts check_history(const TraceLog& trace);

// Correct ordering replicas deliver the same item at each sequence.
Verdict check_agreement_order(const TraceLog& trace);
// Stable checkpoints of a group at a sequence carry one digest.
Verdict check_checkpoints(const TraceLog& trace);
// A replica that jumped to s via a checkpoint holds the state that replicas
// executing up to s hold (execution groups compare client counters, not replies).
Verdict check_checkpoint_equivalence(const TraceLog& trace);
// Every operation of a correct client was accepted.
Verdict check_liveness(const TraceLog& trace);

// All of the above; liveness only when asked for.
std::vector<Verdict> audit(const TraceLog& trace, bool liveness);

// Exhaustive linearizability check of key-value operations against real time.
struct LinOp {
  SimTime invoke = 0;
  SimTime response = 0;
  Bytes op;
  Bytes reply;
};
// Throws std::invalid_argument above 10 operations.
bool linearizable_brute_force(const std::vector<LinOp>& ops);
// The same history checked against the order given by seq (smaller first).
bool linearizable_in_order(const std::vector<LinOp>& ops, const std::vector<Seq>& seq);

}  // namespace georep::harness
