#pragma once

#include <functional>
#include <map>
#include <optional>
#include <set>

#include "georep/core/messages.hpp"
#include "georep/sim/runtime.hpp"

namespace georep::client {

enum class OpKind : std::uint8_t { Write = 0, StrongRead = 1, WeakRead = 2, Admin = 3 };
const char* op_name(OpKind k);

struct ClientConfig {
  std::vector<NodeId> agreement;  // registry servers
  std::uint32_t f_a = 1;
  std::uint32_t f_reply = 1;      // replies needed are f_reply+1 from one group
  std::uint32_t max_retries = 3;  // retries before switching groups
  std::uint32_t weak_rounds = 2;  // mismatching weak-read rounds before a strong read
  // Fixed group list instead of registry queries (flat baseline).
  std::optional<std::vector<GroupEntry>> fixed_groups;
  std::function<double(const GroupEntry&)> distance;   // smaller is nearer
  std::function<SimTime(const GroupEntry&)> retry_period;
};

struct Outcome {
  OpKind kind = OpKind::Write;
  Bytes op;
  Bytes reply;
  ResultStatus status = ResultStatus::Ok;
  GroupId group;
  Counter t_c = 0;          // counter of the accepted request; nonce for weak reads
  SimTime issued = 0;
  SimTime accepted = 0;
  bool escalated = false;   // weak read answered by a strong read
};

class Client : public Node {
 public:
  using Done = std::function<void(const Outcome&)>;

  Client(ClientConfig cfg, Runtime& rt);

  void write(Bytes op, Done done) { start(OpKind::Write, std::move(op), std::move(done)); }
  void read_strong(Bytes op, Done done) { start(OpKind::StrongRead, std::move(op), std::move(done)); }
  void read_weak(Bytes op, Done done) { start(OpKind::WeakRead, std::move(op), std::move(done)); }
  // An AddGroup / RemoveGroup encoded as AdminOp; only the configured admin succeeds.
  void admin(Bytes op, Done done) { start(OpKind::Admin, std::move(op), std::move(done)); }

  bool busy() const { return op_.has_value(); }
  Counter counter() const { return t_c_; }
  std::optional<GroupId> group() const;
  std::size_t group_switches() const { return switches_; }

  void close();

 protected:
  void on_message(const Envelope& env) override;

 private:
  struct Pending {
    OpKind kind;
    Bytes op;
    Done done;
    SimTime issued;
    bool escalated = false;
    std::uint32_t retries = 0;
    std::uint32_t weak_round = 0;
    Counter nonce = 0;
    std::optional<SignedWrite> request;
    std::map<GroupId, std::map<NodeId, std::pair<ResultStatus, Bytes>>> tally;
  };

  void start(OpKind kind, Bytes op, Done done);
  void resolve();
  void on_registry(NodeId from, const RegistryReply& r);
  void choose_group();
  void transmit();
  void arm_retry();
  void on_retry();
  void on_result(NodeId from, const Result& r);
  void weak_failed();
  void finish(ResultStatus status, Bytes reply, GroupId g);
  const GroupEntry* current() const;
  std::optional<GroupId> group_of(NodeId replica) const;

  ClientConfig cfg_;
  bool closed_ = false;
  Counter t_c_ = 1;
  Counter nonce_ = 0;
  std::optional<Pending> op_;

  std::vector<GroupEntry> groups_;
  std::optional<GroupId> current_;
  std::set<GroupId> avoid_;
  std::size_t switches_ = 0;

  bool resolving_ = false;
  Counter registry_nonce_ = 0;
  std::map<NodeId, std::vector<GroupEntry>> registry_answers_;
  Timer retry_timer_;
};

}  // namespace georep::client
