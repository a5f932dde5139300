#pragma once

#include <map>
#include <vector>

#include "georep/core/codec.hpp"
#include "georep/core/messages.hpp"

namespace georep::replica {

// One agreed sequence number as the agreement group remembers it.
struct HistEntry {
  Seq s = 0;
  Request item;
  ExecStatus status = ExecStatus::Ok;
  auto tie() { return std::tie(s, item, status); }
  auto tie() const { return std::tie(s, item, status); }
  friend bool operator==(const HistEntry&, const HistEntry&) = default;
};

// Agreement checkpoint content.
struct AgreementState {
  std::map<ClientId, Counter> t;      // latest agreed counter per client
  std::vector<HistEntry> hist;        // last commit-capacity entries, ascending
  std::vector<GroupEntry> registry;   // ascending group id
  std::map<GroupId, Seq> joined;      // sequence of the AddGroup that created each group (0 = initial)
  auto tie() { return std::tie(t, hist, registry, joined); }
  auto tie() const { return std::tie(t, hist, registry, joined); }
};

// The Execute a group receives for an agreed entry: strong reads only reach
// their contact group in full.
Execute execute_for(const HistEntry& e, GroupId group);

struct ReplyEntry {
  Counter t_c = 0;
  bool placeholder = false;
  ResultStatus status = ResultStatus::Ok;
  Bytes reply;
  auto tie() { return std::tie(t_c, placeholder, status, reply); }
  auto tie() const { return std::tie(t_c, placeholder, status, reply); }
  friend bool operator==(const ReplyEntry&, const ReplyEntry&) = default;
};

// Execution checkpoint content.
struct ExecutionState {
  std::map<ClientId, ReplyEntry> u;
  Bytes app;
  auto tie() { return std::tie(u, app); }
  auto tie() const { return std::tie(u, app); }
};

// Digest over (s_n, t, hist).
Digest agreement_digest(Seq s_n, const AgreementState& st);
// Digest over (s_n, app, u). With counters_only, u is reduced to (client, t_c),
// which is what groups agree on when strong reads went elsewhere.
Digest execution_digest(Seq s_n, const ExecutionState& st, bool counters_only = false);

}  // namespace georep::replica
