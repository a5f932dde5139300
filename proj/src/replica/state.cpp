#include "georep/replica/state.hpp"

#include "georep/core/crypto.hpp"

namespace georep::replica {

Execute execute_for(const HistEntry& e, GroupId group) {
  Execute out;
  out.s = e.s;
  out.status = e.status;
  if (e.item.kind() == RequestKind::StrongRead && e.item.group != group) {
    out.body = Placeholder{e.item.client(), e.item.counter()};
  } else {
    out.body = e.item;
  }
  return out;
}

Digest agreement_digest(Seq s_n, const AgreementState& st) {
  return sha256(encode(std::make_pair(s_n, std::make_pair(st.t, st.hist))));
}

Digest execution_digest(Seq s_n, const ExecutionState& st, bool counters_only) {
  if (!counters_only) return sha256(encode(std::make_pair(s_n, std::make_pair(st.app, st.u))));
  std::map<ClientId, Counter> counters;
  for (const auto& [c, r] : st.u) counters[c] = r.t_c;
  return sha256(encode(std::make_pair(s_n, std::make_pair(st.app, counters))));
}

}  // namespace georep::replica
