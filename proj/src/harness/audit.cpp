#include "georep/harness/audit.hpp"

#include <algorithm>
#include <functional>
#include <set>
#include <sstream>

#include "georep/app/kv.hpp"

namespace georep::harness {

namespace {

using Fields = std::map<std::string, std::string>;

std::uint64_t num(const Fields& f, const std::string& key) {
  auto it = f.find(key);
  if (it == f.end()) throw std::invalid_argument("trace record lacks '" + key + "'");
  return std::stoull(it->second);
}

NodeId node_of(const std::string& label) { return NodeId{static_cast<std::uint32_t>(std::stoul(label))}; }

std::optional<Role> parse_role(const std::string& s) {
  if (s == "agreement") return Role::Agreement;
  if (s == "execution") return Role::Execution;
  if (s == "client") return Role::Client;
  if (s == "flat") return Role::Flat;
  return std::nullopt;
}

bool correct(const NodeTable& nodes, NodeId n) {
  auto it = nodes.find(n);
  return it == nodes.end() || !it->second.byzantine;
}

std::string at_time(SimTime t) {
  std::ostringstream os;
  os << t / 1000.0 << "ms";
  return os.str();
}

void fail(Verdict& v, const std::string& what) {
  if (!v.pass && std::count(v.detail.begin(), v.detail.end(), '\n') >= 9) return;  // keep the excerpt short
  v.pass = false;
  if (!v.detail.empty()) v.detail += "\n";
  v.detail += what;
}

struct ExecRecord {
  NodeId node;
  GroupId group;
  Seq s = 0;
  bool placeholder = false;
  ClientId client;
  Counter t = 0;
  std::string kind;
  std::string digest;
  Bytes op;
  Bytes reply;
  SimTime time = 0;
};

struct Delivery {
  NodeId node;
  ClientId client;
  Counter t = 0;
  std::string kind;
  std::string digest;
};

std::vector<ExecRecord> exec_records(const TraceLog& trace, const NodeTable& nodes) {
  std::vector<ExecRecord> out;
  for (const auto& r : trace.records()) {
    if (r.event != "e_exec") continue;
    const NodeId n = node_of(r.src);
    if (!correct(nodes, n)) continue;
    const Fields f = parse_detail(r.detail);
    ExecRecord e;
    e.node = n;
    e.group = GroupId{static_cast<std::uint32_t>(num(f, "group"))};
    e.s = num(f, "s");
    e.placeholder = r.kind == "Placeholder";
    e.client = ClientId{static_cast<std::uint32_t>(num(f, "client"))};
    e.t = num(f, "t");
    e.kind = r.kind;
    e.digest = r.digest;
    if (!e.placeholder) {
      e.op = from_hex(f.at("op"));
      e.reply = from_hex(f.at("reply"));
    }
    e.time = r.time;
    out.push_back(std::move(e));
  }
  return out;
}

std::map<Seq, Delivery> deliveries(const TraceLog& trace, const NodeTable& nodes, Verdict* conflicts) {
  std::map<Seq, Delivery> agreed;
  for (const auto& r : trace.records()) {
    if (r.event != "a_deliver") continue;
    const NodeId n = node_of(r.src);
    if (!correct(nodes, n)) continue;
    const Fields f = parse_detail(r.detail);
    Delivery d{n, ClientId{static_cast<std::uint32_t>(num(f, "client"))}, num(f, "t"), r.kind, r.digest};
    auto [it, fresh] = agreed.emplace(num(f, "s"), d);
    if (!fresh && it->second.digest != d.digest && conflicts) {
      fail(*conflicts, "s=" + std::to_string(it->first) + ": replica " + node_label(n) + " delivered " + d.digest +
                           ", replica " + node_label(it->second.node) + " delivered " + it->second.digest);
    }
  }
  return agreed;
}

using OpKey = std::pair<ClientId, Counter>;

// Reference execution of the agreed order.
struct Replay {
  std::map<OpKey, Seq> seq_of;
  std::map<OpKey, Bytes> reply_of;
  std::map<OpKey, Bytes> op_of;
  std::map<std::string, std::vector<std::pair<Seq, std::string>>> versions;  // per key, ascending

  std::string value_at(const std::string& key, Seq s) const {
    auto it = versions.find(key);
    if (it == versions.end()) return app::kAbsent;
    std::string v = app::kAbsent;
    for (const auto& [at, value] : it->second) {
      if (at > s) break;
      v = value;
    }
    return v;
  }
};

Replay replay(const std::vector<ExecRecord>& execs) {
  std::map<Seq, const ExecRecord*> order;
  for (const auto& e : execs) {
    if (!e.placeholder) order.emplace(e.s, &e);
  }
  Replay out;
  app::KvApplication kv;
  std::map<ClientId, Counter> last;
  for (const auto& [s, e] : order) {
    Counter& t = last[e->client];
    if (e->t <= t) continue;  // a duplicate is not executed again
    t = e->t;
    const OpKey key{e->client, e->t};
    out.seq_of[key] = s;
    out.op_of[key] = e->op;
    if (e->kind == "update") {
      out.reply_of[key] = kv.execute(e->op);
      if (auto op = app::parse_op(e->op); op && op->code != app::KvCode::Get) {
        out.versions[op->key].emplace_back(s, to_string(kv.read(app::get_op(op->key))));
      }
    } else if (e->kind == "strong_read") {
      out.reply_of[key] = kv.read(e->op);
    }
  }
  // strong reads whose contact group left no full record still have a position
  for (const auto& e : execs) out.seq_of.emplace(OpKey{e.client, e.t}, e.s);
  return out;
}

}  // namespace

NodeTable node_table(const TraceLog& trace) {
  NodeTable out;
  for (const auto& r : trace.records()) {
    if (r.event == "node") {
      const Fields f = parse_detail(r.detail);
      NodeFacts facts;
      facts.role = parse_role(r.kind).value_or(Role::Client);
      facts.group = GroupId{static_cast<std::uint32_t>(num(f, "group"))};
      facts.region = f.at("region");
      facts.zone = static_cast<std::uint32_t>(num(f, "zone"));
      auto& slot = out[node_of(r.src)];
      const bool byz = slot.byzantine;
      const auto crash = slot.crash;
      slot = facts;
      slot.byzantine = byz;
      slot.crash = crash;
    } else if (r.event == "fault") {
      auto& slot = out[node_of(r.src)];
      const Fields f = parse_detail(r.detail);
      if (r.kind == "crash") {
        slot.crash = num(f, "at");
      } else if (r.kind != "partition") {
        slot.byzantine = true;
      }
    }
  }
  return out;
}

std::vector<HistoryOp> client_history(const TraceLog& trace) {
  std::vector<HistoryOp> out;
  std::map<NodeId, std::size_t> open;
  for (const auto& r : trace.records()) {
    if (r.event != "c_issue" && r.event != "c_accept") continue;
    const NodeId c = node_of(r.src);
    const Fields f = parse_detail(r.detail);
    if (r.event == "c_issue") {
      HistoryOp op;
      op.client = c;
      op.issued_kind = r.kind;
      op.kind = r.kind;
      op.op = from_hex(f.at("op"));
      op.t = num(f, "t");
      op.issued = r.time;
      open[c] = out.size();
      out.push_back(std::move(op));
      continue;
    }
    auto it = open.find(c);
    if (it == open.end()) continue;
    HistoryOp& op = out[it->second];
    open.erase(it);
    op.kind = r.kind;
    op.accepted = r.time;
    op.t = num(f, "t");
    op.reply = from_hex(f.at("reply"));
    op.status = static_cast<ResultStatus>(num(f, "status"));
    op.group = GroupId{static_cast<std::uint32_t>(num(f, "group"))};
    op.hops = static_cast<std::uint32_t>(num(f, "hops"));
  }
  return out;
}

HistoryVerdicts check_history(const TraceLog& trace) {
  HistoryVerdicts v;
  const NodeTable nodes = node_table(trace);
  const auto execs = exec_records(trace, nodes);
  const auto agreed = deliveries(trace, nodes, nullptr);
  const auto history = client_history(trace);

  // (a) every correct replica executed what was agreed, and a group's replicas computed one reply
  std::map<Seq, const ExecRecord*> first;
  std::map<std::pair<GroupId, Seq>, const ExecRecord*> group_reply;
  for (const auto& e : execs) {
    const std::string where = "replica " + node_label(e.node) + " group " + std::to_string(e.group.value) + " s=" +
                              std::to_string(e.s) + " at " + at_time(e.time);
    if (auto a = agreed.find(e.s); a != agreed.end()) {
      const Delivery& d = a->second;
      if (d.client != e.client || d.t != e.t) {
        fail(v.execute_equality, where + ": executed (" + node_label(e.client) + "," + std::to_string(e.t) + ") but (" +
                                     node_label(d.client) + "," + std::to_string(d.t) + ") was agreed");
      } else if (e.placeholder ? d.kind != "strong_read" : d.digest != e.digest) {
        fail(v.execute_equality, where + ": executed item differs from the agreed one");
      }
    }
    auto [it, fresh] = first.emplace(e.s, &e);
    if (!fresh && (it->second->client != e.client || it->second->t != e.t)) {
      fail(v.execute_equality, where + ": differs from replica " + node_label(it->second->node));
    }
    if (!e.placeholder) {
      auto [g, novel] = group_reply.emplace(std::make_pair(e.group, e.s), &e);
      if (!novel && g->second->reply != e.reply) {
        fail(v.execute_equality, where + ": reply differs from replica " + node_label(g->second->node));
      }
    }
  }

  const Replay ref = replay(execs);

  // (c) accepted replies equal the reference replay
  struct Strong {
    const HistoryOp* op;
    Seq s;
  };
  std::vector<Strong> strong;
  for (const auto& op : history) {
    if (!op.accepted || !correct(nodes, op.client) || op.kind == "weak" || op.kind == "admin") continue;
    if (op.status != ResultStatus::Ok) continue;
    const OpKey key{op.client, op.t};
    const std::string who = "client " + node_label(op.client) + " t=" + std::to_string(op.t) + " issued " +
                            at_time(op.issued) + " accepted " + at_time(*op.accepted);
    auto s = ref.seq_of.find(key);
    if (s == ref.seq_of.end()) {
      fail(v.replay, who + ": accepted but never executed");
      continue;
    }
    strong.push_back({&op, s->second});
    auto reply = ref.reply_of.find(key);
    if (reply == ref.reply_of.end()) continue;  // only placeholders were logged
    if (ref.op_of.at(key) != op.op) fail(v.replay, who + ": executed a different operation than issued");
    if (reply->second != op.reply) {
      fail(v.replay, who + ": accepted '" + to_string(op.reply) + "' but replay gives '" + to_string(reply->second) +
                         "' at s=" + std::to_string(s->second));
    }
  }

  // (b) an operation accepted before another was issued is ordered first
  std::vector<const Strong*> by_accept, by_issue;
  for (const auto& st : strong) {
    by_accept.push_back(&st);
    by_issue.push_back(&st);
  }
  std::sort(by_accept.begin(), by_accept.end(), [](auto* a, auto* b) { return *a->op->accepted < *b->op->accepted; });
  std::sort(by_issue.begin(), by_issue.end(), [](auto* a, auto* b) { return a->op->issued < b->op->issued; });
  const Strong* latest = nullptr;
  std::size_t k = 0;
  for (const Strong* b : by_issue) {
    while (k < by_accept.size() && *by_accept[k]->op->accepted < b->op->issued) {
      if (!latest || by_accept[k]->s > latest->s) latest = by_accept[k];
      ++k;
    }
    if (latest && latest->s >= b->s) {
      fail(v.real_time, "client " + node_label(latest->op->client) + " t=" + std::to_string(latest->op->t) +
                            " accepted at " + at_time(*latest->op->accepted) + " with s=" + std::to_string(latest->s) +
                            ", but client " + node_label(b->op->client) + " t=" + std::to_string(b->op->t) + " issued at " +
                            at_time(b->op->issued) + " got s=" + std::to_string(b->s));
    }
  }

  // (d) weak reads return the state some correct group member had during the read
  std::map<NodeId, std::vector<std::pair<SimTime, Seq>>> progress;
  for (const auto& e : execs) progress[e.node].emplace_back(e.time, e.s);
  for (const auto& r : trace.records()) {
    if (r.event == "e_jump" && correct(nodes, node_of(r.src))) progress[node_of(r.src)].emplace_back(r.time, num(parse_detail(r.detail), "s"));
  }
  for (auto& [n, p] : progress) std::stable_sort(p.begin(), p.end());
  for (const auto& op : history) {
    if (!op.accepted || op.kind != "weak" || !correct(nodes, op.client)) continue;
    const auto parsed = app::parse_op(op.op);
    if (!parsed || parsed->code != app::KvCode::Get) continue;
    const std::string got = to_string(op.reply);
    bool matched = false;
    for (const auto& [n, facts] : nodes) {
      if (matched) break;
      if (facts.byzantine || facts.group != op.group || (facts.role != Role::Execution && facts.role != Role::Flat)) continue;
      Seq at_issue = 0;
      std::vector<Seq> candidates;
      if (auto p = progress.find(n); p != progress.end()) {
        for (const auto& [time, s] : p->second) {
          if (time <= op.issued) at_issue = std::max(at_issue, s);
          if (time > op.issued && time <= *op.accepted) candidates.push_back(s);
        }
      }
      candidates.push_back(at_issue);
      for (Seq s : candidates) {
        if (ref.value_at(parsed->key, s) == got) {
          matched = true;
          break;
        }
      }
    }
    if (!matched) {
      fail(v.weak_reads, "client " + node_label(op.client) + " weak read of " + parsed->key + " returned '" + got +
                             "' between " + at_time(op.issued) + " and " + at_time(*op.accepted) +
                             ", a state group " + std::to_string(op.group.value) + " never had then");
    }
  }
  return v;
}

Verdict check_agreement_order(const TraceLog& trace) {
  Verdict v{"agreement_order"};
  deliveries(trace, node_table(trace), &v);
  return v;
}

Verdict check_checkpoints(const TraceLog& trace) {
  Verdict v{"checkpoint_agreement"};
  const NodeTable nodes = node_table(trace);
  std::map<std::pair<std::uint64_t, Seq>, std::pair<std::string, NodeId>> seen;
  for (const auto& r : trace.records()) {
    if (r.event != "cp_stable" || !correct(nodes, node_of(r.src))) continue;
    const Fields f = parse_detail(r.detail);
    const auto key = std::make_pair(num(f, "group"), num(f, "s"));
    auto [it, fresh] = seen.emplace(key, std::make_pair(r.digest, node_of(r.src)));
    if (!fresh && it->second.first != r.digest) {
      fail(v, "group " + std::to_string(key.first) + " s=" + std::to_string(key.second) + ": replicas " +
                  node_label(it->second.second) + " and " + r.src + " hold different stable checkpoints");
    }
  }
  return v;
}

Verdict check_checkpoint_equivalence(const TraceLog& trace) {
  Verdict v{"checkpoint_equivalence"};
  const NodeTable nodes = node_table(trace);
  std::map<Seq, std::string> agreement_state;
  std::map<std::pair<std::uint64_t, Seq>, std::string> group_state;
  std::map<Seq, std::string> counters_state;
  std::vector<const TraceRecord*> jumps;
  for (const auto& r : trace.records()) {
    if (!correct(nodes, node_of(r.src))) continue;
    if (r.event == "a_jump" || r.event == "e_jump") jumps.push_back(&r);
    if (r.event == "a_state") {
      const Seq s = num(parse_detail(r.detail), "s");
      auto [it, fresh] = agreement_state.emplace(s, r.digest);
      if (!fresh && it->second != r.digest) fail(v, "agreement replicas disagree on the state at s=" + std::to_string(s));
    }
    if (r.event == "e_state") {
      const Fields f = parse_detail(r.detail);
      const Seq s = num(f, "s");
      auto [g, fresh] = group_state.emplace(std::make_pair(num(f, "group"), s), r.digest);
      if (!fresh && g->second != r.digest) {
        fail(v, "group " + f.at("group") + " replicas disagree on the state at s=" + std::to_string(s));
      }
      auto [c, novel] = counters_state.emplace(s, f.at("counters"));
      if (!novel && c->second != f.at("counters")) fail(v, "groups disagree on the application state at s=" + std::to_string(s));
    }
  }
  std::size_t compared = 0;
  for (const TraceRecord* r : jumps) {
    const Fields f = parse_detail(r->detail);
    const Seq s = num(f, "s");
    if (r->event == "a_jump") {
      auto it = agreement_state.find(s);
      if (it == agreement_state.end()) continue;
      ++compared;
      if (it->second != r->digest) fail(v, "agreement replica " + r->src + " jumped to s=" + std::to_string(s) + " with a different state");
    } else {
      auto it = counters_state.find(s);
      if (it == counters_state.end()) continue;
      ++compared;
      if (it->second != f.at("counters")) {
        fail(v, "execution replica " + r->src + " jumped to s=" + std::to_string(s) + " with a different state");
      }
    }
  }
  if (v.pass) v.detail = std::to_string(compared) + " checkpoint arrivals compared";
  return v;
}

Verdict check_liveness(const TraceLog& trace) {
  Verdict v{"liveness"};
  const NodeTable nodes = node_table(trace);
  for (const auto& op : client_history(trace)) {
    if (op.accepted || !correct(nodes, op.client)) continue;
    fail(v, "client " + node_label(op.client) + " " + op.issued_kind + " issued at " + at_time(op.issued) + " never completed");
  }
  return v;
}

std::vector<Verdict> audit(const TraceLog& trace, bool liveness) {
  std::vector<Verdict> out = check_history(trace).list();
  out.push_back(check_agreement_order(trace));
  out.push_back(check_checkpoints(trace));
  out.push_back(check_checkpoint_equivalence(trace));
  if (liveness) out.push_back(check_liveness(trace));
  return out;
}

namespace {

bool apply(app::KvApplication& kv, const LinOp& op) {
  auto parsed = app::parse_op(op.op);
  if (!parsed) return false;
  const Bytes got = parsed->code == app::KvCode::Get ? kv.read(op.op) : kv.execute(op.op);
  return got == op.reply;
}

}  // namespace

bool linearizable_brute_force(const std::vector<LinOp>& ops) {
  if (ops.size() > 10) throw std::invalid_argument("brute-force search is limited to 10 operations");
  const std::size_t n = ops.size();
  std::vector<bool> used(n, false);
  std::function<bool(std::size_t, const app::KvApplication&)> search = [&](std::size_t placed, const app::KvApplication& kv) {
    if (placed == n) return true;
    for (std::size_t i = 0; i < n; ++i) {
      if (used[i]) continue;
      // i may go next only if no remaining operation finished before it started
      bool blocked = false;
      for (std::size_t j = 0; j < n && !blocked; ++j) blocked = j != i && !used[j] && ops[j].response < ops[i].invoke;
      if (blocked) continue;
      app::KvApplication next = kv;
      if (!apply(next, ops[i])) continue;
      used[i] = true;
      const bool ok = search(placed + 1, next);
      used[i] = false;
      if (ok) return true;
    }
    return false;
  };
  return search(0, app::KvApplication{});
}

bool linearizable_in_order(const std::vector<LinOp>& ops, const std::vector<Seq>& seq) {
  if (ops.size() != seq.size()) throw std::invalid_argument("one sequence number per operation");
  std::vector<std::size_t> idx(ops.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::sort(idx.begin(), idx.end(), [&seq](std::size_t a, std::size_t b) { return seq[a] < seq[b]; });
  for (std::size_t a = 0; a < ops.size(); ++a) {
    for (std::size_t b = 0; b < ops.size(); ++b) {
      if (ops[a].response < ops[b].invoke && seq[a] >= seq[b]) return false;
    }
  }
  app::KvApplication kv;
  for (std::size_t i : idx) {
    if (!apply(kv, ops[i])) return false;
  }
  return true;
}

}  // namespace georep::harness
