#include "georep/client/client.hpp"

#include <algorithm>
#include <stdexcept>

#include "georep/core/crypto.hpp"

namespace georep::client {

const char* op_name(OpKind k) {
  switch (k) {
    case OpKind::Write: return "write";
    case OpKind::StrongRead: return "strong";
    case OpKind::WeakRead: return "weak";
    case OpKind::Admin: return "admin";
  }
  return "?";
}

namespace {

RequestKind request_kind(OpKind k) {
  switch (k) {
    case OpKind::StrongRead: return RequestKind::StrongRead;
    case OpKind::Admin: return RequestKind::Admin;
    default: return RequestKind::Update;
  }
}

}  // namespace

Client::Client(ClientConfig cfg, Runtime& rt) : Node(rt), cfg_(std::move(cfg)) {
  if (cfg_.fixed_groups) groups_ = *cfg_.fixed_groups;
}

std::optional<GroupId> Client::group() const { return current_; }

void Client::close() {
  closed_ = true;
  retry_timer_.cancel();
}

void Client::start(OpKind kind, Bytes op, Done done) {
  if (op_) throw std::logic_error("client already has an outstanding request");
  if (closed_) return;
  op_.emplace();
  op_->kind = kind;
  op_->op = std::move(op);
  op_->done = std::move(done);
  op_->issued = rt_.now();
  rt_.log("c_issue", op_name(kind),
          Detail().add("t", kind == OpKind::WeakRead ? 0 : t_c_).add("op", to_hex(op_->op)).str());
  if (groups_.empty()) {
    resolve();
    return;
  }
  if (!current_) choose_group();
  transmit();
}

void Client::resolve() {
  if (closed_ || resolving_) return;
  if (cfg_.fixed_groups) {
    choose_group();
    transmit();
    return;
  }
  resolving_ = true;
  registry_answers_.clear();
  rt_.out().multicast(cfg_.agreement, RegistryQuery{++registry_nonce_});
  const SimTime wait = current() && cfg_.retry_period ? cfg_.retry_period(*current()) : ms(200);
  retry_timer_ = rt_.after(wait, [this] { on_retry(); });
}

void Client::on_registry(NodeId from, const RegistryReply& r) {
  if (!resolving_ || r.nonce != registry_nonce_) return;
  if (std::find(cfg_.agreement.begin(), cfg_.agreement.end(), from) == cfg_.agreement.end()) return;
  registry_answers_.emplace(from, r.groups);
  const auto matching = std::count_if(registry_answers_.begin(), registry_answers_.end(),
                                      [&](const auto& kv) { return kv.second == r.groups; });
  if (matching < static_cast<std::ptrdiff_t>(cfg_.f_a) + 1) return;
  resolving_ = false;
  retry_timer_.cancel();
  groups_ = r.groups;
  choose_group();
  transmit();
}

void Client::choose_group() {
  std::vector<const GroupEntry*> candidates;
  for (const auto& g : groups_) {
    if (!avoid_.count(g.id)) candidates.push_back(&g);
  }
  if (candidates.empty()) {
    avoid_.clear();
    for (const auto& g : groups_) candidates.push_back(&g);
  }
  if (candidates.empty()) return;
  auto dist = [this](const GroupEntry& g) { return cfg_.distance ? cfg_.distance(g) : 0.0; };
  const GroupEntry* best = *std::min_element(candidates.begin(), candidates.end(), [&](const auto* a, const auto* b) {
    const double da = dist(*a), db = dist(*b);
    return da != db ? da < db : a->id < b->id;
  });
  if (current_ && *current_ != best->id) {
    ++switches_;
    rt_.log("c_switch", "Client", Detail().add("from", current_->value).add("to", best->id.value).str());
  }
  current_ = best->id;
}

const GroupEntry* Client::current() const {
  if (!current_) return nullptr;
  for (const auto& g : groups_) {
    if (g.id == *current_) return &g;
  }
  return nullptr;
}

std::optional<GroupId> Client::group_of(NodeId replica) const {
  for (const auto& g : groups_) {
    if (std::find(g.members.begin(), g.members.end(), replica) != g.members.end()) return g.id;
  }
  return std::nullopt;
}

void Client::transmit() {
  if (!op_ || closed_) return;
  const GroupEntry* g = current();
  if (!g) {
    resolve();
    return;
  }
  if (op_->kind == OpKind::WeakRead) {
    op_->nonce = ++nonce_;
    op_->tally.clear();
    rt_.out().multicast(g->members, ReadWeak{id(), op_->nonce, op_->op});
  } else {
    if (!op_->request || op_->request->write.t_c != t_c_) {
      op_->request = sign_write(rt_.out().signer(), Write{request_kind(op_->kind), op_->op, id(), t_c_});
    }
    rt_.out().multicast(g->members, *op_->request);
  }
  arm_retry();
}

void Client::arm_retry() {
  const GroupEntry* g = current();
  const SimTime wait = g && cfg_.retry_period ? cfg_.retry_period(*g) : ms(200);
  retry_timer_ = rt_.after(wait, [this] { on_retry(); });
}

void Client::on_retry() {
  if (closed_) return;
  if (resolving_) {
    resolving_ = false;
    resolve();
    return;
  }
  if (!op_) return;
  if (op_->kind == OpKind::WeakRead) {
    weak_failed();
    return;
  }
  if (++op_->retries <= cfg_.max_retries) {
    transmit();
    return;
  }
  // the group looks unresponsive
  op_->retries = 0;
  if (current_) avoid_.insert(*current_);
  if (cfg_.fixed_groups) {
    choose_group();
    transmit();
  } else {
    resolve();
  }
}

void Client::weak_failed() {
  if (++op_->weak_round >= cfg_.weak_rounds) {
    rt_.log("c_escalate", "Client", Detail().add("nonce", op_->nonce).str());
    op_->kind = OpKind::StrongRead;
    op_->escalated = true;
    op_->retries = 0;
    op_->tally.clear();
  }
  transmit();
}

void Client::on_result(NodeId from, const Result& r) {
  if (!op_ || r.client != id()) return;
  const auto g = group_of(from);
  if (!g) return;
  const bool weak = op_->kind == OpKind::WeakRead;
  if (r.weak != weak || r.t_c != (weak ? op_->nonce : t_c_)) return;
  auto& by = op_->tally[*g];
  by.emplace(from, std::make_pair(r.status, r.reply));  // one answer per replica
  std::map<std::pair<ResultStatus, Bytes>, std::size_t> counts;
  for (const auto& [n, v] : by) ++counts[v];
  const std::size_t need = cfg_.f_reply + 1;
  for (const auto& [v, n] : counts) {
    if (n < need) continue;
    if (v.first == ResultStatus::Resubmit) {
      // the request was skipped in our group; issue it again under a fresh counter
      rt_.log("c_resubmit", "Client", Detail().add("t", t_c_).str());
      ++t_c_;
      op_->tally.clear();
      op_->retries = 0;
      transmit();
      return;
    }
    finish(v.first, v.second, *g);
    return;
  }
  if (weak) {
    std::size_t members = 0;
    for (const auto& e : groups_) {
      if (e.id == *g) members = e.members.size();
    }
    std::size_t best = 0;
    for (const auto& [v, n] : counts) best = std::max(best, n);
    if (best + (members - by.size()) < need) {
      retry_timer_.cancel();
      weak_failed();
    }
  }
}

void Client::finish(ResultStatus status, Bytes reply, GroupId g) {
  retry_timer_.cancel();
  Outcome out;
  out.kind = op_->kind;
  out.op = op_->op;
  out.reply = std::move(reply);
  out.status = status;
  out.group = g;
  out.t_c = op_->kind == OpKind::WeakRead ? op_->nonce : t_c_;
  out.issued = op_->issued;
  out.accepted = rt_.now();
  out.escalated = op_->escalated;
  if (op_->kind != OpKind::WeakRead) ++t_c_;
  rt_.log("c_accept", op_name(out.kind),
          Detail()
              .add("t", out.t_c)
              .add("group", g.value)
              .add("status", static_cast<std::uint32_t>(status))
              .add("reply", to_hex(out.reply))
              .add("latency_us", out.accepted - out.issued)
              .add("hops", rt_.sim().causal_hops())
              .str());
  Done done = std::move(op_->done);
  op_.reset();
  if (done) done(out);
}

void Client::on_message(const Envelope& env) {
  if (closed_) return;
  if (const auto* r = std::get_if<Result>(&env.msg())) {
    on_result(env.from, *r);
  } else if (const auto* reg = std::get_if<RegistryReply>(&env.msg())) {
    on_registry(env.from, *reg);
  }
}

}  // namespace georep::client
