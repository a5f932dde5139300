#include "georep/replica/flat.hpp"

#include "georep/core/crypto.hpp"

namespace georep::replica {

FlatReplica::FlatReplica(FlatConfig cfg, Runtime& rt)
    : Node(rt),
      cfg_(std::move(cfg)),
      cp_(checkpoint::CheckpointConfig{checkpoint::GroupView{kAgreementGroup, cfg_.members, cfg_.f}}, rt,
          [this](Seq s, const Bytes& st) { on_stable(s, st); }) {
  if (cfg_.k == 0) throw ConfigError("checkpoint interval must be positive");
  auto params = cfg_.ordering_params;
  params.members = cfg_.members;
  params.f = cfg_.f;
  params.group = kAgreementGroup;
  ord_ = ordering::make_minibft(params, rt, [this](Seq s, const Request& item, ordering::Ordering::Release release) {
    on_deliver(s, item, std::move(release));
  });
}

void FlatReplica::close() {
  closed_ = true;
  ord_->close();
  cp_.close();
}

void FlatReplica::on_message(const Envelope& env) {
  if (closed_) return;
  const Message& m = env.msg();
  if (const auto* sw = std::get_if<SignedWrite>(&m)) {
    on_write(env.from, *sw);
  } else if (const auto* rw = std::get_if<ReadWeak>(&m)) {
    if (env.from == rw->client && authorized(rw->client)) {
      rt_.out().send(rw->client, Result{rw->client, rw->nonce, ResultStatus::Ok, true, app_.read(rw->op)});
    }
  } else if (!cp_.handle(env)) {
    ord_->handle(env);
  }
}

void FlatReplica::on_write(NodeId from, const SignedWrite& sw) {
  const ClientId c = sw.write.client;
  if (from != c || !authorized(c) || sw.write.kind == RequestKind::Noop || sw.write.kind == RequestKind::Admin) return;
  if (!valid_write(rt_.crypto(), sw)) return;
  auto u = u_.find(c);
  if (u != u_.end() && sw.write.t_c <= u->second.t_c) {
    if (sw.write.t_c == u->second.t_c) reply(c, u->second);
    return;
  }
  ord_->order(Request{sw, kAgreementGroup});
}

void FlatReplica::on_deliver(Seq s, const Request& item, ordering::Ordering::Release release) {
  if (closed_ || s <= s_n_) {
    release();
    return;
  }
  s_n_ = s;
  if (item.kind() != RequestKind::Noop) {
    const ClientId c = item.client();
    ReplyEntry& u = u_[c];
    if (item.counter() > u.t_c) {
      ReplyEntry next{item.counter(), false, ResultStatus::Ok, {}};
      next.reply = item.kind() == RequestKind::StrongRead ? app_.read(item.request.write.op) : app_.execute(item.request.write.op);
      u = next;
      rt_.log("e_exec", std::string(kind_name(item.kind())),
              Detail()
                  .add("group", kAgreementGroup.value)
                  .add("s", s)
                  .add("client", c.value)
                  .add("t", item.counter())
                  .add("op", to_hex(item.request.write.op))
                  .add("reply", to_hex(u.reply))
                  .str(),
              digest_of(item).short_hex());
      reply(c, u);
    }
  }
  if (s % cfg_.k == 0) {
    const ExecutionState st = state();
    rt_.log("e_state", "Checkpoint",
            Detail().add("group", kAgreementGroup.value).add("s", s).add("counters", execution_digest(s, st, true).short_hex()).str(),
            execution_digest(s, st).short_hex());
    cp_.gen_cp(s, encode(st));
  }
  release();
}

void FlatReplica::reply(ClientId c, const ReplyEntry& u) {
  rt_.out().send(c, Result{c, u.t_c, u.status, false, u.reply});
}

void FlatReplica::on_stable(Seq s, const Bytes& bytes) {
  if (s > s_n_) {
    ExecutionState st;
    try {
      st = decode<ExecutionState>(bytes);
      app_.restore(st.app);
    } catch (const DecodeError&) {
      return;
    }
    u_ = std::move(st.u);
    s_n_ = s;
    const ExecutionState now = state();
    rt_.log("e_jump", "Checkpoint",
            Detail().add("group", kAgreementGroup.value).add("s", s).add("counters", execution_digest(s, now, true).short_hex()).str(),
            execution_digest(s, now).short_hex());
    ord_->retire([this](const Request& r) {
      auto u = u_.find(r.client());
      return u != u_.end() && r.counter() <= u->second.t_c;
    });
  }
  ord_->gc(s + 1, cp_.stable().at(s).certificate);
}

}  // namespace georep::replica
