#include "georep/replica/execution.hpp"

#include "georep/core/crypto.hpp"

namespace georep::replica {

ExecutionReplica::ExecutionReplica(ExecutionConfig cfg, Runtime& rt)
    : Node(rt),
      cfg_(std::move(cfg)),
      request_tx_(irmc::make_sender(cfg_.channels.request_variant,
                                    request_channel(cfg_.group, cfg_.f_e, cfg_.agreement, cfg_.f_a, cfg_.channels), rt)),
      commit_rx_(irmc::make_receiver(cfg_.channels.commit_variant,
                                     commit_channel(cfg_.group, cfg_.f_e, cfg_.agreement, cfg_.f_a, cfg_.channels), rt)),
      cp_(checkpoint::CheckpointConfig{checkpoint::GroupView{cfg_.group.id, cfg_.group.members, cfg_.f_e}}, rt,
          [this](Seq s, const Bytes& st) { on_stable(s, st); }) {
  if (cfg_.peer_groups) cp_.set_remote_groups(cfg_.peer_groups);
}

ExecutionState ExecutionReplica::state() const { return ExecutionState{u_, app_.snapshot()}; }

void ExecutionReplica::start() {
  if (started_) return;
  started_ = true;
  step();
}

void ExecutionReplica::close() {
  closed_ = true;
  request_tx_->close();
  commit_rx_->close();
  cp_.close();
}

void ExecutionReplica::on_message(const Envelope& env) {
  if (closed_) return;
  const Message& m = env.msg();
  if (auto ch = channel_of(m)) {
    if (ch->group != cfg_.group.id) return;
    if (ch->kind == ChannelKind::Request) request_tx_->handle(env);
    if (ch->kind == ChannelKind::Commit) commit_rx_->handle(env);
  } else if (const auto* sw = std::get_if<SignedWrite>(&m)) {
    on_write(env.from, *sw);
  } else if (const auto* rw = std::get_if<ReadWeak>(&m)) {
    on_weak_read(env.from, *rw);
  } else {
    cp_.handle(env);
  }
}

void ExecutionReplica::step() {
  if (closed_ || fetching_) return;
  const Seq want = s_n_ + 1;
  commit_rx_->receive(0, want, [this, want](irmc::ReceiveResult r) {
    // a delivery available right away must not recurse through the loop
    rt_.defer([this, want, r = std::move(r)] { on_commit(want, r); });
  });
}

void ExecutionReplica::on_commit(Seq want, const irmc::ReceiveResult& r) {
  if (closed_ || want != s_n_ + 1) return;
  if (const auto* old = std::get_if<irmc::TooOld>(&r)) {
    // missed Executes; only a checkpoint can bring us past them
    rt_.log("e_too_old", "Execute", Detail().add("group", cfg_.group.id.value).add("want", want).add("start", old->start).str());
    fetching_ = true;
    cp_.fetch_cp(std::max(want, old->start - 1), s_n_ == 0);
    return;
  }
  Execute e;
  try {
    e = decode<Execute>(std::get<Bytes>(r));
  } catch (const DecodeError&) {
    rt_.log("e_reject", "Execute", Detail().add("s", want).add("why", "decode").str());
    return;
  }
  if (e.s != want) {
    rt_.log("e_reject", "Execute", Detail().add("s", want).add("why", "position").str());
    return;
  }
  execute(e);
  s_n_ = want;
  if (s_n_ % cfg_.k_e == 0) {
    const ExecutionState st = state();
    rt_.log("e_state", "Checkpoint",
            Detail().add("group", cfg_.group.id.value).add("s", s_n_).add("counters", execution_digest(s_n_, st, true).short_hex()).str(),
            execution_digest(s_n_, st).short_hex());
    cp_.gen_cp(s_n_, encode(st));
  }
  step();
}

void ExecutionReplica::execute(const Execute& e) {
  if (const auto* ph = std::get_if<Placeholder>(&e.body)) {
    ReplyEntry& u = u_[ph->client];
    if (ph->t_c <= u.t_c && filter_duplicates_) return;
    u = ReplyEntry{ph->t_c, true, ResultStatus::Ok, {}};
    rt_.log("e_exec", "Placeholder",
            Detail().add("group", cfg_.group.id.value).add("s", e.s).add("client", ph->client.value).add("t", ph->t_c).str());
    return;
  }
  const Request& r = std::get<Request>(e.body);
  if (r.kind() == RequestKind::Noop) return;
  if (!valid_write(rt_.crypto(), r.request)) {
    rt_.log("e_reject", "Execute", Detail().add("s", e.s).add("why", "authenticator").str());
    return;
  }
  const ClientId c = r.client();
  ReplyEntry& u = u_[c];
  if (r.counter() <= u.t_c && filter_duplicates_) return;
  ReplyEntry next{r.counter(), false, ResultStatus::Ok, {}};
  if (e.status == ExecStatus::Rejected) {
    next.status = ResultStatus::Rejected;
    next.reply = to_bytes("rejected");
  } else if (r.kind() == RequestKind::Update) {
    next.reply = app_.execute(r.request.write.op);
  } else if (r.kind() == RequestKind::StrongRead) {
    next.reply = app_.read(r.request.write.op);
  } else {
    next.reply = to_bytes(app::kStored);
  }
  u = next;
  rt_.log("e_exec", std::string(kind_name(r.kind())),
          Detail()
              .add("group", cfg_.group.id.value)
              .add("s", e.s)
              .add("client", c.value)
              .add("t", r.counter())
              .add("op", to_hex(r.request.write.op))
              .add("reply", to_hex(u.reply))
              .str(),
          digest_of(r).short_hex());
  if (r.group == cfg_.group.id) reply(c, u);
}

void ExecutionReplica::reply(ClientId c, const ReplyEntry& u) {
  const ResultStatus st = u.placeholder ? ResultStatus::Resubmit : u.status;
  rt_.out().send(c, Result{c, u.t_c, st, false, u.placeholder ? Bytes{} : u.reply});
}

void ExecutionReplica::on_write(NodeId from, const SignedWrite& sw) {
  const ClientId c = sw.write.client;
  if (from != c || !authorized(c) || sw.write.kind == RequestKind::Noop) return;
  if (!valid_write(rt_.crypto(), sw)) return;
  const Counter t = sw.write.t_c;
  auto u = u_.find(c);
  if (u != u_.end() && t <= u->second.t_c) {
    if (t == u->second.t_c) reply(c, u->second);
    return;
  }
  Counter& fwd = forwarded_[c];
  if (t <= fwd) return;  // retry with no result yet
  fwd = t;
  request_tx_->move_window(c.value, t);
  request_tx_->send(c.value, t, encode(Request{sw, cfg_.group.id}), [] {});
}

void ExecutionReplica::on_weak_read(NodeId from, const ReadWeak& rw) {
  if (from != rw.client || !authorized(rw.client)) return;
  rt_.out().send(rw.client, Result{rw.client, rw.nonce, ResultStatus::Ok, true, app_.read(rw.op)});
}

void ExecutionReplica::on_stable(Seq s, const Bytes& bytes) {
  commit_rx_->move_window(0, s + 1);
  if (s <= s_n_) return;
  ExecutionState st;
  try {
    st = decode<ExecutionState>(bytes);
    app_.restore(st.app);
  } catch (const DecodeError&) {
    return;  // certified by f_e+1, so a correct replica produced it; unreachable
  }
  u_ = std::move(st.u);
  s_n_ = s;
  fetching_ = false;
  const ExecutionState now = state();
  rt_.log("e_jump", "Checkpoint",
          Detail().add("group", cfg_.group.id.value).add("s", s).add("counters", execution_digest(s, now, true).short_hex()).str(),
          execution_digest(s, now).short_hex());
  if (started_) step();
}

}  // namespace georep::replica
