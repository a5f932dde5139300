#pragma once

#include <functional>
#include <memory>

#include "georep/app/kv.hpp"
#include "georep/checkpoint/checkpoint.hpp"
#include "georep/irmc/endpoint.hpp"
#include "georep/replica/channels.hpp"
#include "georep/replica/state.hpp"

namespace georep::replica {

struct ExecutionConfig {
  GroupEntry group;
  std::uint32_t f_e = 1;
  std::vector<NodeId> agreement;
  std::uint32_t f_a = 1;
  ChannelParams channels;
  Seq k_e = 10;
  std::function<bool(ClientId)> authorized;                    // all clients when empty
  checkpoint::CheckpointComponent::RemoteGroups peer_groups;   // groups able to serve checkpoints
};

class ExecutionReplica : public Node {
 public:
  ExecutionReplica(ExecutionConfig cfg, Runtime& rt);

  // Starts the commit loop.
  void start();
  void close();

  Seq s_n() const { return s_n_; }
  GroupId group() const { return cfg_.group.id; }
  const app::KvApplication& app() const { return app_; }
  ExecutionState state() const;
  Digest state_digest() const override { return execution_digest(s_n_, state()); }

  // Test hook: a broken replica that forgets to filter duplicates.
  void break_duplicate_filter() { filter_duplicates_ = false; }

 protected:
  void on_message(const Envelope& env) override;

 private:
  void step();
  void on_commit(Seq want, const irmc::ReceiveResult& r);
  void execute(const Execute& e);
  void on_write(NodeId from, const SignedWrite& sw);
  void on_weak_read(NodeId from, const ReadWeak& rw);
  void on_stable(Seq s, const Bytes& state);
  void reply(ClientId c, const ReplyEntry& u);
  bool authorized(ClientId c) const { return !cfg_.authorized || cfg_.authorized(c); }

  ExecutionConfig cfg_;
  std::unique_ptr<irmc::SenderEndpoint> request_tx_;
  std::unique_ptr<irmc::ReceiverEndpoint> commit_rx_;
  checkpoint::CheckpointComponent cp_;
  bool started_ = false;
  bool closed_ = false;
  bool fetching_ = false;
  bool filter_duplicates_ = true;

  Seq s_n_ = 0;
  app::KvApplication app_;
  std::map<ClientId, ReplyEntry> u_;
  std::map<ClientId, Counter> forwarded_;
};

}  // namespace georep::replica
