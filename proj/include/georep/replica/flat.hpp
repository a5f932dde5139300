#pragma once

#include <memory>

#include "georep/app/kv.hpp"
#include "georep/checkpoint/checkpoint.hpp"
#include "georep/ordering/ordering.hpp"
#include "georep/replica/state.hpp"

namespace georep::replica {

// Baseline: one BFT group spread over regions that orders and executes, with
// clients talking to it directly.
struct FlatConfig {
  std::vector<NodeId> members;
  std::uint32_t f = 1;
  Seq k = 10;  // checkpoint interval
  ordering::OrderingConfig ordering_params;  // members, f and group are filled in
  std::function<bool(ClientId)> authorized;
};

class FlatReplica : public Node {
 public:
  FlatReplica(FlatConfig cfg, Runtime& rt);

  void close();

  Seq s_n() const { return s_n_; }
  const app::KvApplication& app() const { return app_; }
  ExecutionState state() const { return ExecutionState{u_, app_.snapshot()}; }
  Digest state_digest() const override { return execution_digest(s_n_, state()); }
  const ordering::Ordering& ordering() const { return *ord_; }

 protected:
  void on_message(const Envelope& env) override;

 private:
  void on_write(NodeId from, const SignedWrite& sw);
  void on_deliver(Seq s, const Request& item, ordering::Ordering::Release release);
  void on_stable(Seq s, const Bytes& state);
  void reply(ClientId c, const ReplyEntry& u);
  bool authorized(ClientId c) const { return !cfg_.authorized || cfg_.authorized(c); }

  FlatConfig cfg_;
  std::unique_ptr<ordering::Ordering> ord_;
  checkpoint::CheckpointComponent cp_;
  bool closed_ = false;
  Seq s_n_ = 0;
  app::KvApplication app_;
  std::map<ClientId, ReplyEntry> u_;
};

}  // namespace georep::replica
