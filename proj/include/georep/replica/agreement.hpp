#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <set>

#include "georep/checkpoint/checkpoint.hpp"
#include "georep/irmc/endpoint.hpp"
#include "georep/ordering/ordering.hpp"
#include "georep/replica/channels.hpp"
#include "georep/replica/state.hpp"

namespace georep::replica {

enum class OrderingImpl { MiniBft, Sequencer };

struct AgreementConfig {
  std::vector<NodeId> members;
  std::uint32_t f_a = 1;
  std::vector<GroupEntry> groups;  // initial execution groups
  std::uint32_t f_e = 1;
  ChannelParams channels;
  Seq k_a = 10;
  Seq window = 20;                 // agreement window; at least k_a
  std::uint32_t z = 0;             // groups the agreement group may run ahead of
  ClientId admin;                  // may submit AddGroup / RemoveGroup
  std::function<bool(ClientId)> authorized;  // all clients when empty
  OrderingImpl ordering = OrderingImpl::MiniBft;
  ordering::OrderingConfig ordering_params;  // members, f and group are filled in
};

std::vector<std::string> validate(const AgreementConfig& cfg);

class AgreementReplica : public Node {
 public:
  AgreementReplica(AgreementConfig cfg, Runtime& rt);

  void close();

  Seq s_n() const { return s_n_; }
  const AgreementState& state() const { return st_; }
  Digest state_digest() const override { return agreement_digest(s_n_, st_); }
  const ordering::Ordering& ordering() const { return *ord_; }
  ordering::Ordering& ordering() { return *ord_; }
  std::pair<Seq, Seq> window() const { return {win_lo_, win_hi_}; }
  std::size_t groups() const { return links_.size(); }

 protected:
  void on_message(const Envelope& env) override;

 private:
  struct Link {
    std::unique_ptr<irmc::ReceiverEndpoint> requests;
    std::unique_ptr<irmc::SenderEndpoint> commits;
    std::map<ClientId, Position> cursor;  // next receive position per client
  };
  struct FanOut {
    std::size_t needed = 0;
    std::size_t done = 0;
    std::set<GroupId> pending;
    std::function<void()> complete;
  };
  struct Parked {
    Seq s;
    Request item;
    ordering::Ordering::Release release;
  };

  bool authorized(ClientId c) const { return !cfg_.authorized || cfg_.authorized(c); }
  void open_link(const GroupEntry& g, Seq joined);
  void close_link(GroupId g);
  void intake(GroupId g, ClientId c);
  void on_request(GroupId g, ClientId c, Position p, const irmc::ReceiveResult& r);
  void on_deliver(Seq s, const Request& item, ordering::Ordering::Release release);
  void process(Seq s, const Request& item, ordering::Ordering::Release release);
  ExecStatus apply_admin(const Request& item, std::vector<GroupEntry>& added, std::vector<GroupId>& removed);
  void fan_out(const HistEntry& e, std::function<void()> complete);
  void sent(Seq s, GroupId g);
  void on_stable(Seq s, const Bytes& state);
  void sync_links(const AgreementState& st);

  AgreementConfig cfg_;
  std::unique_ptr<ordering::Ordering> ord_;
  checkpoint::CheckpointComponent cp_;
  bool closed_ = false;

  Seq s_n_ = 0;
  AgreementState st_;
  Seq win_lo_ = 1;
  Seq win_hi_ = 0;
  std::optional<Parked> parked_;
  std::map<GroupId, Link> links_;
  std::map<Seq, FanOut> fan_outs_;
  std::vector<Link> retired_;  // closed links stay alive for callbacks already queued
};

}  // namespace georep::replica
