#pragma once

#include <memory>
#include <vector>

#include "georep/irmc/endpoint.hpp"
#include "georep/sim/network.hpp"
#include "georep/sim/runtime.hpp"

namespace georep::fixtures {

struct EndpointHost : Node {
  using Node::Node;
  std::function<void(const Envelope&)> route;
  void on_message(const Envelope& env) override {
    if (route) route(env);
  }
};

// Senders in region S, receivers in region R, 40 ms apart.
struct ChannelWorld {
  ChannelWorld(irmc::Variant v, std::size_t n_s, std::size_t n_r, std::uint32_t f, std::uint64_t capacity,
               TraceLevel level = TraceLevel::Semantic)
      : trace(level), crypto(11), net(sim, topo, dir, trace) {
    topo.set_delay("S", "R", 40);
    cfg.id = ChannelId{ChannelKind::Test, GroupId{1}};
    cfg.f_s = f;
    cfg.f_r = f;
    cfg.capacity = capacity;
    std::uint32_t next = 1;
    for (std::size_t i = 0; i < n_s; ++i) cfg.senders.push_back(NodeId{next++});
    for (std::size_t i = 0; i < n_r; ++i) cfg.receivers.push_back(NodeId{next++});
    for (std::size_t i = 0; i < n_s; ++i) {
      dir.add(NodeInfo{cfg.senders[i], Role::Agreement, GroupId{0}, static_cast<std::uint32_t>(i), {"S", 0}});
      host(cfg.senders[i]);
    }
    for (std::size_t i = 0; i < n_r; ++i) {
      dir.add(NodeInfo{cfg.receivers[i], Role::Execution, GroupId{1}, static_cast<std::uint32_t>(i), {"R", 0}});
      host(cfg.receivers[i]);
    }
    for (std::size_t i = 0; i < n_s; ++i) {
      senders.push_back(irmc::make_sender(v, cfg, *rts[i]));
      hosts[i]->route = [e = senders.back().get()](const Envelope& env) { e->handle(env); };
    }
    for (std::size_t i = 0; i < n_r; ++i) {
      receivers.push_back(irmc::make_receiver(v, cfg, *rts[n_s + i]));
      hosts[n_s + i]->route = [e = receivers.back().get()](const Envelope& env) { e->handle(env); };
    }
  }

  void host(NodeId id) {
    crypto.register_principal(id);
    rts.push_back(std::make_unique<Runtime>(sim, net, crypto, trace, id));
    hosts.push_back(std::make_unique<EndpointHost>(*rts.back()));
    net.attach(id, [h = hosts.back().get()](const Envelope& e) { h->receive(e); });
  }

  Runtime& sender_rt(std::size_t i) { return *rts[i]; }
  Runtime& receiver_rt(std::size_t i) { return *rts[senders.size() + i]; }

  // Raw signed message from a principal, bypassing its endpoint.
  void inject(NodeId from, NodeId to, Message m) {
    net.send(from, to, seal(crypto.signer_for(from), std::move(m), AuthKind::Signature, {to}));
  }

  void run(double until_ms) { sim.run_until(ms(until_ms)); }

  Simulator sim{7};
  Topology topo;
  Directory dir;
  TraceLog trace;
  CryptoProvider crypto;
  Network net;
  irmc::ChannelConfig cfg;
  std::vector<std::unique_ptr<Runtime>> rts;
  std::vector<std::unique_ptr<EndpointHost>> hosts;
  std::vector<std::unique_ptr<irmc::SenderEndpoint>> senders;
  std::vector<std::unique_ptr<irmc::ReceiverEndpoint>> receivers;
};

// Records the outcome of one receive call.
struct Outcome {
  std::optional<irmc::ReceiveResult> result;
  auto callback() {
    return [this](irmc::ReceiveResult r) { result = std::move(r); };
  }
  bool delivered(const Bytes& m) const {
    return result && std::holds_alternative<Bytes>(*result) && std::get<Bytes>(*result) == m;
  }
  std::optional<Position> too_old() const {
    if (result && std::holds_alternative<irmc::TooOld>(*result)) return std::get<irmc::TooOld>(*result).start;
    return std::nullopt;
  }
};

}  // namespace georep::fixtures
