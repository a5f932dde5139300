#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <vector>

#include "georep/core/crypto.hpp"
#include "georep/core/messages.hpp"
#include "georep/sim/network.hpp"
#include "georep/sim/simulator.hpp"
#include "georep/sim/trace.hpp"

namespace georep {

enum class AuthKind { Signature, Mac };

// Rewrites outgoing traffic of a faulty principal. Returning nullopt passes the
// message through unchanged; otherwise the returned (destination, message)
// pairs are sent instead, authenticated with the principal's own key.
using Interceptor = std::function<std::optional<std::vector<std::pair<NodeId, Message>>>(NodeId to, const Message&)>;

std::shared_ptr<const Packet> seal(const Signer& signer, Message msg, AuthKind kind,
                                   const std::vector<NodeId>& receivers);

class Outbox {
 public:
  Outbox(Signer signer, Network& net) : signer_(std::move(signer)), net_(net) {}

  NodeId self() const { return signer_.id(); }
  const Signer& signer() const { return signer_; }

  void send(NodeId to, const Message& m, AuthKind kind = AuthKind::Mac);
  void multicast(const std::vector<NodeId>& to, const Message& m, AuthKind kind = AuthKind::Mac);
  // Resend an already sealed packet (e.g. a stored signed Send).
  void post(NodeId to, const std::shared_ptr<const Packet>& packet);

  void set_interceptor(Interceptor i) { interceptor_ = std::move(i); }

 private:
  bool intercepted(NodeId to, const Message& m, AuthKind kind);

  Signer signer_;
  Network& net_;
  Interceptor interceptor_;
};

// Services a node and its components use: clock, timers that die with the
// node, authenticated sending, crypto verification and tracing.
class Runtime {
 public:
  Runtime(Simulator& sim, Network& net, const CryptoProvider& crypto, TraceLog& trace, NodeId self)
      : sim_(sim), net_(net), crypto_(crypto), trace_(trace), out_(crypto.signer_for(self), net) {}

  NodeId self() const { return out_.self(); }
  SimTime now() const { return sim_.now(); }
  Simulator& sim() { return sim_; }
  Network& net() { return net_; }
  const CryptoProvider& crypto() const { return crypto_; }
  TraceLog& trace() { return trace_; }
  Outbox& out() { return out_; }
  bool crashed() const { return net_.crashed(self()); }

  Timer after(SimTime delay, std::function<void()> fn);
  void defer(std::function<void()> fn) { after(0, std::move(fn)); }

  void log(std::string event, std::string kind, std::string detail, std::string digest = "-") {
    trace_.add(now(), std::move(event), self(), std::move(kind), std::move(detail), std::move(digest));
  }

 private:
  Simulator& sim_;
  Network& net_;
  const CryptoProvider& crypto_;
  TraceLog& trace_;
  Outbox out_;
};

// Base for every principal. Messages reach on_message only after the
// authenticator was checked against the claimed sender.
class Node {
 public:
  explicit Node(Runtime& rt) : rt_(rt) {}
  virtual ~Node() = default;
  Node(const Node&) = delete;
  Node& operator=(const Node&) = delete;

  NodeId id() const { return rt_.self(); }
  Runtime& runtime() { return rt_; }

  void receive(const Envelope& env);
  bool authentic(const Envelope& env) const;

  // Digest of all protocol state; used to show rejected input changes nothing.
  virtual Digest state_digest() const { return {}; }

 protected:
  virtual void on_message(const Envelope& env) = 0;

  Runtime& rt_;
};

}  // namespace georep
