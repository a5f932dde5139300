#include "georep/sim/runtime.hpp"

namespace georep {

std::shared_ptr<const Packet> seal(const Signer& signer, Message msg, AuthKind kind,
                                   const std::vector<NodeId>& receivers) {
  auto p = std::make_shared<Packet>();
  p->wire = encode(msg);
  p->msg = std::move(msg);
  if (kind == AuthKind::Signature) {
    p->auth = signer.sign(p->wire);
  } else {
    p->auth = signer.mac(receivers, p->wire);
  }
  return p;
}

bool Outbox::intercepted(NodeId to, const Message& m, AuthKind kind) {
  if (!interceptor_) return false;
  auto replaced = interceptor_(to, m);
  if (!replaced) return false;
  for (auto& [dest, msg] : *replaced) {
    net_.send(self(), dest, seal(signer_, std::move(msg), kind, {dest}));
  }
  return true;
}

void Outbox::send(NodeId to, const Message& m, AuthKind kind) {
  if (intercepted(to, m, kind)) return;
  net_.send(self(), to, seal(signer_, m, kind, {to}));
}

void Outbox::multicast(const std::vector<NodeId>& to, const Message& m, AuthKind kind) {
  std::vector<NodeId> plain;
  for (NodeId r : to) {
    if (!intercepted(r, m, kind)) plain.push_back(r);
  }
  if (plain.empty()) return;
  auto packet = seal(signer_, m, kind, plain);
  for (NodeId r : plain) net_.send(self(), r, packet);
}

void Outbox::post(NodeId to, const std::shared_ptr<const Packet>& packet) {
  const AuthKind kind = std::holds_alternative<Signature>(packet->auth) ? AuthKind::Signature : AuthKind::Mac;
  if (intercepted(to, packet->msg, kind)) return;
  net_.send(self(), to, packet);
}

Timer Runtime::after(SimTime delay, std::function<void()> fn) {
  return sim_.start_timer(delay, self(), [this, fn = std::move(fn)] {
    if (!crashed()) fn();
  });
}

bool Node::authentic(const Envelope& env) const {
  if (env.to != id()) return false;
  if (signer_of(env.auth()) != env.from) return false;
  if (!rt_.crypto().verify(env.auth(), env.wire(), id())) return false;
  // the decoded view must be the authenticated bytes
  return encode(env.msg()) == env.wire();
}

void Node::receive(const Envelope& env) {
  if (!authentic(env)) {
    rt_.log("reject", std::string(kind_name(env.msg())), Detail().add("from", env.from.value).str());
    return;
  }
  on_message(env);
}

}  // namespace georep
