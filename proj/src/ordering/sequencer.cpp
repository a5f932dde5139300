#include <set>

#include "delivery.hpp"
#include "georep/core/crypto.hpp"

namespace georep::ordering {

namespace {

// The first member numbers requests as they arrive. No fault tolerance.
class Sequencer final : public Ordering {
 public:
  Sequencer(OrderingConfig cfg, Runtime& rt, DeliverFn deliver)
      : cfg_(std::move(cfg)), rt_(rt), queue_(std::move(deliver)) {
    if (cfg_.members.empty()) throw ConfigError("sequencer needs a member");
    for (NodeId n : cfg_.members) {
      if (n != rt_.self()) others_.push_back(n);
    }
    queue_.on_deliver = [this](Seq s, const Request& item) { log_delivery(rt_, s, item); };
  }

  void order(const Request& r) override {
    if (closed_ || leader() != rt_.self() || r.kind() == RequestKind::Noop) return;
    if (!acceptable_item(rt_.crypto(), r) || !assigned_.insert({r.client(), r.counter()}).second) return;
    const Assign a{next_seq_++, r};
    rt_.out().multicast(others_, a);
    queue_.offer(a.s, a.item);
  }

  void gc(Seq s_min, std::vector<SignedCheckpoint>) override {
    if (closed_) return;
    next_seq_ = std::max(next_seq_, s_min);
    queue_.gc(s_min);
  }

  void retire(const std::function<bool(const Request&)>&) override {}

  bool handle(const Envelope& env) override {
    const auto* a = std::get_if<Assign>(&env.msg());
    if (!a) return false;
    if (!closed_ && env.from == leader() && acceptable_item(rt_.crypto(), a->item)) queue_.offer(a->s, a->item);
    return true;
  }

  void close() override { closed_ = true; }

  View view() const override { return 0; }
  NodeId leader() const override { return cfg_.members.front(); }
  Seq next_delivery() const override { return queue_.next(); }

 private:
  OrderingConfig cfg_;
  Runtime& rt_;
  DeliveryQueue queue_;
  std::vector<NodeId> others_;
  bool closed_ = false;
  std::set<std::pair<ClientId, Counter>> assigned_;
  Seq next_seq_ = 1;
};

}  // namespace

std::unique_ptr<Ordering> make_sequencer(OrderingConfig cfg, Runtime& rt, Ordering::DeliverFn deliver) {
  return std::make_unique<Sequencer>(std::move(cfg), rt, std::move(deliver));
}

}  // namespace georep::ordering
