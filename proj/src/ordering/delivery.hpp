#pragma once

#include <map>

#include "georep/ordering/ordering.hpp"

namespace georep::ordering {

void log_delivery(Runtime& rt, Seq s, const Request& item);

// Hands committed items to the owner in sequence order, one at a time.
class DeliveryQueue {
 public:
  explicit DeliveryQueue(Ordering::DeliverFn deliver) : deliver_(std::move(deliver)) {}

  void offer(Seq s, Request item) {
    if (s < next_) return;
    ready_.emplace(s, std::move(item));
    pump();
  }

  // Abandons an outstanding delivery below s_min; its release becomes a no-op.
  void gc(Seq s_min) {
    if (s_min <= next_) return;
    next_ = s_min;
    busy_ = false;
    ++generation_;
    ready_.erase(ready_.begin(), ready_.lower_bound(s_min));
    pump();
  }

  Seq next() const { return next_; }
  bool busy() const { return busy_; }
  bool has(Seq s) const { return ready_.count(s) != 0; }

  // Called on every delivery before the owner sees it.
  std::function<void(Seq, const Request&)> on_deliver;
  // Called when the owner releases a delivery.
  std::function<void()> on_release;

 private:
  void pump() {
    if (pumping_) return;
    pumping_ = true;
    while (!busy_) {
      auto it = ready_.find(next_);
      if (it == ready_.end()) break;
      Request item = std::move(it->second);
      ready_.erase(it);
      busy_ = true;
      const Seq s = next_;
      const std::uint64_t gen = generation_;
      if (on_deliver) on_deliver(s, item);
      deliver_(s, item, [this, s, gen] { release(s, gen); });
    }
    pumping_ = false;
  }

  void release(Seq s, std::uint64_t gen) {
    if (gen != generation_ || !busy_ || s != next_) return;
    busy_ = false;
    ++next_;
    if (on_release) on_release();
    pump();
  }

  Ordering::DeliverFn deliver_;
  std::map<Seq, Request> ready_;
  Seq next_ = 1;
  bool busy_ = false;
  bool pumping_ = false;
  std::uint64_t generation_ = 0;
};

}  // namespace georep::ordering
