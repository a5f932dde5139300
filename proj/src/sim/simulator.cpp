#include "georep/sim/simulator.hpp"

#include <stdexcept>

namespace georep {

void Simulator::schedule_at(SimTime t, NodeId origin, std::function<void()> fn, std::uint32_t hops) {
  if (t < now_) t = now_;
  const std::uint64_t seq = origin_seq_[origin.value]++;
  queue_.push(Event{t, origin.value, seq, hops, std::move(fn)});
}

Timer Simulator::start_timer(SimTime delay, NodeId origin, std::function<void()> fn) {
  Timer timer;
  timer.alive_ = std::make_shared<bool>(true);
  schedule_after(delay, origin, [alive = timer.alive_, fn = std::move(fn)] {
    if (!*alive) return;
    *alive = false;
    fn();
  });
  return timer;
}

bool Simulator::step() {
  if (queue_.empty()) return false;
  Event ev = std::move(const_cast<Event&>(queue_.top()));
  queue_.pop();
  now_ = ev.time;
  hops_ = ev.hops;
  ++events_;
  ev.fn();
  hops_ = 0;
  return true;
}

void Simulator::run_until(SimTime t) {
  while (!queue_.empty() && queue_.top().time <= t) step();
  if (now_ < t) now_ = t;
}

void Simulator::run_while(const std::function<bool()>& cond, SimTime limit) {
  while (cond() && !queue_.empty() && queue_.top().time <= limit) step();
}

}  // namespace georep
