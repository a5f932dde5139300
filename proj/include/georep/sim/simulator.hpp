#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <queue>
#include <random>
#include <vector>

#include "georep/core/types.hpp"

namespace georep {

// Simulated time in microseconds.
using SimTime = std::int64_t;

constexpr SimTime ms(double v) { return static_cast<SimTime>(v * 1000.0); }
constexpr double to_ms(SimTime t) { return static_cast<double>(t) / 1000.0; }

class Timer {
 public:
  Timer() = default;
  void cancel() {
    if (alive_) *alive_ = false;
    alive_.reset();
  }
  bool pending() const { return alive_ && *alive_; }

 private:
  friend class Simulator;
  std::shared_ptr<bool> alive_;
};

// Discrete event loop. Events at equal times run in (origin node, per-origin
// sequence) order, so a run is a pure function of its inputs and seed.
class Simulator {
 public:
  explicit Simulator(std::uint64_t seed) : rng_(seed) {}

  SimTime now() const { return now_; }

  void schedule_at(SimTime t, NodeId origin, std::function<void()> fn, std::uint32_t hops = 0);
  void schedule_after(SimTime delay, NodeId origin, std::function<void()> fn) {
    schedule_at(now_ + delay, origin, std::move(fn), hops_);
  }
  Timer start_timer(SimTime delay, NodeId origin, std::function<void()> fn);

  bool step();
  void run_until(SimTime t);
  void run_while(const std::function<bool()>& cond, SimTime limit);

  // WAN hops accumulated along the causal chain of the running event.
  std::uint32_t causal_hops() const { return hops_; }

  std::mt19937_64& rng() { return rng_; }
  std::uint64_t events_run() const { return events_; }
  std::size_t pending_events() const { return queue_.size(); }

 private:
  struct Event {
    SimTime time;
    std::uint32_t origin;
    std::uint64_t seq;
    std::uint32_t hops;
    std::function<void()> fn;
  };
  struct Later {
    bool operator()(const Event& a, const Event& b) const {
      if (a.time != b.time) return a.time > b.time;
      if (a.origin != b.origin) return a.origin > b.origin;
      return a.seq > b.seq;
    }
  };

  SimTime now_ = 0;
  std::uint32_t hops_ = 0;
  std::uint64_t events_ = 0;
  std::priority_queue<Event, std::vector<Event>, Later> queue_;
  std::map<std::uint32_t, std::uint64_t> origin_seq_;
  std::mt19937_64 rng_;
};

}  // namespace georep
