#pragma once

#include "georep/harness/scenario.hpp"
#include "georep/sim/runtime.hpp"

namespace georep::harness {

// Outgoing-traffic rewriting for a Byzantine principal, active from `from` on.
// The rewritten messages are still authenticated with the principal's own key.
Interceptor make_interceptor(Behavior b, const Simulator& sim, SimTime from);

// Sends a different signed request for the same counter to each half of a group.
class EquivocatingClient : public Node {
 public:
  EquivocatingClient(Runtime& rt, GroupEntry group, SimTime period, SimTime stop);
  void start(SimTime at);
  Counter counter() const { return t_; }

 protected:
  void on_message(const Envelope&) override {}

 private:
  void tick();

  GroupEntry group_;
  SimTime period_;
  SimTime stop_;
  Counter t_ = 0;
  Timer timer_;
};

}  // namespace georep::harness
