#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "georep/core/messages.hpp"
#include "georep/sim/runtime.hpp"

namespace georep::ordering {

struct OrderingConfig {
  std::vector<NodeId> members;  // index order; leader of view v is members[v mod n]
  std::uint32_t f = 0;
  GroupId group;                // checkpoint group whose certificates vouch for gc points
  std::size_t batch_cap = 16;
  std::size_t max_inflight = 64;  // proposals beyond the last delivery
  std::size_t pipeline = 4;       // uncommitted batches the leader keeps in flight
  SimTime view_timeout = ms(16);
};

std::vector<std::string> validate(const OrderingConfig& cfg);

// Agreement black box: order requests, deliver them gap-free one at a time.
class Ordering {
 public:
  using Release = std::function<void()>;
  // The next delivery waits until release is called.
  using DeliverFn = std::function<void(Seq, const Request&, Release)>;

  virtual ~Ordering() = default;

  virtual void order(const Request& r) = 0;
  // Nothing below s_min is delivered afterwards. proof certifies the checkpoint at s_min-1.
  virtual void gc(Seq s_min, std::vector<SignedCheckpoint> proof) = 0;
  // Stop waiting for requests the owner already has (e.g. after a checkpoint jump).
  virtual void retire(const std::function<bool(const Request&)>& covered) = 0;
  virtual bool handle(const Envelope& env) = 0;
  virtual void close() = 0;

  virtual View view() const = 0;
  virtual NodeId leader() const = 0;
  virtual Seq next_delivery() const = 0;
};

std::unique_ptr<Ordering> make_minibft(OrderingConfig cfg, Runtime& rt, Ordering::DeliverFn deliver);
// Single fixed assigner, no fault tolerance; a test oracle.
std::unique_ptr<Ordering> make_sequencer(OrderingConfig cfg, Runtime& rt, Ordering::DeliverFn deliver);

// A non-noop item must carry a valid client signature.
bool acceptable_item(const CryptoProvider& crypto, const Request& r);

}  // namespace georep::ordering
