#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "georep/core/messages.hpp"
#include "georep/irmc/window.hpp"
#include "georep/sim/runtime.hpp"

namespace georep::irmc {

enum class Variant : std::uint8_t { Rc = 0, Sc = 1 };
const char* variant_name(Variant v);

struct ChannelConfig {
  ChannelId id;
  std::vector<NodeId> senders;
  std::vector<NodeId> receivers;
  std::uint32_t f_s = 0;
  std::uint32_t f_r = 0;
  std::uint64_t capacity = 1;
  SimTime progress_period = ms(50);
  SimTime collector_timeout = ms(200);
  SimTime retransmit_period = 0;  // 0 disables retransmission (reliable links)
};

std::vector<std::string> validate(const ChannelConfig& cfg);

class SenderEndpoint {
 public:
  using Done = std::function<void()>;
  virtual ~SenderEndpoint() = default;

  // Completes (done) once p is inside the window and transmitted, or at once if p is obsolete.
  virtual void send(Subchannel sc, Position p, Bytes m, Done done) = 0;
  virtual void move_window(Subchannel sc, Position p) = 0;
  virtual void move_windows(const std::vector<MoveEntry>& moves) = 0;
  virtual Window window(Subchannel sc) const = 0;
  virtual void handle(const Envelope& env) = 0;
  virtual void close() = 0;
  virtual const ChannelConfig& config() const = 0;
};

class ReceiverEndpoint {
 public:
  using Callback = std::function<void(ReceiveResult)>;
  virtual ~ReceiverEndpoint() = default;

  // At most one pending receive per subchannel; a new call replaces the old one.
  virtual void receive(Subchannel sc, Position p, Callback cb) = 0;
  virtual void move_window(Subchannel sc, Position p) = 0;
  virtual void move_windows(const std::vector<MoveEntry>& moves) = 0;
  virtual Window window(Subchannel sc) const = 0;
  virtual void handle(const Envelope& env) = 0;
  virtual void close() = 0;
  virtual const ChannelConfig& config() const = 0;

  // Restrict which subchannels exist; unknown ones are ignored.
  virtual void set_admission(std::function<bool(Subchannel)> admit) = 0;
  // Called once when traffic for a new admitted subchannel first arrives.
  virtual void set_subchannel_listener(std::function<void(Subchannel)> fn) = 0;
};

std::unique_ptr<SenderEndpoint> make_sender(Variant v, ChannelConfig cfg, Runtime& rt);
std::unique_ptr<ReceiverEndpoint> make_receiver(Variant v, ChannelConfig cfg, Runtime& rt);

}  // namespace georep::irmc
