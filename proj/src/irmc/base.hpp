#pragma once

#include <map>
#include <optional>
#include <set>

#include "georep/irmc/endpoint.hpp"

namespace georep::irmc {

bool is_member(const std::vector<NodeId>& group, NodeId n);
std::size_t index_of(const std::vector<NodeId>& group, NodeId n);

// Window bookkeeping shared by the sender endpoints of both variants.
class SenderBase : public SenderEndpoint {
 public:
  SenderBase(ChannelConfig cfg, Runtime& rt);

  void send(Subchannel sc, Position p, Bytes m, Done done) override;
  void move_window(Subchannel sc, Position p) override { move_windows({MoveEntry{sc, p}}); }
  void move_windows(const std::vector<MoveEntry>& moves) override;
  Window window(Subchannel sc) const override;
  void handle(const Envelope& env) override;
  void close() override;
  const ChannelConfig& config() const override { return cfg_; }

 protected:
  struct Blocked {
    Bytes m;
    Done done;
  };
  struct Sub {
    Position start = 1;
    Position own_move = 1;
    std::map<NodeId, Position> receiver_moves;
    std::multimap<Position, Blocked> blocked;
    std::map<NodeId, std::set<Position>> sent;  // positions already shipped per receiver
  };

  Sub& sub(Subchannel sc) { return subs_[sc]; }
  Position receiver_start(const Sub& s, NodeId r) const;
  // Positions a receiver currently accepts from this sender: [receiver_start, gate).
  Position gate(const Sub& s, NodeId r) const;
  void advance(Subchannel sc, Position w);
  void start_retransmit();

  // Transmit p (inside the window) according to the variant.
  virtual void transmit(Subchannel sc, Position p, Bytes m) = 0;
  // Window start moved; drop state below it.
  virtual void collect_garbage(Subchannel sc, Sub& s) = 0;
  // Ship anything receiver r may now accept on subchannel sc (all if nullopt).
  virtual void flush(NodeId r, std::optional<Subchannel> sc) = 0;
  virtual void on_collector_choice(NodeId, NodeId) {}
  virtual void handle_variant(const Envelope&) {}
  virtual void retransmit() {}

  ChannelConfig cfg_;
  Runtime& rt_;
  bool closed_ = false;
  Counter move_counter_ = 0;
  std::map<NodeId, Counter> receiver_counter_;
  std::map<Subchannel, Sub> subs_;
  Timer retransmit_timer_;
};

// Window bookkeeping shared by the receiver endpoints of both variants.
class ReceiverBase : public ReceiverEndpoint {
 public:
  ReceiverBase(ChannelConfig cfg, Runtime& rt);

  void receive(Subchannel sc, Position p, Callback cb) override;
  void move_window(Subchannel sc, Position p) override { move_windows({MoveEntry{sc, p}}); }
  void move_windows(const std::vector<MoveEntry>& moves) override;
  Window window(Subchannel sc) const override;
  void handle(const Envelope& env) override;
  void close() override;
  const ChannelConfig& config() const override { return cfg_; }
  void set_admission(std::function<bool(Subchannel)> admit) override { admit_ = std::move(admit); }
  void set_subchannel_listener(std::function<void(Subchannel)> fn) override { listener_ = std::move(fn); }

 protected:
  struct Pending {
    Position p;
    Callback cb;
  };
  struct Sub {
    Position start = 1;
    std::map<NodeId, Position> sender_moves;
    std::optional<Pending> pending;
  };

  bool admitted(Subchannel sc);
  Sub& sub(Subchannel sc) { return subs_[sc]; }
  bool acceptable(Subchannel sc, NodeId sender, Position p);
  void evaluate(Subchannel sc);
  void announce(const std::vector<MoveEntry>& moves);
  void start_retransmit();

  virtual std::optional<Bytes> deliverable(Subchannel sc, Position p) = 0;
  virtual void collect_garbage(Subchannel sc, Position start) = 0;
  virtual void handle_variant(const Envelope&) {}
  virtual std::optional<NodeId> collector_for_move() const { return std::nullopt; }
  virtual void on_closed() {}

  ChannelConfig cfg_;
  Runtime& rt_;
  bool closed_ = false;
  Counter move_counter_ = 0;
  std::map<NodeId, Counter> sender_counter_;
  std::map<Subchannel, Sub> subs_;
  std::set<Subchannel> known_;
  std::function<bool(Subchannel)> admit_;
  std::function<void(Subchannel)> listener_;
  std::map<Subchannel, Position> announced_;
  Timer retransmit_timer_;
};

}  // namespace georep::irmc
