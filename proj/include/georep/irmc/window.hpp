#pragma once

#include <map>
#include <optional>
#include <variant>
#include <vector>

#include "georep/core/types.hpp"

namespace georep::irmc {

struct Window {
  Position start = 1;
  std::uint64_t capacity = 1;

  Position end() const { return start + capacity - 1; }
  bool contains(Position p) const { return p >= start && p <= end(); }
  friend bool operator==(const Window&, const Window&) = default;
};

// k-th largest value (k >= 1), if there are at least k values.
std::optional<Position> kth_largest(std::vector<Position> values, std::size_t k);

// Sender side: the window follows the (f_r+1)-highest receiver request.
Position sender_window_after_moves(const std::map<NodeId, Position>& requested, std::uint32_t f_r,
                                   Position current);

// Receiver side: the window follows exactly the (f_s+1)-largest sender request.
Position receiver_window_after_sender_moves(const std::map<NodeId, Position>& requested, std::uint32_t f_s,
                                            Position current);

enum class SendClass { Blocked, Drop, Transmit };
SendClass classify_send(Position p, const Window& w);

struct TooOld {
  Position start = 0;
  friend bool operator==(const TooOld&, const TooOld&) = default;
};
struct Wait {
  friend bool operator==(const Wait&, const Wait&) = default;
};
using ReceiveClass = std::variant<TooOld, Wait>;
ReceiveClass classify_receive(Position p, const Window& w);

// Outcome handed to a pending receive.
using ReceiveResult = std::variant<Bytes, TooOld>;

}  // namespace georep::irmc
