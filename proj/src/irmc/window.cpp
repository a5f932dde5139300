#include "georep/irmc/window.hpp"

#include <algorithm>
#include <functional>

namespace georep::irmc {

std::optional<Position> kth_largest(std::vector<Position> values, std::size_t k) {
  if (k == 0 || values.size() < k) return std::nullopt;
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(k - 1), values.end(),
                   std::greater<>());
  return values[k - 1];
}

namespace {
Position follow(const std::map<NodeId, Position>& requested, std::uint32_t f, Position current) {
  std::vector<Position> v;
  v.reserve(requested.size());
  for (const auto& [node, p] : requested) v.push_back(p);
  auto k = kth_largest(std::move(v), f + 1);
  return k ? std::max(current, *k) : current;
}
}  // namespace

Position sender_window_after_moves(const std::map<NodeId, Position>& requested, std::uint32_t f_r,
                                   Position current) {
  return follow(requested, f_r, current);
}

Position receiver_window_after_sender_moves(const std::map<NodeId, Position>& requested, std::uint32_t f_s,
                                            Position current) {
  return follow(requested, f_s, current);
}

SendClass classify_send(Position p, const Window& w) {
  if (p > w.end()) return SendClass::Blocked;
  if (p < w.start) return SendClass::Drop;
  return SendClass::Transmit;
}

ReceiveClass classify_receive(Position p, const Window& w) {
  if (p < w.start) return TooOld{w.start};
  return Wait{};
}

}  // namespace georep::irmc
