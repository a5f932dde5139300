#include "georep/core/types.hpp"

#include <algorithm>

namespace georep {

namespace {
constexpr char kHex[] = "0123456789abcdef";

std::string hex_of(const std::uint8_t* p, std::size_t n) {
  std::string out;
  out.reserve(2 * n);
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back(kHex[p[i] >> 4]);
    out.push_back(kHex[p[i] & 0xf]);
  }
  return out;
}
}  // namespace

std::string Digest::hex() const { return hex_of(bytes.data(), bytes.size()); }

std::string Digest::short_hex() const { return hex_of(bytes.data(), 8); }

bool Digest::is_zero() const {
  return std::all_of(bytes.begin(), bytes.end(), [](std::uint8_t b) { return b == 0; });
}

Bytes to_bytes(std::string_view s) { return Bytes(s.begin(), s.end()); }

std::string to_string(const Bytes& b) { return std::string(b.begin(), b.end()); }

std::string to_hex(const Bytes& b) { return hex_of(b.data(), b.size()); }

Bytes from_hex(std::string_view s) {
  auto nibble = [](char c) -> int {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    throw std::invalid_argument("not a hex digit");
  };
  if (s.size() % 2 != 0) throw std::invalid_argument("odd hex length");
  Bytes out;
  out.reserve(s.size() / 2);
  for (std::size_t i = 0; i < s.size(); i += 2) out.push_back(static_cast<std::uint8_t>(nibble(s[i]) * 16 + nibble(s[i + 1])));
  return out;
}

}  // namespace georep
