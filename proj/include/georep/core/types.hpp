#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace georep {

using Bytes = std::vector<std::uint8_t>;
using Seq = std::uint64_t;
using Position = std::uint64_t;
using Counter = std::uint64_t;
using Subchannel = std::uint64_t;
using View = std::uint64_t;

template <class Tag>
struct Id {
  std::uint32_t value = 0;

  constexpr Id() = default;
  constexpr explicit Id(std::uint32_t v) : value(v) {}

  friend constexpr auto operator<=>(Id, Id) = default;
};

struct NodeTag {};
struct GroupTag {};

using NodeId = Id<NodeTag>;
using GroupId = Id<GroupTag>;
// Clients are principals like any replica; their node id doubles as client id.
using ClientId = NodeId;

inline constexpr GroupId kAgreementGroup{0};

struct Digest {
  std::array<std::uint8_t, 32> bytes{};

  friend auto operator<=>(const Digest&, const Digest&) = default;

  std::string hex() const;
  std::string short_hex() const;  // first 8 bytes
  bool is_zero() const;
};

enum class Role : std::uint8_t { Agreement = 0, Execution = 1, Client = 2, Flat = 3 };
constexpr std::uint8_t enum_count(Role) { return 4; }

struct ReplicaId {
  GroupId group;
  std::uint32_t index = 0;
  Role role = Role::Agreement;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

Bytes to_bytes(std::string_view s);
std::string to_string(const Bytes& b);
std::string to_hex(const Bytes& b);
Bytes from_hex(std::string_view s);  // throws std::invalid_argument

}  // namespace georep

template <class Tag>
struct std::hash<georep::Id<Tag>> {
  std::size_t operator()(georep::Id<Tag> id) const noexcept { return id.value; }
};
