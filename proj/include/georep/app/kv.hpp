#pragma once

#include <map>
#include <optional>
#include <string>

#include "georep/core/types.hpp"

namespace georep::app {

enum class KvCode : std::uint8_t { Put = 0, Get = 1, Append = 2 };
constexpr std::uint8_t enum_count(KvCode) { return 3; }

struct KvOp {
  KvCode code = KvCode::Get;
  std::string key;
  std::string value;
  auto tie() { return std::tie(code, key, value); }
  auto tie() const { return std::tie(code, key, value); }
  friend bool operator==(const KvOp&, const KvOp&) = default;
};

Bytes put_op(const std::string& key, const std::string& value);
Bytes get_op(const std::string& key);
Bytes append_op(const std::string& key, const std::string& suffix);
std::optional<KvOp> parse_op(const Bytes& op);
// key=...;code=... for traces
std::string describe_op(const Bytes& op);

inline const std::string kAbsent = "<absent>";
inline const std::string kBadOp = "<bad-op>";
inline const std::string kStored = "ok";

// Deterministic key-value store. Replies are plain strings.
class KvApplication {
 public:
  Bytes execute(const Bytes& op);
  // Read-only evaluation; writes are refused.
  Bytes read(const Bytes& op) const;

  Bytes snapshot() const;
  void restore(const Bytes& snapshot);  // throws DecodeError on malformed input

  const std::map<std::string, std::string>& data() const { return data_; }

 private:
  std::map<std::string, std::string> data_;
};

}  // namespace georep::app
