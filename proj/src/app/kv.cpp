#include "georep/app/kv.hpp"

#include "georep/core/codec.hpp"

namespace georep::app {

Bytes put_op(const std::string& key, const std::string& value) { return encode(KvOp{KvCode::Put, key, value}); }
Bytes get_op(const std::string& key) { return encode(KvOp{KvCode::Get, key, {}}); }
Bytes append_op(const std::string& key, const std::string& suffix) { return encode(KvOp{KvCode::Append, key, suffix}); }

std::optional<KvOp> parse_op(const Bytes& op) {
  try {
    return decode<KvOp>(op);
  } catch (const DecodeError&) {
    return std::nullopt;
  }
}

std::string describe_op(const Bytes& op) {
  auto parsed = parse_op(op);
  if (!parsed) return "bad";
  if (parsed->code == KvCode::Put) return "put " + parsed->key + "=" + parsed->value;
  if (parsed->code == KvCode::Append) return "append " + parsed->key + "+=" + parsed->value;
  return "get " + parsed->key;
}

Bytes KvApplication::execute(const Bytes& op) {
  auto parsed = parse_op(op);
  if (!parsed) return to_bytes(kBadOp);
  if (parsed->code == KvCode::Put) {
    data_[parsed->key] = parsed->value;
    return to_bytes(kStored);
  }
  if (parsed->code == KvCode::Append) {
    data_[parsed->key] += parsed->value;
    return to_bytes(kStored);
  }
  return read(op);
}

Bytes KvApplication::read(const Bytes& op) const {
  auto parsed = parse_op(op);
  if (!parsed || parsed->code != KvCode::Get) return to_bytes(kBadOp);
  auto it = data_.find(parsed->key);
  return to_bytes(it == data_.end() ? kAbsent : it->second);
}

Bytes KvApplication::snapshot() const { return encode(data_); }

void KvApplication::restore(const Bytes& snapshot) { data_ = decode<std::map<std::string, std::string>>(snapshot); }

}  // namespace georep::app
