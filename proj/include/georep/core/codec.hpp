#pragma once

// Canonical binary encoding. Integers are fixed-width little endian, byte
// strings and sequences carry a u32 length prefix, variants a u8 tag and
// optionals a u8 presence flag. Structs expose their fields through tie().

#include <concepts>
#include <cstring>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <tuple>
#include <type_traits>
#include <utility>
#include <variant>
#include <vector>

#include "georep/core/types.hpp"

namespace georep {

class DecodeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class Writer {
 public:
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u32(std::uint32_t v) { put_le(v, 4); }
  void u64(std::uint64_t v) { put_le(v, 8); }
  void raw(std::span<const std::uint8_t> b) { out_.insert(out_.end(), b.begin(), b.end()); }
  void blob(std::span<const std::uint8_t> b) {
    length(b.size());
    raw(b);
  }
  void length(std::size_t n) {
    if (n > 0xffffffffu) throw std::length_error("sequence too long to encode");
    u32(static_cast<std::uint32_t>(n));
  }

  Bytes take() { return std::move(out_); }
  const Bytes& bytes() const { return out_; }

 private:
  void put_le(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  Bytes out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> data) : data_(data) {}

  std::uint8_t u8() { return static_cast<std::uint8_t>(get_le(1)); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(get_le(4)); }
  std::uint64_t u64() { return get_le(8); }
  std::span<const std::uint8_t> raw(std::size_t n) {
    need(n);
    auto s = data_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  std::size_t length() {
    std::size_t n = u32();
    // every element takes at least one byte, so this bounds hostile lengths
    if (n > data_.size() - pos_) throw DecodeError("length prefix exceeds input");
    return n;
  }
  void expect_end() const {
    if (pos_ != data_.size()) throw DecodeError("trailing bytes after message");
  }

 private:
  void need(std::size_t n) const {
    if (data_.size() - pos_ < n) throw DecodeError("truncated input");
  }
  std::uint64_t get_le(int n) {
    need(static_cast<std::size_t>(n));
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(data_[pos_ + i]) << (8 * i);
    pos_ += static_cast<std::size_t>(n);
    return v;
  }

  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
};

template <class T>
concept Tied = requires(T& t) { t.tie(); };

template <class T>
struct is_vector : std::false_type {};
template <class T>
struct is_vector<std::vector<T>> : std::true_type {};
template <class T>
struct is_optional : std::false_type {};
template <class T>
struct is_optional<std::optional<T>> : std::true_type {};
template <class T>
struct is_variant : std::false_type {};
template <class... Ts>
struct is_variant<std::variant<Ts...>> : std::true_type {};
template <class T>
struct is_map : std::false_type {};
template <class K, class V>
struct is_map<std::map<K, V>> : std::true_type {};
template <class T>
struct is_pair : std::false_type {};
template <class A, class B>
struct is_pair<std::pair<A, B>> : std::true_type {};
template <class T>
struct is_id : std::false_type {};
template <class Tag>
struct is_id<Id<Tag>> : std::true_type {};

template <class T>
void encode_into(Writer& w, const T& v);
template <class T>
void decode_from(Reader& r, T& v);

namespace detail {

template <class T>
void encode_int(Writer& w, T v) {
  if constexpr (sizeof(T) == 1) {
    w.u8(static_cast<std::uint8_t>(v));
  } else if constexpr (sizeof(T) <= 4) {
    w.u32(static_cast<std::uint32_t>(v));
  } else {
    w.u64(static_cast<std::uint64_t>(v));
  }
}

template <class T>
T decode_int(Reader& r) {
  if constexpr (sizeof(T) == 1) {
    return static_cast<T>(r.u8());
  } else if constexpr (sizeof(T) <= 4) {
    return static_cast<T>(r.u32());
  } else {
    return static_cast<T>(r.u64());
  }
}

template <class V, std::size_t I = 0>
void decode_alternative(Reader& r, V& v, std::size_t index) {
  if constexpr (I < std::variant_size_v<V>) {
    if (index == I) {
      std::variant_alternative_t<I, V> alt{};
      decode_from(r, alt);
      v = std::move(alt);
      return;
    }
    decode_alternative<V, I + 1>(r, v, index);
  } else {
    throw DecodeError("unknown variant tag");
  }
}

}  // namespace detail

template <class T>
void encode_into(Writer& w, const T& v) {
  if constexpr (std::is_same_v<T, bool>) {
    w.u8(v ? 1 : 0);
  } else if constexpr (std::is_enum_v<T>) {
    static_assert(sizeof(T) == 1, "enums encode as a single byte");
    w.u8(static_cast<std::uint8_t>(v));
  } else if constexpr (std::is_integral_v<T>) {
    static_assert(std::is_unsigned_v<T>);
    detail::encode_int(w, v);
  } else if constexpr (is_id<T>::value) {
    w.u32(v.value);
  } else if constexpr (std::is_same_v<T, Digest>) {
    w.raw(v.bytes);
  } else if constexpr (std::is_same_v<T, std::string>) {
    w.blob({reinterpret_cast<const std::uint8_t*>(v.data()), v.size()});
  } else if constexpr (std::is_same_v<T, Bytes>) {
    w.blob(v);
  } else if constexpr (is_vector<T>::value) {
    w.length(v.size());
    for (const auto& e : v) encode_into(w, e);
  } else if constexpr (is_optional<T>::value) {
    w.u8(v ? 1 : 0);
    if (v) encode_into(w, *v);
  } else if constexpr (is_variant<T>::value) {
    w.u8(static_cast<std::uint8_t>(v.index()));
    std::visit([&](const auto& alt) { encode_into(w, alt); }, v);
  } else if constexpr (is_map<T>::value) {
    w.length(v.size());
    for (const auto& [k, val] : v) {
      encode_into(w, k);
      encode_into(w, val);
    }
  } else if constexpr (is_pair<T>::value) {
    encode_into(w, v.first);
    encode_into(w, v.second);
  } else if constexpr (Tied<T>) {
    std::apply([&](const auto&... f) { (encode_into(w, f), ...); }, v.tie());
  } else {
    static_assert(sizeof(T) == 0, "type has no canonical encoding");
  }
}

template <class T>
void decode_from(Reader& r, T& v) {
  if constexpr (std::is_same_v<T, bool>) {
    auto b = r.u8();
    if (b > 1) throw DecodeError("invalid boolean");
    v = b == 1;
  } else if constexpr (std::is_enum_v<T>) {
    auto b = r.u8();
    // every encodable enum provides enum_count() found by lookup on its namespace
    if (b >= enum_count(T{})) throw DecodeError("enum value out of range");
    v = static_cast<T>(b);
  } else if constexpr (std::is_integral_v<T>) {
    v = detail::decode_int<T>(r);
  } else if constexpr (is_id<T>::value) {
    v = T{r.u32()};
  } else if constexpr (std::is_same_v<T, Digest>) {
    auto s = r.raw(32);
    std::memcpy(v.bytes.data(), s.data(), 32);
  } else if constexpr (std::is_same_v<T, std::string>) {
    auto s = r.raw(r.length());
    v.assign(reinterpret_cast<const char*>(s.data()), s.size());
  } else if constexpr (std::is_same_v<T, Bytes>) {
    auto s = r.raw(r.length());
    v.assign(s.begin(), s.end());
  } else if constexpr (is_vector<T>::value) {
    std::size_t n = r.length();
    v.clear();
    v.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      typename T::value_type e{};
      decode_from(r, e);
      v.push_back(std::move(e));
    }
  } else if constexpr (is_optional<T>::value) {
    auto flag = r.u8();
    if (flag > 1) throw DecodeError("invalid optional flag");
    if (flag == 0) {
      v.reset();
    } else {
      typename T::value_type e{};
      decode_from(r, e);
      v = std::move(e);
    }
  } else if constexpr (is_variant<T>::value) {
    detail::decode_alternative(r, v, r.u8());
  } else if constexpr (is_map<T>::value) {
    std::size_t n = r.length();
    v.clear();
    for (std::size_t i = 0; i < n; ++i) {
      typename T::key_type k{};
      typename T::mapped_type val{};
      decode_from(r, k);
      decode_from(r, val);
      // canonical form requires strictly ascending keys
      if (!v.empty() && !(std::prev(v.end())->first < k)) throw DecodeError("map keys out of order");
      v.emplace_hint(v.end(), std::move(k), std::move(val));
    }
  } else if constexpr (is_pair<T>::value) {
    decode_from(r, v.first);
    decode_from(r, v.second);
  } else if constexpr (Tied<T>) {
    std::apply([&](auto&... f) { (decode_from(r, f), ...); }, v.tie());
  } else {
    static_assert(sizeof(T) == 0, "type has no canonical encoding");
  }
}

template <class T>
Bytes encode(const T& v) {
  Writer w;
  encode_into(w, v);
  return w.take();
}

template <class T>
T decode(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  T v{};
  decode_from(r, v);
  r.expect_end();
  return v;
}

}  // namespace georep
