#pragma once

#include <map>
#include <span>

#include "georep/core/messages.hpp"

namespace georep {

Digest sha256(std::span<const std::uint8_t> data);
Digest sha256(std::string_view s);

template <class T>
Digest digest_of(const T& v) {
  return sha256(encode(v));
}

using SecretKey = std::array<std::uint8_t, 32>;

// Holds the secret of one principal. A node only ever gets its own Signer,
// so a faulty node can authenticate as itself but nobody else.
class Signer {
 public:
  Signer(NodeId id, SecretKey key) : id_(id), key_(key) {}

  NodeId id() const { return id_; }
  Signature sign(std::span<const std::uint8_t> bytes) const;
  MacVector mac(std::span<const NodeId> receivers, std::span<const std::uint8_t> bytes) const;

 private:
  NodeId id_;
  SecretKey key_;
};

// Simulated key infrastructure. Tags are keyed hashes, which makes them
// unforgeable without the key while keeping runs deterministic.
class CryptoProvider {
 public:
  explicit CryptoProvider(std::uint64_t seed) : seed_(seed) {}

  void register_principal(NodeId id);
  bool known(NodeId id) const { return keys_.count(id) != 0; }
  Signer signer_for(NodeId id) const;  // throws ConfigError for unknown principals

  bool valid_signature(const Signature& sig, std::span<const std::uint8_t> bytes) const;
  bool valid_mac(const MacVector& mac, NodeId receiver, std::span<const std::uint8_t> bytes) const;
  bool verify(const Authenticator& auth, std::span<const std::uint8_t> bytes, NodeId receiver) const;

  template <class T>
  bool verify_signed(const T& payload, const Signature& sig) const {
    return valid_signature(sig, encode(payload));
  }

 private:
  std::uint64_t seed_;
  std::map<NodeId, SecretKey> keys_;
};

Signature sign_tag(const SecretKey& key, NodeId signer, std::span<const std::uint8_t> bytes);
Digest mac_tag(const SecretKey& key, NodeId receiver, std::span<const std::uint8_t> bytes);

// Client-side helper: sign a Write as its client.
SignedWrite sign_write(const Signer& client, Write w);
bool valid_write(const CryptoProvider& crypto, const SignedWrite& sw);

}  // namespace georep
