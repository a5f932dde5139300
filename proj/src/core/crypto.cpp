#include "georep/core/crypto.hpp"

#include <openssl/sha.h>

#include <algorithm>

namespace georep {

Digest sha256(std::span<const std::uint8_t> data) {
  Digest d;
  SHA256(data.data(), data.size(), d.bytes.data());
  return d;
}

Digest sha256(std::string_view s) {
  return sha256({reinterpret_cast<const std::uint8_t*>(s.data()), s.size()});
}

namespace {

Digest keyed(const SecretKey& key, std::string_view domain, std::uint32_t extra,
             std::span<const std::uint8_t> bytes) {
  Bytes buf;
  buf.reserve(key.size() + domain.size() + 4 + bytes.size());
  buf.insert(buf.end(), key.begin(), key.end());
  buf.insert(buf.end(), domain.begin(), domain.end());
  for (int i = 0; i < 4; ++i) buf.push_back(static_cast<std::uint8_t>(extra >> (8 * i)));
  buf.insert(buf.end(), bytes.begin(), bytes.end());
  return sha256(buf);
}

}  // namespace

Signature sign_tag(const SecretKey& key, NodeId signer, std::span<const std::uint8_t> bytes) {
  return Signature{signer, keyed(key, "sig", signer.value, bytes)};
}

Digest mac_tag(const SecretKey& key, NodeId receiver, std::span<const std::uint8_t> bytes) {
  return keyed(key, "mac", receiver.value, bytes);
}

Signature Signer::sign(std::span<const std::uint8_t> bytes) const { return sign_tag(key_, id_, bytes); }

MacVector Signer::mac(std::span<const NodeId> receivers, std::span<const std::uint8_t> bytes) const {
  MacVector mv{id_, {}};
  mv.entries.reserve(receivers.size());
  for (NodeId r : receivers) mv.entries.push_back(MacEntry{r, mac_tag(key_, r, bytes)});
  return mv;
}

void CryptoProvider::register_principal(NodeId id) {
  if (known(id)) return;
  Writer w;
  w.u64(seed_);
  w.u32(id.value);
  const Digest d = sha256(w.bytes());
  keys_[id] = d.bytes;
}

Signer CryptoProvider::signer_for(NodeId id) const {
  auto it = keys_.find(id);
  if (it == keys_.end()) throw ConfigError("unknown principal " + std::to_string(id.value));
  return Signer(id, it->second);
}

bool CryptoProvider::valid_signature(const Signature& sig, std::span<const std::uint8_t> bytes) const {
  auto it = keys_.find(sig.signer);
  if (it == keys_.end()) return false;
  return sign_tag(it->second, sig.signer, bytes).tag == sig.tag;
}

bool CryptoProvider::valid_mac(const MacVector& mac, NodeId receiver, std::span<const std::uint8_t> bytes) const {
  auto it = keys_.find(mac.signer);
  if (it == keys_.end()) return false;
  auto e = std::find_if(mac.entries.begin(), mac.entries.end(),
                        [&](const MacEntry& m) { return m.receiver == receiver; });
  if (e == mac.entries.end()) return false;
  return mac_tag(it->second, receiver, bytes) == e->tag;
}

bool CryptoProvider::verify(const Authenticator& auth, std::span<const std::uint8_t> bytes, NodeId receiver) const {
  if (const auto* s = std::get_if<Signature>(&auth)) return valid_signature(*s, bytes);
  return valid_mac(std::get<MacVector>(auth), receiver, bytes);
}

SignedWrite sign_write(const Signer& client, Write w) {
  SignedWrite sw;
  sw.write = std::move(w);
  sw.sig = client.sign(encode(sw.write));
  return sw;
}

bool valid_write(const CryptoProvider& crypto, const SignedWrite& sw) {
  return sw.sig.signer == sw.write.client && crypto.valid_signature(sw.sig, encode(sw.write));
}

}  // namespace georep
