#pragma once

#include <sodium.h>

#include <array>
#include <cstdint>
#include <mutex>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "umx/common.hpp"

namespace umx {

using Hash32 = std::array<std::uint8_t, 32>;
using PubKey = std::array<std::uint8_t, 32>;
using Signature = std::array<std::uint8_t, 64>;

inline void ensure_sodium() {
  static std::once_flag flag;
  std::call_once(flag, [] {
    if (sodium_init() < 0) throw std::runtime_error("libsodium init failed");
  });
}

inline Hash32 sha256(std::span<const std::uint8_t> data) {
  ensure_sodium();
  Hash32 out;
  crypto_hash_sha256(out.data(), data.data(), data.size());
  return out;
}

inline Hash32 sha256(std::string_view s) {
  return sha256(std::span(reinterpret_cast<const std::uint8_t*>(s.data()), s.size()));
}

// Ed25519 keypair. Signing is deterministic, public keys are 32 bytes.
struct KeyPair {
  PubKey pub{};
  std::array<std::uint8_t, 64> sec{};

  static KeyPair from_seed(const Hash32& seed) {
    ensure_sodium();
    KeyPair kp;
    crypto_sign_seed_keypair(kp.pub.data(), kp.sec.data(), seed.data());
    return kp;
  }

  // Deterministic keys for simulation participants, derived from a label.
  static KeyPair derive(std::string_view label) {
    return from_seed(sha256(label));
  }
};

inline Signature sign(const KeyPair& kp, std::span<const std::uint8_t> msg) {
  ensure_sodium();
  Signature sig;
  crypto_sign_detached(sig.data(), nullptr, msg.data(), msg.size(), kp.sec.data());
  return sig;
}

inline bool verify(const PubKey& pub, std::span<const std::uint8_t> msg, const Signature& sig) {
  ensure_sodium();
  return crypto_sign_verify_detached(sig.data(), msg.data(), msg.size(), pub.data()) == 0;
}

// Account ids are pseudonyms: the first 16 bytes of SHA-256 of the
// verification key. Nothing else about the holder appears on chain.
inline AccountId account_id_from_pubkey(const PubKey& pub) {
  Hash32 h = sha256(std::span(pub.data(), pub.size()));
  AccountId id;
  std::copy(h.begin(), h.begin() + 16, id.bytes.begin());
  return id;
}

inline MeterId meter_id_from_pubkey(const PubKey& pub) {
  Hash32 h = sha256(std::span(pub.data(), pub.size()));
  MeterId id;
  std::copy(h.begin(), h.begin() + 16, id.bytes.begin());
  return id;
}

template <typename Tag>
Id16<Tag> id16_from_hash(const Hash32& h) {
  Id16<Tag> id;
  std::copy(h.begin(), h.begin() + 16, id.bytes.begin());
  return id;
}

}  // namespace umx
