#pragma once

#include <map>
#include <optional>
#include <span>

#include "decloud/types.hpp"

namespace decloud {

enum class SigScheme : uint8_t { ASYM_RSA2048 = 0, SYM_HMAC_SHA1 = 1, OFF = 2 };

constexpr size_t signature_size(SigScheme s) {
  switch (s) {
    case SigScheme::ASYM_RSA2048: return 256;
    case SigScheme::SYM_HMAC_SHA1: return 20;
    case SigScheme::OFF: return 0;
  }
  return 0;
}

const char* scheme_name(SigScheme s);
std::optional<SigScheme> scheme_from_name(const std::string& name);

using Digest20 = std::array<uint8_t, 20>;

// RSA-2048 keys as raw integers (big-endian byte blobs). Key generation is
// deterministic per device id so replayed simulations produce identical
// signatures; see derive_device_keypair.
struct RsaPublicKey {
  Bytes n;  // 256 bytes
  Bytes e;
};

struct RsaKeyPair {
  RsaPublicKey pub;
  Bytes d;
  Bytes p, q, dp, dq, qinv;
};

struct KeyRing {
  DeviceId owner = 0;
  std::optional<RsaKeyPair> signing_key;  // user devices only
  std::map<DeviceId, RsaPublicKey> verify_keys;
  std::optional<std::array<uint8_t, 32>> data_key;  // user devices only
  std::optional<std::array<uint8_t, 20>> mac_key;   // user devices only

  bool has_data_key() const { return data_key.has_value(); }
};

// Deterministic: the same device id always yields the same keypair.
// Results are cached process-wide (generation is not free).
const RsaKeyPair& derive_device_keypair(DeviceId id);

// Keyring for a user device: own signing key, everyone's verify keys,
// the shared data and mac keys.
KeyRing make_device_keyring(DeviceId owner, const std::vector<DeviceId>& all_devices);

// Keyring for the provider side (coordinator / cloud node): verify keys
// only, no secrets.
KeyRing make_provider_keyring(const std::vector<DeviceId>& all_devices);

Digest20 content_hash(std::span<const uint8_t> bytes);

// Signs `payload` with the scheme. RSA uses PKCS#1 v1.5 over SHA-1 (a fully
// deterministic encoding). Throws Error(unknown_signer) when `signer` has no
// usable key under the scheme.
Bytes sign(std::span<const uint8_t> payload, SigScheme scheme, const KeyRing& keys,
           DeviceId signer);

// True iff `sig` is exactly what sign() would produce. Never throws; any
// malformed input verifies false. OFF always verifies true.
bool verify(std::span<const uint8_t> payload, std::span<const uint8_t> sig,
            SigScheme scheme, const KeyRing& keys, DeviceId signer);

// Length-preserving keyed block transform (AES-256-CTR with a nonce derived
// from the block coordinates, so every block-version encrypts uniquely).
// Throws Error(no_data_key) when the keyring lacks the shared data key.
BlockData encrypt_block(const BlockData& plaintext, DeId de, BlockId block,
                        VersionNo version, const KeyRing& keys);
BlockData decrypt_block(const BlockData& ciphertext, DeId de, BlockId block,
                        VersionNo version, const KeyRing& keys);

}  // namespace decloud
