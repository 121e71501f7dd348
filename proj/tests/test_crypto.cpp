#include <doctest.h>

#include <openssl/sha.h>

#include "decloud/bytes.hpp"
#include "decloud/crypto.hpp"

using namespace decloud;

namespace {

const std::vector<DeviceId> kIds{10, 11, 12};

Bytes bytes_of(const char* s) {
  return Bytes(reinterpret_cast<const uint8_t*>(s),
               reinterpret_cast<const uint8_t*>(s) + strlen(s));
}

// HMAC-SHA1 by the book (ipad/opad over raw SHA-1), sharing nothing with the
// EVP-based production path.
Bytes hmac_by_hand(std::span<const uint8_t> key, std::span<const uint8_t> msg) {
  std::array<uint8_t, 64> k{};
  REQUIRE(key.size() <= k.size());
  std::copy(key.begin(), key.end(), k.begin());
  std::array<uint8_t, 64> ipad, opad;
  for (size_t i = 0; i < 64; ++i) {
    ipad[i] = k[i] ^ 0x36;
    opad[i] = k[i] ^ 0x5c;
  }
  Bytes inner(ipad.begin(), ipad.end());
  inner.insert(inner.end(), msg.begin(), msg.end());
  std::array<uint8_t, 20> ih;
  SHA1(inner.data(), inner.size(), ih.data());
  Bytes outer(opad.begin(), opad.end());
  outer.insert(outer.end(), ih.begin(), ih.end());
  Bytes out(20);
  SHA1(outer.data(), outer.size(), out.data());
  return out;
}

}  // namespace

TEST_SUITE("crypto") {

TEST_CASE("content hash matches published sha-1 vectors") {
  Bytes empty;
  CHECK(to_hex(content_hash(empty)) ==
        "da39a3ee5e6b4b0d3255bfef95601890afd80709");
  Bytes abc = bytes_of("abc");
  CHECK(to_hex(content_hash(abc)) ==
        "a9993e364706816aba3e25717850c26c9cd0d89d");
  Bytes lazy = bytes_of("The quick brown fox jumps over the lazy dog");
  CHECK(to_hex(content_hash(lazy)) ==
        "2fd4e1c67a2d28fced849ee1bb76e7391b93eb12");
}

TEST_CASE("signature sizes are pinned per scheme") {
  CHECK(signature_size(SigScheme::ASYM_RSA2048) == 256);
  CHECK(signature_size(SigScheme::SYM_HMAC_SHA1) == 20);
  CHECK(signature_size(SigScheme::OFF) == 0);
  KeyRing k = make_device_keyring(10, kIds);
  Bytes msg = bytes_of("payload");
  CHECK(sign(msg, SigScheme::ASYM_RSA2048, k, 10).size() == 256);
  CHECK(sign(msg, SigScheme::SYM_HMAC_SHA1, k, 10).size() == 20);
  CHECK(sign(msg, SigScheme::OFF, k, 10).empty());
}

TEST_CASE("hmac path agrees with an ipad/opad oracle") {
  KeyRing k = make_device_keyring(11, kIds);
  REQUIRE(k.mac_key.has_value());
  for (const char* m : {"", "x", "a longer message with some substance"}) {
    Bytes msg = bytes_of(m);
    Bytes got = sign(msg, SigScheme::SYM_HMAC_SHA1, k, 11);
    Bytes want = hmac_by_hand(*k.mac_key, msg);
    CHECK(to_hex(got) == to_hex(want));
  }
}

TEST_CASE("hmac verifies only the exact payload and signature") {
  KeyRing k = make_device_keyring(10, kIds);
  Bytes msg = bytes_of("write de=5 seq=9");
  Bytes sig = sign(msg, SigScheme::SYM_HMAC_SHA1, k, 10);
  CHECK(verify(msg, sig, SigScheme::SYM_HMAC_SHA1, k, 10));
  Bytes msg2 = msg;
  msg2.back() ^= 1;
  CHECK_FALSE(verify(msg2, sig, SigScheme::SYM_HMAC_SHA1, k, 10));
  Bytes sig2 = sig;
  sig2[3] ^= 0x80;
  CHECK_FALSE(verify(msg, sig2, SigScheme::SYM_HMAC_SHA1, k, 10));
  CHECK_FALSE(verify(msg, Bytes{}, SigScheme::SYM_HMAC_SHA1, k, 10));
}

TEST_CASE("rsa signatures are deterministic, bound to the signer") {
  KeyRing k10 = make_device_keyring(10, kIds);
  KeyRing k11 = make_device_keyring(11, kIds);
  Bytes msg = bytes_of("lease holder change");
  Bytes a = sign(msg, SigScheme::ASYM_RSA2048, k10, 10);
  Bytes b = sign(msg, SigScheme::ASYM_RSA2048, k10, 10);
  CHECK(a == b);  // PKCS#1 v1.5 has no randomness

  CHECK(verify(msg, a, SigScheme::ASYM_RSA2048, k10, 10));
  CHECK(verify(msg, a, SigScheme::ASYM_RSA2048, k11, 10));  // public op
  CHECK_FALSE(verify(msg, a, SigScheme::ASYM_RSA2048, k10, 11));

  Bytes tampered = a;
  tampered[128] ^= 1;
  CHECK_FALSE(verify(msg, tampered, SigScheme::ASYM_RSA2048, k10, 10));
  Bytes msg2 = msg;
  msg2[0] ^= 1;
  CHECK_FALSE(verify(msg2, a, SigScheme::ASYM_RSA2048, k10, 10));

  // Signing with someone else's ring is refused outright.
  CHECK_THROWS_AS((void)sign(msg, SigScheme::ASYM_RSA2048, k10, 11), Error);
}

TEST_CASE("keypair derivation is stable per device id") {
  const RsaKeyPair& a = derive_device_keypair(10);
  const RsaKeyPair& b = derive_device_keypair(10);
  CHECK(&a == &b);  // cached
  KeyRing k1 = make_device_keyring(10, kIds);
  KeyRing k2 = make_device_keyring(11, kIds);
  Bytes msg = bytes_of("stable");
  // Device 11 can verify what 10 signed using only public material.
  Bytes sig = sign(msg, SigScheme::ASYM_RSA2048, k1, 10);
  CHECK(verify(msg, sig, SigScheme::ASYM_RSA2048, k2, 10));
}

TEST_CASE("block encryption round-trips and never reuses a keystream") {
  KeyRing k = make_device_keyring(10, kIds);
  BlockData plain{};
  for (size_t i = 0; i < plain.size(); ++i)
    plain[i] = static_cast<uint8_t>(i * 31 + 7);

  BlockData ct = encrypt_block(plain, 5, 3, 1, k);
  CHECK(ct != plain);
  CHECK(decrypt_block(ct, 5, 3, 1, k) == plain);

  // Any coordinate change must change the ciphertext of identical plaintext.
  CHECK(encrypt_block(plain, 5, 3, 2, k) != ct);
  CHECK(encrypt_block(plain, 5, 4, 1, k) != ct);
  CHECK(encrypt_block(plain, 6, 3, 1, k) != ct);

  // Same coordinates, every keyring: the data key is shared.
  KeyRing k2 = make_device_keyring(12, kIds);
  CHECK(encrypt_block(plain, 5, 3, 1, k2) == ct);
}

TEST_CASE("provider keyring cannot touch block content") {
  KeyRing prov = make_provider_keyring(kIds);
  CHECK_FALSE(prov.has_data_key());
  BlockData b{};
  CHECK_THROWS_AS((void)encrypt_block(b, 1, 0, 1, prov), Error);
  // ...but it verifies signatures fine.
  KeyRing dev = make_device_keyring(10, kIds);
  Bytes msg = bytes_of("verify-only");
  Bytes sig = sign(msg, SigScheme::ASYM_RSA2048, dev, 10);
  CHECK(verify(msg, sig, SigScheme::ASYM_RSA2048, prov, 10));
}

}  // TEST_SUITE
