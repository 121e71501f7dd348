#include "decloud/crypto.hpp"

#include <gmp.h>
#include <openssl/evp.h>

#include <cstring>
#include <mutex>
#include <random>

#include "decloud/bytes.hpp"

namespace decloud {

const char* scheme_name(SigScheme s) {
  switch (s) {
    case SigScheme::ASYM_RSA2048: return "RSA";
    case SigScheme::SYM_HMAC_SHA1: return "HMAC";
    case SigScheme::OFF: return "OFF";
  }
  return "?";
}

std::optional<SigScheme> scheme_from_name(const std::string& name) {
  if (name == "RSA") return SigScheme::ASYM_RSA2048;
  if (name == "HMAC") return SigScheme::SYM_HMAC_SHA1;
  if (name == "OFF") return SigScheme::OFF;
  return std::nullopt;
}

Digest20 content_hash(std::span<const uint8_t> bytes) {
  Digest20 out{};
  unsigned int len = 0;
  EVP_Digest(bytes.data(), bytes.size(), out.data(), &len, EVP_sha1(), nullptr);
  return out;
}

static Bytes hmac_sha1(std::span<const uint8_t> key, std::span<const uint8_t> data) {
  Bytes out(20);
  size_t outlen = 0;
  EVP_Q_mac(nullptr, "HMAC", nullptr, "SHA1", nullptr, key.data(), key.size(),
            data.data(), data.size(), out.data(), out.size(), &outlen);
  out.resize(outlen);
  return out;
}

// ---------------------------------------------------------------------------
// Deterministic RSA-2048 (PKCS#1 v1.5, SHA-1 digest).
//
// OpenSSL's key generation cannot be seeded, so primes are produced here from
// a per-device mt19937_64 stream; signing itself is plain modular
// exponentiation over GMP. PKCS#1 v1.5 has no randomized padding, which is
// exactly what replayable simulations need.
// ---------------------------------------------------------------------------

namespace {

struct Mpz {
  mpz_t v;
  Mpz() { mpz_init(v); }
  explicit Mpz(unsigned long x) { mpz_init_set_ui(v, x); }
  Mpz(const Mpz&) = delete;
  Mpz& operator=(const Mpz&) = delete;
  ~Mpz() { mpz_clear(v); }
};

void mpz_from_bytes(mpz_t out, std::span<const uint8_t> bytes) {
  mpz_import(out, bytes.size(), 1, 1, 1, 0, bytes.data());
}

Bytes mpz_to_bytes(const mpz_t v, size_t width) {
  Bytes out(width, 0);
  size_t count = 0;
  size_t need = (mpz_sizeinbase(v, 2) + 7) / 8;
  if (need > width) return {};  // caller treats empty as failure
  mpz_export(out.data() + (width - need), &count, 1, 1, 1, 0, v);
  return out;
}

// 1024-bit prime from a seeded stream, top two bits forced so p*q fills
// 2048 bits.
void random_prime_1024(mpz_t out, std::mt19937_64& rng) {
  Bytes buf(128);
  for (size_t i = 0; i < buf.size(); i += 8) {
    uint64_t w = rng();
    for (int b = 0; b < 8; ++b) buf[i + b] = uint8_t(w >> (56 - 8 * b));
  }
  buf[0] |= 0xC0;
  buf[127] |= 1;
  Mpz cand;
  mpz_from_bytes(cand.v, buf);
  mpz_nextprime(out, cand.v);
}

constexpr unsigned long kRsaE = 65537;

RsaKeyPair generate_keypair(DeviceId id) {
  std::mt19937_64 rng(0x6465636c6f7564ULL ^ (id * 0x9E3779B97F4A7C15ULL));
  Mpz p, q, n, e(kRsaE), phi, d, pm1, qm1, g;
  while (true) {
    random_prime_1024(p.v, rng);
    random_prime_1024(q.v, rng);
    if (mpz_cmp(p.v, q.v) == 0) continue;
    mpz_sub_ui(pm1.v, p.v, 1);
    mpz_sub_ui(qm1.v, q.v, 1);
    mpz_mul(phi.v, pm1.v, qm1.v);
    mpz_gcd_ui(g.v, phi.v, kRsaE);
    if (mpz_cmp_ui(g.v, 1) != 0) continue;
    mpz_mul(n.v, p.v, q.v);
    if (mpz_sizeinbase(n.v, 2) != 2048) continue;
    break;
  }
  mpz_invert(d.v, e.v, phi.v);

  RsaKeyPair kp;
  kp.pub.n = mpz_to_bytes(n.v, 256);
  kp.pub.e = mpz_to_bytes(e.v, 3);
  kp.d = mpz_to_bytes(d.v, 256);
  kp.p = mpz_to_bytes(p.v, 128);
  kp.q = mpz_to_bytes(q.v, 128);
  Mpz dp, dq, qinv;
  mpz_mod(dp.v, d.v, pm1.v);
  mpz_mod(dq.v, d.v, qm1.v);
  mpz_invert(qinv.v, q.v, p.v);
  kp.dp = mpz_to_bytes(dp.v, 128);
  kp.dq = mpz_to_bytes(dq.v, 128);
  kp.qinv = mpz_to_bytes(qinv.v, 128);
  return kp;
}

// EMSA-PKCS1-v1_5 for SHA-1, 256-byte modulus.
Bytes emsa_pkcs1_sha1(std::span<const uint8_t> payload) {
  static const uint8_t kSha1Prefix[] = {0x30, 0x21, 0x30, 0x09, 0x06,
                                        0x05, 0x2b, 0x0e, 0x03, 0x02,
                                        0x1a, 0x05, 0x00, 0x04, 0x14};
  Digest20 h = content_hash(payload);
  Bytes em(256, 0xFF);
  em[0] = 0x00;
  em[1] = 0x01;
  size_t tlen = sizeof(kSha1Prefix) + h.size();
  em[256 - tlen - 1] = 0x00;
  std::memcpy(em.data() + 256 - tlen, kSha1Prefix, sizeof(kSha1Prefix));
  std::memcpy(em.data() + 256 - h.size(), h.data(), h.size());
  return em;
}

Bytes rsa_sign(const RsaKeyPair& key, std::span<const uint8_t> payload) {
  Bytes em = emsa_pkcs1_sha1(payload);
  Mpz m, p, q, dp, dq, qinv, m1, m2, h, s;
  mpz_from_bytes(m.v, em);
  mpz_from_bytes(p.v, key.p);
  mpz_from_bytes(q.v, key.q);
  mpz_from_bytes(dp.v, key.dp);
  mpz_from_bytes(dq.v, key.dq);
  mpz_from_bytes(qinv.v, key.qinv);
  // CRT: s = m2 + q * ((m1 - m2) * qinv mod p)
  mpz_powm(m1.v, m.v, dp.v, p.v);
  mpz_powm(m2.v, m.v, dq.v, q.v);
  mpz_sub(h.v, m1.v, m2.v);
  mpz_mod(h.v, h.v, p.v);
  mpz_mul(h.v, h.v, qinv.v);
  mpz_mod(h.v, h.v, p.v);
  mpz_mul(s.v, q.v, h.v);
  mpz_add(s.v, s.v, m2.v);
  return mpz_to_bytes(s.v, 256);
}

bool rsa_verify(const RsaPublicKey& key, std::span<const uint8_t> payload,
                std::span<const uint8_t> sig) {
  if (sig.size() != 256 || key.n.size() != 256) return false;
  Mpz s, n, e, m;
  mpz_from_bytes(s.v, sig);
  mpz_from_bytes(n.v, key.n);
  mpz_from_bytes(e.v, key.e);
  if (mpz_cmp(s.v, n.v) >= 0) return false;
  mpz_powm(m.v, s.v, e.v, n.v);
  Bytes em = mpz_to_bytes(m.v, 256);
  return !em.empty() && em == emsa_pkcs1_sha1(payload);
}

std::array<uint8_t, 32> derive_key32(const char* tag) {
  std::array<uint8_t, 32> out{};
  Digest20 a = content_hash({reinterpret_cast<const uint8_t*>(tag), strlen(tag)});
  Bytes second(a.begin(), a.end());
  second.push_back(0x01);
  Digest20 b = content_hash(second);
  std::memcpy(out.data(), a.data(), 20);
  std::memcpy(out.data() + 20, b.data(), 12);
  return out;
}

}  // namespace

const RsaKeyPair& derive_device_keypair(DeviceId id) {
  static std::mutex mu;
  static std::map<DeviceId, RsaKeyPair> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(id);
  if (it == cache.end()) it = cache.emplace(id, generate_keypair(id)).first;
  return it->second;
}

KeyRing make_device_keyring(DeviceId owner, const std::vector<DeviceId>& all_devices) {
  KeyRing k;
  k.owner = owner;
  k.signing_key = derive_device_keypair(owner);
  for (DeviceId d : all_devices) k.verify_keys[d] = derive_device_keypair(d).pub;
  k.data_key = derive_key32("decloud shared data key v1");
  auto mac32 = derive_key32("decloud shared mac key v1");
  std::array<uint8_t, 20> mac{};
  std::memcpy(mac.data(), mac32.data(), 20);
  k.mac_key = mac;
  return k;
}

KeyRing make_provider_keyring(const std::vector<DeviceId>& all_devices) {
  KeyRing k;
  for (DeviceId d : all_devices) k.verify_keys[d] = derive_device_keypair(d).pub;
  return k;
}

Bytes sign(std::span<const uint8_t> payload, SigScheme scheme, const KeyRing& keys,
           DeviceId signer) {
  switch (scheme) {
    case SigScheme::OFF:
      return {};
    case SigScheme::SYM_HMAC_SHA1:
      if (!keys.mac_key) throw Error(Errc::unknown_signer, "no mac key");
      return hmac_sha1(*keys.mac_key, payload);
    case SigScheme::ASYM_RSA2048:
      if (!keys.signing_key || keys.owner != signer)
        throw Error(Errc::unknown_signer, "no signing key for device");
      return rsa_sign(*keys.signing_key, payload);
  }
  return {};
}

bool verify(std::span<const uint8_t> payload, std::span<const uint8_t> sig,
            SigScheme scheme, const KeyRing& keys, DeviceId signer) {
  switch (scheme) {
    case SigScheme::OFF:
      return true;
    case SigScheme::SYM_HMAC_SHA1: {
      if (!keys.mac_key || sig.size() != 20) return false;
      Bytes expect = hmac_sha1(*keys.mac_key, payload);
      return std::equal(expect.begin(), expect.end(), sig.begin());
    }
    case SigScheme::ASYM_RSA2048: {
      auto it = keys.verify_keys.find(signer);
      if (it == keys.verify_keys.end()) return false;
      return rsa_verify(it->second, payload, sig);
    }
  }
  return false;
}

static BlockData ctr_transform(const BlockData& in, DeId de, BlockId block,
                               VersionNo version, const KeyRing& keys) {
  if (!keys.data_key) throw Error(Errc::no_data_key, "keyring has no shared data key");
  ByteWriter w;
  w.raw({reinterpret_cast<const uint8_t*>("blk-nonce"), 9});
  w.u64(de);
  w.u64(block);
  w.u32(version);
  Digest20 h = content_hash({w.data(), w.size()});
  uint8_t iv[16];
  std::memcpy(iv, h.data(), 16);
  iv[14] = 0;  // room for the 4096/16 = 256 counter steps
  iv[15] = 0;

  BlockData out{};
  EVP_CIPHER_CTX* ctx = EVP_CIPHER_CTX_new();
  int len = 0;
  EVP_EncryptInit_ex(ctx, EVP_aes_256_ctr(), nullptr, keys.data_key->data(), iv);
  EVP_EncryptUpdate(ctx, out.data(), &len, in.data(), int(in.size()));
  EVP_CIPHER_CTX_free(ctx);
  return out;
}

BlockData encrypt_block(const BlockData& plaintext, DeId de, BlockId block,
                        VersionNo version, const KeyRing& keys) {
  return ctr_transform(plaintext, de, block, version, keys);
}

BlockData decrypt_block(const BlockData& ciphertext, DeId de, BlockId block,
                        VersionNo version, const KeyRing& keys) {
  return ctr_transform(ciphertext, de, block, version, keys);
}

}  // namespace decloud
