#include <doctest.h>

#include "decloud/update.hpp"

using namespace decloud;

namespace {

const std::vector<DeviceId> kIds{10, 11, 12};

Update write_update(DeId de, SeqNo seq, BlockId b, VersionNo v,
                    DeviceId signer) {
  Update u;
  u.kind = UpdateKind::WRITE;
  u.de = de;
  u.seq = seq;
  u.block = b;
  u.version = v;
  for (size_t i = 0; i < u.hash.size(); ++i)
    u.hash[i] = static_cast<uint8_t>(seq * 7 + i);
  u.signer = signer;
  return u;
}

}  // namespace

TEST_SUITE("update") {

TEST_CASE("canonical encodings have fixed widths per kind") {
  Update w = write_update(5, 3, 2, 1, 10);
  CHECK(canonical_signed_bytes(w).size() == 57);

  Update n;
  n.kind = UpdateKind::NOOP;
  n.de = 5;
  n.seq = 4;
  n.signer = 10;
  CHECK(canonical_signed_bytes(n).size() == 25);

  Update lh;
  lh.kind = UpdateKind::LEASE_HOLDER;
  lh.de = 5;
  lh.seq = 5;
  lh.old_lh = 10;
  lh.new_lh = 11;
  lh.signer = 10;
  CHECK(canonical_signed_bytes(lh).size() == 41);

  Update r;
  r.kind = UpdateKind::REPLICATION;
  r.de = 5;
  r.block = 2;
  r.version = 1;
  r.replicator = 11;
  r.signer = 11;
  CHECK(canonical_signed_bytes(r).size() == 37);

  CHECK(transfer_seal_bytes(5, 9, 10, 11).size() == 33);
}

TEST_CASE("every signed field moves the canonical bytes") {
  Update base = write_update(5, 3, 2, 1, 10);
  Bytes ref = canonical_signed_bytes(base);

  auto differs = [&](Update u) {
    return canonical_signed_bytes(u) != ref;
  };
  Update u = base;
  u.de = 6;
  CHECK(differs(u));
  u = base;
  u.seq = 4;
  CHECK(differs(u));
  u = base;
  u.block = 3;
  CHECK(differs(u));
  u = base;
  u.version = 2;
  CHECK(differs(u));
  u = base;
  u.hash[0] ^= 1;
  CHECK(differs(u));
  u = base;
  u.signer = 11;
  CHECK(differs(u));

  // Aggregated replica state stays outside the signature.
  u = base;
  u.attachments.push_back({11, 11, Bytes{0xAA}});
  CHECK(canonical_signed_bytes(u) == ref);
}

TEST_CASE("a seal never collides with an update encoding") {
  Bytes seal = transfer_seal_bytes(5, 3, 10, 11);
  CHECK(seal[0] == 0x54);
  Update w = write_update(5, 3, 2, 1, 10);
  CHECK(canonical_signed_bytes(w)[0] <= 3);
}

TEST_CASE("sign and verify cover exactly the canonical bytes") {
  KeyRing k10 = make_device_keyring(10, kIds);
  KeyRing k11 = make_device_keyring(11, kIds);
  Update u = write_update(7, 1, 0, 1, 10);
  sign_update(u, SigScheme::SYM_HMAC_SHA1, k10);
  CHECK(verify_update(u, SigScheme::SYM_HMAC_SHA1, k11));

  // Attachments may grow without re-signing.
  u.attachments.push_back({12, 12, Bytes(20, 0xBB)});
  CHECK(verify_update(u, SigScheme::SYM_HMAC_SHA1, k11));

  // Any signed field flip invalidates.
  Update bad = u;
  bad.version = 9;
  CHECK_FALSE(verify_update(bad, SigScheme::SYM_HMAC_SHA1, k11));

  // Claiming a different signer under rsa fails verification.
  Update ru = write_update(7, 2, 1, 1, 10);
  sign_update(ru, SigScheme::ASYM_RSA2048, k10);
  CHECK(verify_update(ru, SigScheme::ASYM_RSA2048, k11));
  Update imposter = ru;
  imposter.signer = 11;
  CHECK_FALSE(verify_update(imposter, SigScheme::ASYM_RSA2048, k11));
}

TEST_CASE("replica accounting starts at the writer and dedupes") {
  Update u = write_update(5, 1, 0, 1, 10);
  CHECK(u.replicas() == std::vector<DeviceId>{10});
  CHECK(u.replica_count() == 1);
  CHECK(u.has_replica(10));
  CHECK_FALSE(u.has_replica(11));

  u.attachments.push_back({11, 11, {}});
  u.attachments.push_back({2, 10, {}});   // cloud copy, writer-attested
  u.attachments.push_back({11, 11, {}});  // duplicate record
  CHECK(u.replica_count() == 3);
  CHECK(u.has_replica(2));
  CHECK(u.has_replica(11));
  std::vector<DeviceId> r = u.replicas();
  CHECK(r.front() == 10);  // writer first
}

}  // TEST_SUITE
