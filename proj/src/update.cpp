#include "decloud/update.hpp"

#include <algorithm>

#include "decloud/bytes.hpp"

namespace decloud {

const char* update_kind_name(UpdateKind k) {
  switch (k) {
    case UpdateKind::WRITE: return "WRITE";
    case UpdateKind::NOOP: return "NOOP";
    case UpdateKind::LEASE_HOLDER: return "LEASE_HOLDER";
    case UpdateKind::REPLICATION: return "REPLICATION";
  }
  return "?";
}

std::vector<DeviceId> Update::replicas() const {
  std::vector<DeviceId> out;
  out.push_back(signer);
  for (const auto& a : attachments) {
    if (std::find(out.begin(), out.end(), a.replicator) == out.end())
      out.push_back(a.replicator);
  }
  return out;
}

bool Update::has_replica(DeviceId d) const {
  if (signer == d) return true;
  for (const auto& a : attachments)
    if (a.replicator == d) return true;
  return false;
}

Bytes canonical_signed_bytes(const Update& u) {
  ByteWriter w;
  w.u8(static_cast<uint8_t>(u.kind));
  w.u64(u.de);
  switch (u.kind) {
    case UpdateKind::WRITE:
      w.u64(u.seq);
      w.u64(u.block);
      w.u32(u.version);
      w.raw(u.hash.data(), u.hash.size());
      break;
    case UpdateKind::NOOP:
      w.u64(u.seq);
      break;
    case UpdateKind::LEASE_HOLDER:
      w.u64(u.seq);
      w.u64(u.old_lh);
      w.u64(u.new_lh);
      break;
    case UpdateKind::REPLICATION:
      w.u64(u.block);
      w.u32(u.version);
      w.u64(u.replicator);
      break;
  }
  w.u64(u.signer);
  return std::move(w).take();
}

Bytes transfer_seal_bytes(DeId de, SeqNo last_seq, DeviceId from, DeviceId to) {
  ByteWriter w;
  // Domain tag keeps seals from colliding with any update's signed bytes
  // (updates start with a kind byte <= 3).
  w.u8(0x54);  // 'T'
  w.u64(de);
  w.u64(last_seq);
  w.u64(from);
  w.u64(to);
  return std::move(w).take();
}

void sign_update(Update& u, SigScheme scheme, const KeyRing& keys) {
  u.sig = sign(canonical_signed_bytes(u), scheme, keys, u.signer);
}

bool verify_update(const Update& u, SigScheme scheme, const KeyRing& keys) {
  return verify(canonical_signed_bytes(u), u.sig, scheme, keys, u.signer);
}

Attachment make_attachment(DeId de, BlockId block, VersionNo version,
                           DeviceId replicator, DeviceId signer,
                           SigScheme scheme, const KeyRing& keys) {
  Update r;
  r.kind = UpdateKind::REPLICATION;
  r.de = de;
  r.block = block;
  r.version = version;
  r.replicator = replicator;
  r.signer = signer;
  return Attachment{replicator, signer,
                    sign(canonical_signed_bytes(r), scheme, keys, signer)};
}

bool verify_attachment(const Attachment& a, DeId de, BlockId block,
                       VersionNo version, SigScheme scheme,
                       const KeyRing& keys) {
  Update r;
  r.kind = UpdateKind::REPLICATION;
  r.de = de;
  r.block = block;
  r.version = version;
  r.replicator = a.replicator;
  r.signer = a.signer;
  return verify(canonical_signed_bytes(r), a.sig, scheme, keys, a.signer);
}

Update attachment_to_update(DeId de, BlockId block, VersionNo version,
                            const Attachment& a) {
  Update r;
  r.kind = UpdateKind::REPLICATION;
  r.de = de;
  r.block = block;
  r.version = version;
  r.replicator = a.replicator;
  r.signer = a.signer;
  r.sig = a.sig;
  return r;
}

}  // namespace decloud
