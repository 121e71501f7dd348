#pragma once

#include <span>

#include "decloud/crypto.hpp"
#include "decloud/types.hpp"

namespace decloud {

enum class UpdateKind : uint8_t {
  WRITE = 0,
  NOOP = 1,
  LEASE_HOLDER = 2,
  REPLICATION = 3,
};

const char* update_kind_name(UpdateKind k);

// A signed replication record attached to a WRITE update. `signer` is the
// device whose key covers the record; normally signer == replicator, except
// when a device attests a fetch by the keyless cloud node.
struct Attachment {
  DeviceId replicator = 0;
  DeviceId signer = 0;
  Bytes sig;
};

// The protocol's atom. WRITE/NOOP/LEASE_HOLDER carry a per-DE sequence
// number; REPLICATION records carry none and attach to the WRITE with the
// matching (block, version).
struct Update {
  UpdateKind kind = UpdateKind::WRITE;
  DeId de = 0;
  SeqNo seq = 0;             // WRITE / NOOP / LEASE_HOLDER
  BlockId block = 0;         // WRITE / REPLICATION
  VersionNo version = 0;     // WRITE / REPLICATION
  Digest20 hash{};           // WRITE
  DeviceId old_lh = 0;       // LEASE_HOLDER
  DeviceId new_lh = 0;       // LEASE_HOLDER
  DeviceId replicator = 0;   // REPLICATION
  DeviceId signer = 0;
  Bytes sig;

  // Coordinator-maintained aggregation; excluded from the signed bytes.
  std::vector<Attachment> attachments;

  bool seq_bearing() const { return kind != UpdateKind::REPLICATION; }

  // Distinct replicators known for this WRITE: the writer plus every
  // attached record.
  std::vector<DeviceId> replicas() const;
  size_t replica_count() const { return replicas().size(); }
  bool has_replica(DeviceId d) const;
};

// Fixed-width big-endian serialization of everything the signature covers:
// all fields present for the kind except `attachments`/replica aggregation
// and the signature itself.
Bytes canonical_signed_bytes(const Update& u);

// Signed payload of the lease transfer seal sent old holder -> new holder.
Bytes transfer_seal_bytes(DeId de, SeqNo last_seq, DeviceId from, DeviceId to);

void sign_update(Update& u, SigScheme scheme, const KeyRing& keys);
bool verify_update(const Update& u, SigScheme scheme, const KeyRing& keys);

Attachment make_attachment(DeId de, BlockId block, VersionNo version,
                           DeviceId replicator, DeviceId signer,
                           SigScheme scheme, const KeyRing& keys);
bool verify_attachment(const Attachment& a, DeId de, BlockId block,
                       VersionNo version, SigScheme scheme, const KeyRing& keys);

// REPLICATION update <-> attachment conversion (the wire carries them as
// updates; logs store them attached to their WRITE).
Update attachment_to_update(DeId de, BlockId block, VersionNo version,
                            const Attachment& a);

}  // namespace decloud
