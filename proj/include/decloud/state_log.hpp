#pragma once

#include <map>
#include <optional>

#include "decloud/update.hpp"

namespace decloud {

// Outcome of feeding one received update into a verified log.
struct IngestOutcome {
  enum class Status {
    applied,
    duplicate,       // byte-identical to what we already hold
    bad_signature,
    fork,            // valid signature, different content at an existing seq
    gap,             // skips past head+1; stop consuming the batch
    not_entitled,    // signer is not the lease holder this log implies
    no_write,        // replication record for a write we do not hold
  } status;
  SeqNo at = 0;  // seq involved (0 for replication records)

  bool applied_or_dup() const {
    return status == Status::applied || status == Status::duplicate;
  }
};

// Append-only verified log for a single DE. Every entry arrived with a valid
// signature and extended the sequence by exactly one; the current lease
// holder is whatever the entries imply, starting from the first signer.
//
// Survives crashes: owners must keep it in their durable state.
class DeLog {
 public:
  DeLog() = default;
  explicit DeLog(DeId de) : de_(de) {}

  DeId de() const { return de_; }
  SeqNo head() const { return static_cast<SeqNo>(updates_.size()); }
  bool empty() const { return updates_.empty(); }
  const Update& at(SeqNo seq) const { return updates_.at(seq - 1); }
  Update& at_mut(SeqNo seq) { return updates_.at(seq - 1); }
  const std::vector<Update>& updates() const { return updates_; }

  // Holder implied by the log; 0 while empty.
  DeviceId lease_holder() const { return lh_; }

  // Verify + apply one received seq-bearing update. REPLICATION updates go
  // through ingest_replication instead.
  IngestOutcome ingest(const Update& u, SigScheme scheme, const KeyRing& keys);

  // Verify + attach a replication record to its write. `cloud_node` is the
  // one identity allowed as replicator without being the signer.
  IngestOutcome ingest_replication(const Update& r, SigScheme scheme,
                                   const KeyRing& keys, DeviceId cloud_node);

  // Author path: append an update this owner signed itself. No verification.
  void append_local(Update u);

  // Drop entries with seq > keep. Only for rolling back never-acked local
  // tail after a crash; never applied to received data.
  void truncate_to(SeqNo keep);

  VersionNo latest_version(BlockId b) const;
  const Update* write_for(BlockId b, VersionNo v) const;

  // Largest S such that every WRITE with seq <= S has at least `target`
  // distinct replicators on record. Monotone: replication records only
  // accumulate, so the cached cursor never retreats.
  SeqNo stable_frontier(size_t target) const;

  // (block, version) pairs superseded within the stable frontier: every
  // version older than the newest frontier-covered version of its block.
  std::vector<std::pair<BlockId, VersionNo>> gc_eligible(size_t target) const;

  // Seqs of WRITEs past the frontier still short of `target` replicators,
  // ascending.
  std::vector<SeqNo> under_replicated(size_t target) const;

  // All (block, version) pairs named by any WRITE, ascending.
  std::vector<std::pair<BlockId, VersionNo>> all_block_versions() const;

 private:
  bool entitled(const Update& u) const;
  void index(const Update& u, SeqNo seq);

  DeId de_ = 0;
  std::vector<Update> updates_;  // seq i lives at index i-1
  DeviceId lh_ = 0;
  std::map<BlockId, std::map<VersionNo, SeqNo>> by_block_;
  mutable SeqNo frontier_ = 0;
};

// A device's whole durable log state: one DeLog per DE it tracks.
class StateLog {
 public:
  DeLog& open(DeId de);
  DeLog* find(DeId de);
  const DeLog* find(DeId de) const;
  bool tracks(DeId de) const { return logs_.count(de) != 0; }
  const std::map<DeId, DeLog>& all() const { return logs_; }
  std::map<DeId, DeLog>& all_mut() { return logs_; }

 private:
  std::map<DeId, DeLog> logs_;
};

}  // namespace decloud
