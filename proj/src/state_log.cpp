#include "decloud/state_log.hpp"

#include <algorithm>

namespace decloud {

using Status = IngestOutcome::Status;

bool DeLog::entitled(const Update& u) const {
  if (updates_.empty()) {
    // First update fixes the holder: trust-on-first-use genesis.
    if (u.kind == UpdateKind::LEASE_HOLDER) return u.signer == u.new_lh;
    return true;
  }
  switch (u.kind) {
    case UpdateKind::WRITE:
    case UpdateKind::NOOP:
      return u.signer == lh_;
    case UpdateKind::LEASE_HOLDER:
      // Normal transfer is signed by the outgoing holder; recovery is
      // signed by the incoming one. Either way the old side must match.
      return u.old_lh == lh_ && (u.signer == u.old_lh || u.signer == u.new_lh);
    case UpdateKind::REPLICATION:
      return false;  // not seq-bearing; never reaches here
  }
  return false;
}

void DeLog::index(const Update& u, SeqNo seq) {
  if (u.kind == UpdateKind::WRITE) by_block_[u.block][u.version] = seq;
  if (u.kind == UpdateKind::LEASE_HOLDER)
    lh_ = u.new_lh;
  else if (updates_.size() == 1)
    lh_ = u.signer;  // genesis
}

IngestOutcome DeLog::ingest(const Update& u, SigScheme scheme,
                            const KeyRing& keys) {
  if (!verify_update(u, scheme, keys)) return {Status::bad_signature, u.seq};
  if (u.seq == 0) return {Status::bad_signature, 0};
  if (u.seq <= head()) {
    const Update& have = at(u.seq);
    if (canonical_signed_bytes(have) == canonical_signed_bytes(u))
      return {Status::duplicate, u.seq};
    return {Status::fork, u.seq};
  }
  if (u.seq > head() + 1) return {Status::gap, u.seq};
  if (!entitled(u)) return {Status::not_entitled, u.seq};
  Update stored = u;
  stored.attachments.clear();  // replication records arrive separately
  updates_.push_back(std::move(stored));
  index(updates_.back(), u.seq);
  return {Status::applied, u.seq};
}

IngestOutcome DeLog::ingest_replication(const Update& r, SigScheme scheme,
                                        const KeyRing& keys,
                                        DeviceId cloud_node) {
  if (r.replicator != r.signer && r.replicator != cloud_node)
    return {Status::bad_signature, 0};
  if (!verify_update(r, scheme, keys)) return {Status::bad_signature, 0};
  auto it = by_block_.find(r.block);
  if (it == by_block_.end()) return {Status::no_write, 0};
  auto vit = it->second.find(r.version);
  if (vit == it->second.end()) return {Status::no_write, 0};
  Update& w = at_mut(vit->second);
  if (w.has_replica(r.replicator)) return {Status::duplicate, 0};
  w.attachments.push_back(Attachment{r.replicator, r.signer, r.sig});
  return {Status::applied, 0};
}

void DeLog::append_local(Update u) {
  u.seq = head() + 1;
  updates_.push_back(std::move(u));
  index(updates_.back(), updates_.back().seq);
}

void DeLog::truncate_to(SeqNo keep) {
  while (head() > keep) {
    const Update& u = updates_.back();
    if (u.kind == UpdateKind::WRITE) {
      auto& versions = by_block_[u.block];
      versions.erase(u.version);
      if (versions.empty()) by_block_.erase(u.block);
    }
    updates_.pop_back();
  }
  if (frontier_ > keep) frontier_ = keep;
  // Recompute the implied holder from scratch; cheap and rare.
  lh_ = 0;
  for (const Update& u : updates_) {
    if (u.kind == UpdateKind::LEASE_HOLDER)
      lh_ = u.new_lh;
    else if (lh_ == 0)
      lh_ = u.signer;
  }
}

VersionNo DeLog::latest_version(BlockId b) const {
  auto it = by_block_.find(b);
  if (it == by_block_.end() || it->second.empty()) return 0;
  return it->second.rbegin()->first;
}

const Update* DeLog::write_for(BlockId b, VersionNo v) const {
  auto it = by_block_.find(b);
  if (it == by_block_.end()) return nullptr;
  auto vit = it->second.find(v);
  if (vit == it->second.end()) return nullptr;
  return &at(vit->second);
}

SeqNo DeLog::stable_frontier(size_t target) const {
  while (frontier_ < head()) {
    const Update& u = at(frontier_ + 1);
    if (u.kind == UpdateKind::WRITE && u.replica_count() < target) break;
    ++frontier_;
  }
  return frontier_;
}

std::vector<std::pair<BlockId, VersionNo>> DeLog::gc_eligible(
    size_t target) const {
  SeqNo frontier = stable_frontier(target);
  std::vector<std::pair<BlockId, VersionNo>> out;
  for (const auto& [block, versions] : by_block_) {
    // Newest version whose write is inside the frontier is the survivor;
    // everything older is superseded and safe to drop.
    VersionNo keep = 0;
    for (const auto& [v, seq] : versions)
      if (seq <= frontier) keep = std::max(keep, v);
    for (const auto& [v, seq] : versions)
      if (v < keep) out.emplace_back(block, v);
  }
  return out;
}

std::vector<SeqNo> DeLog::under_replicated(size_t target) const {
  std::vector<SeqNo> out;
  for (SeqNo s = stable_frontier(target) + 1; s <= head(); ++s) {
    const Update& u = at(s);
    if (u.kind == UpdateKind::WRITE && u.replica_count() < target)
      out.push_back(s);
  }
  return out;
}

std::vector<std::pair<BlockId, VersionNo>> DeLog::all_block_versions() const {
  std::vector<std::pair<BlockId, VersionNo>> out;
  for (const auto& [block, versions] : by_block_)
    for (const auto& [v, seq] : versions) out.emplace_back(block, v);
  return out;
}

DeLog& StateLog::open(DeId de) {
  auto it = logs_.find(de);
  if (it == logs_.end()) it = logs_.emplace(de, DeLog(de)).first;
  return it->second;
}

DeLog* StateLog::find(DeId de) {
  auto it = logs_.find(de);
  return it == logs_.end() ? nullptr : &it->second;
}

const DeLog* StateLog::find(DeId de) const {
  auto it = logs_.find(de);
  return it == logs_.end() ? nullptr : &it->second;
}

}  // namespace decloud
