#include "decloud/rebuild.hpp"

#include <algorithm>
#include <set>

#include "decloud/bytes.hpp"

namespace decloud {

Digest20 RebuildResult::digest() const {
  ByteWriter w;
  for (const auto& [de, dl] : logs) {
    w.u64(de);
    w.u64(dl.head());
    for (SeqNo s = 1; s <= dl.head(); ++s) {
      const Update& u = dl.at(s);
      Bytes canon = canonical_signed_bytes(u);
      w.raw(canon.data(), canon.size());
      w.raw(u.sig.data(), u.sig.size());
      // Replication records in a canonical order.
      std::vector<Attachment> atts = u.attachments;
      std::sort(atts.begin(), atts.end(),
                [](const Attachment& a, const Attachment& b) {
                  return a.replicator < b.replicator;
                });
      w.u16(static_cast<uint16_t>(atts.size()));
      for (const Attachment& a : atts) {
        w.u64(a.replicator);
        w.u64(a.signer);
        w.raw(a.sig.data(), a.sig.size());
      }
    }
  }
  for (const auto& [key, content] : blocks.all()) {
    auto [de, b, v] = key;
    w.u64(de);
    w.u64(b);
    w.u32(v);
    w.raw(content.data(), content.size());
  }
  return content_hash({w.data(), w.size()});
}

RebuildResult rebuild_from_devices(const std::vector<const Device*>& devs,
                                   SigScheme scheme) {
  RebuildResult out;
  if (devs.empty()) return out;
  const KeyRing& keys = devs.front()->keys();

  std::set<DeId> des;
  for (const Device* d : devs)
    for (const auto& [de, dl] : d->log().all()) des.insert(de);

  for (DeId de : des) {
    DeLog merged(de);
    // Longest verified chain: extend one seq at a time from whichever
    // surviving log can supply a valid next entry.
    bool extended = true;
    while (extended) {
      extended = false;
      SeqNo want = merged.head() + 1;
      for (const Device* d : devs) {
        const DeLog* dl = d->log().find(de);
        if (!dl || dl->head() < want) continue;
        IngestOutcome o = merged.ingest(dl->at(want), scheme, keys);
        if (o.status == IngestOutcome::Status::applied) {
          extended = true;
          break;
        }
      }
    }
    // Union of replication records, verified on the way in.
    for (const Device* d : devs) {
      const DeLog* dl = d->log().find(de);
      if (!dl) continue;
      SeqNo lim = std::min(dl->head(), merged.head());
      for (SeqNo s = 1; s <= lim; ++s) {
        const Update& u = dl->at(s);
        if (u.kind != UpdateKind::WRITE) continue;
        for (const Attachment& a : u.attachments)
          merged.ingest_replication(
              attachment_to_update(de, u.block, u.version, a), scheme, keys,
              kCloudNodeId);
      }
    }
    // Newest version of every block, bytes from any survivor that still
    // has content matching the signed write.
    for (auto [b, v] : merged.all_block_versions()) {
      if (v != merged.latest_version(b)) continue;
      const Update* wr = merged.write_for(b, v);
      if (!wr) continue;
      bool found = false;
      for (const Device* d : devs) {
        const BlockData* c = d->store().get(de, b, v);
        if (!c) continue;
        if (content_hash({c->data(), c->size()}) != wr->hash) continue;
        out.blocks.put(de, b, v, *c);
        found = true;
        break;
      }
      if (!found) out.missing.emplace_back(de, b, v);
    }
    out.logs.emplace(de, std::move(merged));
  }
  return out;
}

}  // namespace decloud
