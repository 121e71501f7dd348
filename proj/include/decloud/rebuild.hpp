#pragma once

#include "decloud/device.hpp"

namespace decloud {

// Offline reconstruction from surviving user devices only: no coordinator,
// no provider store. Per DE, the longest verified chain extractable from
// the union of their logs, every replication record they kept, and the
// bytes of each block's newest version found on any of them.
struct RebuildResult {
  std::map<DeId, DeLog> logs;
  BlockStore blocks;  // newest version per block
  std::vector<std::tuple<DeId, BlockId, VersionNo>> missing;

  bool complete() const { return missing.empty(); }
  // Digest over logs (canonical bytes, signatures, replication records) and
  // recovered block content; equal digests mean bit-exact recovery.
  Digest20 digest() const;
};

RebuildResult rebuild_from_devices(const std::vector<const Device*>& devs,
                                   SigScheme scheme);

}  // namespace decloud
