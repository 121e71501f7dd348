#pragma once

#include <map>

#include "decloud/types.hpp"

namespace decloud {

// Version-addressed block storage, always ciphertext. Content under one
// (de, block, version) key is immutable: re-putting identical bytes is a
// no-op, differing bytes are refused.
class BlockStore {
 public:
  using Key = std::tuple<DeId, BlockId, VersionNo>;

  // Returns false if the key already holds different content.
  bool put(DeId de, BlockId block, VersionNo version, const BlockData& data);
  const BlockData* get(DeId de, BlockId block, VersionNo version) const;
  bool has(DeId de, BlockId block, VersionNo version) const;
  void erase(DeId de, BlockId block, VersionNo version);
  void erase_de(DeId de);

  size_t count() const { return blocks_.size(); }
  uint64_t bytes_stored() const { return blocks_.size() * kBlockSize; }
  const std::map<Key, BlockData>& all() const { return blocks_; }

 private:
  std::map<Key, BlockData> blocks_;
};

}  // namespace decloud
