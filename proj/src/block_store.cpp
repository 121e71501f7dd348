#include "decloud/block_store.hpp"

namespace decloud {

bool BlockStore::put(DeId de, BlockId block, VersionNo version,
                     const BlockData& data) {
  auto [it, inserted] = blocks_.emplace(Key{de, block, version}, data);
  if (!inserted && it->second != data) return false;
  return true;
}

const BlockData* BlockStore::get(DeId de, BlockId block,
                                 VersionNo version) const {
  auto it = blocks_.find(Key{de, block, version});
  return it == blocks_.end() ? nullptr : &it->second;
}

bool BlockStore::has(DeId de, BlockId block, VersionNo version) const {
  return blocks_.count(Key{de, block, version}) != 0;
}

void BlockStore::erase(DeId de, BlockId block, VersionNo version) {
  blocks_.erase(Key{de, block, version});
}

void BlockStore::erase_de(DeId de) {
  auto it = blocks_.lower_bound(Key{de, 0, 0});
  while (it != blocks_.end() && std::get<0>(it->first) == de)
    it = blocks_.erase(it);
}

}  // namespace decloud
