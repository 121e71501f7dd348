#pragma once

#include "decloud/block_store.hpp"
#include "decloud/sim.hpp"

namespace decloud {

// Provider-side misbehaviour on the block path. The store holds opaque
// ciphertext, so every lie is either garbage content or denial.
struct CloudPolicy {
  bool corrupt_blocks = false;  // serve bit-flipped content
  bool drop_blocks = false;     // claim to have nothing
};

// The provider's bulk store: keyless, unverified, untrusted. Mirrors every
// DE's update stream off the coordinator and pulls each written block
// version once from whoever has it, so replicas and readers can fetch here
// instead of debiting the writer's uplink again.
class CloudNode : public Actor {
 public:
  explicit CloudNode(SimWorld& sim, VDuration tick_period = 10 * kUsPerSec);

  void controller_start();
  void controller_stop();

  CloudPolicy& policy() { return policy_; }
  const BlockStore& store() const { return store_; }
  BlockStore& store_mut() { return store_; }
  size_t tracked_des() const { return mirror_.size(); }

  void on_message(DeviceId from, const Message& m) override;
  void on_crash() override;
  void on_restart() override;

 private:
  struct DeMirror {
    std::map<SeqNo, Update> updates;  // raw; nothing here is verifiable
    DeviceId holder = 0;
    std::map<std::pair<BlockId, VersionNo>, std::vector<DeviceId>> sources;
  };
  using Key3 = std::tuple<DeId, BlockId, VersionNo>;

  void tick();
  void note_source(DeMirror& mir, BlockId b, VersionNo v, DeviceId who);

  SimWorld& sim_;
  VDuration period_;
  bool running_ = false;
  uint64_t epoch_ = 0;
  CloudPolicy policy_;

  // Durable: provider storage survives restarts.
  BlockStore store_;
  std::map<DeId, DeMirror> mirror_;

  // Volatile retry counters.
  std::map<Key3, int> pull_attempts_;
};

}  // namespace decloud
