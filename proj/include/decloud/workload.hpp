#pragma once

#include <vector>

#include "decloud/cloud_node.hpp"
#include "decloud/coordinator.hpp"
#include "decloud/device.hpp"

namespace decloud {

// One planned client operation. `addr`/`len` are byte coordinates; create
// reuses `addr` as the DE size in blocks. `fill` seeds the written payload.
struct OpRecord {
  enum class Kind : uint8_t { create, write, read };
  Kind kind = Kind::read;
  DeId de = 0;
  uint64_t addr = 0;
  uint32_t len = 0;
  uint64_t fill = 0;
};

// Deterministic payload: every (fill, len) pair expands to the same bytes.
Bytes fill_bytes(uint64_t fill, size_t len);
BlockData fill_block(uint64_t fill);

struct DriverStats {
  uint64_t ok = 0;
  uint64_t failed = 0;
  uint64_t reads_checked = 0;
  std::map<Errc, uint64_t> errors;
  VTime last_done = 0;
};

// Runs a plan one op at a time: each completion triggers the next submit,
// so the device is never idle while work remains (closed loop). Ops in the
// plan may target different devices; that serializes them globally, which
// is how contending writers are made to alternate. Failures are recorded
// and the loop moves on after a short pause.
class SequentialDriver {
 public:
  using ReadCheck =
      std::function<void(Device&, const OpRecord&, const Bytes&)>;

  SequentialDriver(SimWorld& sim, std::vector<std::pair<Device*, OpRecord>> plan)
      : sim_(sim), plan_(std::move(plan)) {}

  void set_read_check(ReadCheck c) { check_ = std::move(c); }
  void start();
  // No further submits; lets a world drain fully at scenario end.
  void stop() { stopped_ = true; }
  bool done() const { return started_ && idx_ >= plan_.size(); }
  const DriverStats& stats() const { return stats_; }

 private:
  void step();
  void finish_op(Errc e);

  SimWorld& sim_;
  std::vector<std::pair<Device*, OpRecord>> plan_;
  size_t idx_ = 0;
  bool started_ = false;
  bool stopped_ = false;
  DriverStats stats_;
  ReadCheck check_;
};

// Builds a per-device plan: same device for every op.
std::vector<std::pair<Device*, OpRecord>> plan_for(Device& dev,
                                                   std::vector<OpRecord> ops);

// Pre-seeds a quiescent world: a DE with signed history at the coordinator,
// matching logs/stores on the chosen devices, and oracle bookkeeping, all
// without touching the wire. Devices listed in `skip_log` get no log (they
// discover the DE later); `replicators` name the devices besides the writer
// holding block copies.
struct SeedSpec {
  DeId de = 0;
  DeviceId writer = 0;
  uint64_t blocks = 0;
  std::vector<DeviceId> replicators;
  std::vector<DeviceId> skip_log;
  bool cloud_copy = true;  // pre-load the cloud node store too
};

struct SeededLog {
  std::vector<Update> updates;  // seq-bearing, in order
  std::vector<Update> records;  // replication attachments
};

class WorldSeeder {
 public:
  WorldSeeder(SimWorld& sim, Coordinator& coord, CloudNode* cloud,
              std::vector<Device*> devices, SigScheme scheme)
      : sim_(sim), coord_(coord), cloud_(cloud),
        devices_(std::move(devices)), scheme_(scheme) {}

  SeededLog seed(const SeedSpec& spec);

  // The plaintext seeded for (de, block); version 1 everywhere.
  static BlockData seeded_plain(DeId de, BlockId b);

 private:
  SimWorld& sim_;
  Coordinator& coord_;
  CloudNode* cloud_;
  std::vector<Device*> devices_;
  SigScheme scheme_;
};

}  // namespace decloud
