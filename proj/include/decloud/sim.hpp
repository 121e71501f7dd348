#pragma once

#include <functional>
#include <map>
#include <queue>
#include <random>
#include <set>
#include <string>

#include "decloud/messages.hpp"

namespace decloud {

// Per-node access capacity; 0 means unlimited.
struct NodeNetConfig {
  uint64_t up_bps = 0;
  uint64_t down_bps = 0;
};

// Propagation delay range shared by all links, sampled per message.
struct NetConfig {
  uint64_t lat_min_us = 200;
  uint64_t lat_max_us = 2000;
};

struct FaultEvent {
  VTime t = 0;
  FaultKind kind{};
  DeviceId reporter = 0;
  DeId de = 0;
  uint64_t detail = 0;  // seq or block, depending on kind
};

struct TraceEntry {
  enum class Ev : uint8_t { send, deliver, drop, crash, restart,
                            partition, heal, fault };
  VTime t = 0;
  Ev ev = Ev::send;
  DeviceId from = 0;
  DeviceId to = 0;
  MsgKind kind = MsgKind::PING;
  DeId de = 0;
  uint32_t bytes = 0;
};

struct NodeTraffic {
  uint64_t up_block = 0;
  uint64_t up_ctrl = 0;
  uint64_t down_block = 0;
  uint64_t down_ctrl = 0;
  uint64_t lease_switches = 0;
};

struct Metrics {
  std::map<DeviceId, NodeTraffic> traffic;
  uint64_t signed_updates_sent = 0;
  uint64_t msgs_sent = 0;
  uint64_t msgs_delivered = 0;
  uint64_t msgs_dropped = 0;
  std::vector<VDuration> replication_latency_us;

  uint64_t total_up_bytes() const;
  VDuration max_replication_latency() const;
};

std::string node_name(DeviceId id);

// Always-on cross-checks computed from ground truth the protocol code never
// sees. Violations throw: they mean the simulation broke an invariant, not
// that an adversary was caught.
class Oracle {
 public:
  void set_exclusivity_checked(bool on) { exclusivity_checked_ = on; }

  // Seq-bearing updates the coordinator has stored, keyed (de, seq). This is
  // the distribution channel, so everything any device ingests must be
  // byte-equal to a recorded variant.
  void record_distributed(const Update& u);
  void record_adversary_variant(const Update& u);
  void check_ingested(const Update& u) const;

  // Block ground truth, keyed (de, block, version). Records both ciphertext
  // and plaintext digests; retract when a rollback frees the version number.
  void record_authored_block(DeId de, BlockId b, VersionNo v,
                             const Digest20& cipher_hash,
                             const Digest20& plain_hash, VTime now,
                             DeviceId writer);
  void retract_block(DeId de, BlockId b, VersionNo v);
  // Every store anywhere funnels through here. `verified` marks stores the
  // storing node claims to have hash-checked.
  void on_stored(DeviceId node, DeId de, BlockId b, VersionNo v,
                 const BlockData& data, bool verified, VTime now,
                 Metrics& metrics);

  void on_lease_state(DeviceId dev, DeId de, bool held);
  bool someone_holds(DeId de) const;

  void check_accounting(const Metrics& m) const;

  const Digest20* authored_hash(DeId de, BlockId b, VersionNo v) const;
  // Version whose recorded plaintext digest matches, 0 if none. Lets a
  // harness check that reads return authored content, monotonically.
  VersionNo version_of_plain(DeId de, BlockId b, const Digest20& plain) const;

  bool tripped() const { return !trip_.empty(); }
  const std::string& trip_message() const { return trip_; }

 private:
  [[noreturn]] void violation(const std::string& what) const;

  std::map<std::pair<DeId, SeqNo>, std::vector<Bytes>> variants_;
  struct BlockTruth {
    Digest20 hash{};
    Digest20 plain{};
    VTime created = 0;
    std::set<DeviceId> copies;
    bool latency_recorded = false;
  };
  std::map<std::tuple<DeId, BlockId, VersionNo>, BlockTruth> blocks_;
  std::map<DeId, std::set<DeviceId>> held_;
  bool exclusivity_checked_ = true;
  mutable std::string trip_;
};

// A protocol participant. Volatile state must be reset in on_crash and
// rebuilt in on_restart; durable state persists across both.
class Actor {
 public:
  virtual ~Actor() = default;
  virtual void on_message(DeviceId from, const Message& m) = 0;
  virtual void on_crash() {}
  virtual void on_restart() {}
};

// Deterministic discrete-event world: virtual microsecond clock, one event
// queue, per-node access pipes modelled as serialization delay, per-link
// FIFO delivery. Identical seeds and configs replay identically.
class SimWorld {
 public:
  SimWorld(uint64_t seed, NetConfig net);

  VTime now() const { return now_; }
  uint64_t seed() const { return seed_; }
  // Uniform in [lo, hi], deterministic per seed.
  uint64_t rand_range(uint64_t lo, uint64_t hi);

  void add_node(DeviceId id, Actor* actor, NodeNetConfig nc = {});
  void send(DeviceId from, DeviceId to, Message m);
  void schedule(VDuration delay, std::function<void()> fn);

  void run_until(VTime t);
  // Drain every pending event regardless of time (tests only).
  void drain();

  void set_partitioned(DeviceId id, bool on);
  bool is_partitioned(DeviceId id) const { return partitioned_.count(id); }
  void crash(DeviceId id);
  void restart(DeviceId id);
  bool is_up(DeviceId id) const { return up_.count(id) != 0; }
  std::vector<DeviceId> node_ids() const;

  Metrics& metrics() { return metrics_; }
  const Metrics& metrics() const { return metrics_; }
  Oracle& oracle() { return oracle_; }

  void report_fault(FaultKind kind, DeviceId reporter, DeId de,
                    uint64_t detail);
  const std::vector<FaultEvent>& faults() const { return faults_; }
  bool saw_fault(FaultKind kind) const;

  const std::vector<TraceEntry>& trace_ring() const { return ring_; }
  std::vector<TraceEntry> trace_in_order() const;

 private:
  void trace(TraceEntry::Ev ev, DeviceId from, DeviceId to, MsgKind kind,
             DeId de, uint32_t bytes);
  void deliver(DeviceId from, DeviceId to, Message m);

  struct Ev {
    VTime t;
    uint64_t id;
    std::function<void()> fn;
    bool operator>(const Ev& o) const {
      return t != o.t ? t > o.t : id > o.id;
    }
  };

  uint64_t seed_;
  NetConfig net_;
  std::mt19937_64 rng_;
  VTime now_ = 0;
  uint64_t next_ev_ = 0;
  std::priority_queue<Ev, std::vector<Ev>, std::greater<>> queue_;

  struct NodeState {
    Actor* actor = nullptr;
    NodeNetConfig net;
    VTime up_busy_until = 0;
    VTime down_busy_until = 0;
  };
  std::map<DeviceId, NodeState> nodes_;
  std::set<DeviceId> up_;
  std::set<DeviceId> partitioned_;
  std::map<std::pair<DeviceId, DeviceId>, VTime> link_last_;

  Metrics metrics_;
  Oracle oracle_;
  std::vector<FaultEvent> faults_;
  std::vector<TraceEntry> ring_;
  size_t ring_pos_ = 0;
};

}  // namespace decloud
