#pragma once

#include <deque>
#include <functional>
#include <memory>

#include "decloud/block_store.hpp"
#include "decloud/sim.hpp"
#include "decloud/state_log.hpp"
#include "decloud/task.hpp"

namespace decloud {

struct DeviceConfig {
  DeviceId id = kFirstDeviceId;
  VDuration heartbeat_period = 30 * kUsPerSec;
  SigScheme scheme = SigScheme::SYM_HMAC_SHA1;
  size_t replica_target = 3;
  // Whether the provider block store exists in this world, and whether
  // replica pulls go through it instead of straight to the writer.
  bool cloud_enabled = true;
  bool pull_from_cloud = true;
  // Local service time charged to each client op completion.
  VDuration op_service_us = kUsPerMs;
};

// A write that exists only on this device: authored while holding the lease
// but rolled back before the coordinator acknowledged it. Replayed under a
// fresh lease, or quarantined if someone else advanced the block meanwhile.
struct PendingWrite {
  DeId de = 0;
  BlockId block = 0;
  BlockData plain{};
  VersionNo base_version = 0;
  // Pre-rollback identity, so the replay can be dropped when the original
  // turns out to have reached the coordinator after all.
  SeqNo orig_seq = 0;
  Digest20 orig_hash{};
};

namespace devdetail {

// One-shot suspension point. Fire-side sets the payload, flips done, and
// resumes; crash-side simply clears the registries so nothing ever resumes.
struct Waiter {
  bool done = false;
  bool positive = false;
  Errc err = Errc::ok;
  BlockData block{};
  std::coroutine_handle<> h;
};
using WaiterPtr = std::shared_ptr<Waiter>;

// Raw pointer on purpose: every caller keeps a strong WaiterPtr alive across
// the suspension, and a trivially destructible awaiter sidesteps a g++ 11
// miscompile that runs member destructors of aggregate awaiter temporaries
// twice (double-releasing a shared_ptr member).
struct WaitOn {
  Waiter* w;
  bool await_ready() const noexcept { return w->done; }
  void await_suspend(std::coroutine_handle<> h) const { w->h = h; }
  void await_resume() const noexcept {}
};

}  // namespace devdetail

// One user device: verified log replica, block store, lease state machine,
// replication and GC duty, and the client-facing byte API. Client ops are
// coroutines; one runs at a time and the rest queue.
class Device : public Actor {
 public:
  Device(SimWorld& sim, DeviceConfig cfg, KeyRing keys);

  void controller_start();
  void controller_stop();

  // Async client API. Callbacks fire from a scheduled event, never inline.
  void submit_create(DeId de, uint64_t blocks, std::function<void(Errc)> cb);
  void submit_read(DeId de, uint64_t addr, uint32_t len,
                   std::function<void(Errc, Bytes)> cb);
  void submit_write(DeId de, uint64_t addr, Bytes data,
                    std::function<void(Errc)> cb);
  size_t inflight_ops() const {
    return op_queue_.size() + (op_active_ ? 1 : 0);
  }

  DeviceId id() const { return cfg_.id; }
  const DeviceConfig& config() const { return cfg_; }
  const StateLog& log() const { return log_; }
  StateLog& log_mut() { return log_; }
  const BlockStore& store() const { return store_; }
  BlockStore& store_mut() { return store_; }
  const KeyRing& keys() const { return keys_; }
  bool holds_lease(DeId de) const;
  SeqNo acked(DeId de) const;
  void seed_acked(DeId de, SeqNo s) { acked_[de] = s; }
  // Pre-start only: adopt the holder role the seeded log already names us
  // for, as a long-running deployment would have it warm.
  void seed_lease_held(DeId de) { become_held(de); }
  const std::vector<PendingWrite>& quarantined() const { return quarantine_; }
  size_t pending_write_count() const;
  void set_post_gc_hook(std::function<void(Device&)> h) {
    post_gc_hook_ = std::move(h);
  }

  void on_message(DeviceId from, const Message& m) override;
  void on_crash() override;
  void on_restart() override;

 private:
  enum class LeaseState { not_held, acquiring, held, revoking };
  struct Lease {
    LeaseState state = LeaseState::not_held;
    VDuration backoff = kUsPerSec;
    bool retry_scheduled = false;
    int unknown_tries = 0;
    // incoming transfer / resync catch-up target
    SeqNo seal_seq = 0;
    bool seal_active = false;
    VTime seal_started = 0;
    bool seal_faulted = false;
    // outgoing transfer
    DeviceId give_to = 0;
    bool transfer_appended = false;
    // recovery
    bool recovering = false;
    SeqNo assume_seq = 0;
    DeviceId last_nominee = 0;
    std::vector<devdetail::WaiterPtr> waiters;
  };
  struct QueuedOp {
    std::function<task<void>()> make;
    std::function<void()> fail;  // crash-path client callback
  };
  struct OpSlot {
    op_root root;
    std::function<void()> fail;
  };
  struct DutyState {
    int attempts = 0;
    bool inflight = false;
  };
  using Key3 = std::tuple<DeId, BlockId, VersionNo>;

  // --- scheduling helpers ---
  void at(VDuration delay, std::function<void()> fn);
  auto sleep(VDuration d);
  void spawn_bg(task<void> t);
  static void fire(const devdetail::WaiterPtr& w, bool positive,
                   Errc err = Errc::ok);

  // --- tick machinery ---
  void tick();
  void flush_de(DeId de);
  void maybe_noop(DeId de);
  void fetch_state(DeId de);
  SeqNo fetch_cursor(const DeLog& dl) const;
  void replication_duty();
  void run_gc();
  void check_self_demotion();

  // --- lease machinery ---
  Lease& lease(DeId de) { return leases_[de]; }
  bool holder_like(const Lease& l) const {
    return l.state == LeaseState::held || l.state == LeaseState::revoking;
  }
  void start_acquire(DeId de);
  void schedule_acquire_retry(DeId de);
  void become_held(DeId de);
  void demote(DeId de, bool rollback);
  void fail_lease_waiters(DeId de, Errc e);
  void fire_lease_waiters(DeId de);
  void progress_transfer(DeId de);
  void rollback_unacked(DeId de);
  void begin_catchup(DeId de, SeqNo target);
  void catchup_pump(DeId de);
  void check_seal(DeId de);
  void replay_pending(DeId de);
  task<void> recover_lease(DeId de, DeviceId failed, bool forced_self);

  // --- op plumbing ---
  void enqueue_op(QueuedOp op);
  void pump_ops();
  void complete_op(std::function<void()> fire_cb);
  void require_holder(DeId de) const;
  task<void> op_create(DeId de, uint64_t blocks, std::function<void(Errc)> cb);
  task<void> op_read(DeId de, uint64_t addr, uint32_t len,
                     std::function<void(Errc, Bytes)> cb);
  task<void> op_write(DeId de, uint64_t addr, Bytes data,
                      std::function<void(Errc)> cb);
  task<void> ensure_lease(DeId de);
  task<BlockData> get_block_plain(DeId de, BlockId b);
  task<BlockData> fetch_block(DeId de, Update w);
  void write_block_local(DeId de, BlockId b, const BlockData& plain);
  void store_verified(DeId de, BlockId b, VersionNo v, const BlockData& c);

  // --- wire in/out ---
  void ingest_update(const Update& u);
  void ingest_replication(const Update& r);
  void send_update(DeId de, SeqNo seq);
  void send_replication_record(DeId de, BlockId b, VersionNo v,
                               DeviceId replicator);
  void handle_block_request(DeviceId from, const Message& m);
  void handle_block_response(DeviceId from, const Message& m);
  void handle_switch_reply(DeId de, const LhSwitchReplyBody& b);
  void handle_update_ack(DeId de, SeqNo seq);
  void handle_update_reject(DeId de, const UpdateRejectBody& b);

  std::vector<DeviceId> duty_eligible(const DeLog& dl) const;
  size_t live_replica_count(const Update& w) const;
  bool devtab_ok(DeviceId id) const;

  SimWorld& sim_;
  DeviceConfig cfg_;
  KeyRing keys_;

  // Durable across crashes.
  StateLog log_;
  BlockStore store_;
  std::map<DeId, SeqNo> acked_;
  std::map<DeId, std::vector<PendingWrite>> pending_;
  std::vector<PendingWrite> quarantine_;
  std::map<DeId, uint64_t> created_des_;  // de -> size hint, for re-register

  // Volatile: reset wholesale on crash.
  uint64_t epoch_ = 0;
  bool running_ = false;
  VTime last_hb_ack_ = 0;
  std::map<DeviceId, DevtabEntry> devtab_;
  std::map<DeId, Lease> leases_;
  std::map<DeId, SeqNo> last_flush_head_;
  std::map<DeId, SeqNo> gap_reported_at_;
  std::map<Key3, std::vector<devdetail::WaiterPtr>> block_waiters_;
  std::map<Key3, DutyState> duty_;
  std::set<Key3> attested_;
  std::map<DeviceId, std::vector<devdetail::WaiterPtr>> ping_waiters_;
  std::map<DeId, std::vector<devdetail::WaiterPtr>> create_waiters_;
  std::deque<QueuedOp> op_queue_;
  std::optional<OpSlot> op_slot_;
  bool op_active_ = false;
  std::map<uint64_t, op_root> bg_;
  uint64_t next_bg_ = 0;

  std::function<void(Device&)> post_gc_hook_;
};

}  // namespace decloud
