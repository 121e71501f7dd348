#include "decloud/device.hpp"

#include <algorithm>

#include "decloud/bytes.hpp"

namespace decloud {

namespace {

constexpr VDuration kAcquireBackoffCap = 32 * kUsPerSec;
constexpr VDuration kCatchupPumpPeriod = 500 * kUsPerMs;
constexpr VDuration kPingTimeout = 2 * kUsPerSec;
constexpr VDuration kCreateTimeout = kUsPerSec;
constexpr int kCreateTries = 3;
constexpr int kUnknownDeTries = 3;
constexpr VDuration kFetchDelays[] = {500 * kUsPerMs, kUsPerSec,
                                      2 * kUsPerSec, 4 * kUsPerSec,
                                      8 * kUsPerSec};

std::span<const uint8_t> as_span(const BlockData& b) {
  return std::span<const uint8_t>(b.data(), b.size());
}

}  // namespace

Device::Device(SimWorld& sim, DeviceConfig cfg, KeyRing keys)
    : sim_(sim), cfg_(cfg), keys_(std::move(keys)) {}

// --- scheduling helpers ---

void Device::at(VDuration delay, std::function<void()> fn) {
  uint64_t e = epoch_;
  sim_.schedule(delay, [this, e, fn = std::move(fn)] {
    if (running_ && epoch_ == e) fn();
  });
}

auto Device::sleep(VDuration d) {
  struct SleepAwait {
    Device* dev;
    VDuration d;
    bool await_ready() const noexcept { return false; }
    void await_suspend(std::coroutine_handle<> h) const {
      dev->at(d, [h] { h.resume(); });
    }
    void await_resume() const noexcept {}
  };
  return SleepAwait{this, d};
}

void Device::spawn_bg(task<void> t) {
  uint64_t tok = next_bg_++;
  // Captureless wrapper coroutine: parameters outlive every suspension.
  auto wrap = [](Device* self, uint64_t tok, task<void> inner) -> task<void> {
    try {
      co_await inner;
    } catch (const Error&) {
      // Background duties fail quietly; faults were already reported.
    }
    self->at(0, [self, tok] { self->bg_.erase(tok); });
  };
  bg_.emplace(tok, op_root(wrap(this, tok, std::move(t))));
  bg_.at(tok).start();
}

void Device::fire(const devdetail::WaiterPtr& w, bool positive, Errc err) {
  if (w->done) return;
  w->done = true;
  w->positive = positive;
  w->err = err;
  if (w->h) w->h.resume();
}

// --- lifecycle ---

void Device::controller_start() {
  if (running_) return;
  running_ = true;
  epoch_++;
  last_hb_ack_ = sim_.now();
  VDuration stagger = 1 + (cfg_.id * 1237537) % cfg_.heartbeat_period;
  at(stagger, [this] { tick(); });
}

void Device::controller_stop() {
  if (!running_) return;
  for (auto& [de, l] : leases_) {
    if (holder_like(l)) {
      flush_de(de);
      demote(de, false);
    }
  }
  running_ = false;
  epoch_++;
}

void Device::on_crash() {
  running_ = false;
  epoch_++;
  // Nothing may resume once the registries are gone; clear them before the
  // frames they point into are destroyed.
  block_waiters_.clear();
  ping_waiters_.clear();
  create_waiters_.clear();
  for (auto& [de, l] : leases_) l.waiters.clear();
  std::vector<std::function<void()>> fails;
  if (op_slot_ && op_slot_->fail) fails.push_back(std::move(op_slot_->fail));
  for (auto& q : op_queue_)
    if (q.fail) fails.push_back(std::move(q.fail));
  op_queue_.clear();
  if (op_slot_) {
    op_slot_->root.abandon();
    op_slot_.reset();
  }
  op_active_ = false;
  bg_.clear();
  // Client callbacks survive the crash; they belong to the caller.
  for (auto& f : fails) sim_.schedule(0, std::move(f));
  for (auto& [de, l] : leases_)
    if (holder_like(l)) sim_.oracle().on_lease_state(cfg_.id, de, false);
  leases_.clear();
  devtab_.clear();
  last_flush_head_.clear();
  gap_reported_at_.clear();
  duty_.clear();
  attested_.clear();
  last_hb_ack_ = 0;
}

void Device::on_restart() {
  running_ = true;
  epoch_++;
  last_hb_ack_ = sim_.now();
  // Whatever the coordinator never acked may be gone from the world; pull
  // it out of the log into pending replays before talking to anyone.
  for (auto& [de, dl] : log_.all_mut()) (void)dl, rollback_unacked(de);
  VDuration stagger = 1 + (cfg_.id * 1237537) % cfg_.heartbeat_period;
  at(stagger, [this] { tick(); });
}

// --- accessors ---

bool Device::holds_lease(DeId de) const {
  auto it = leases_.find(de);
  return it != leases_.end() && (it->second.state == LeaseState::held ||
                                 it->second.state == LeaseState::revoking);
}

SeqNo Device::acked(DeId de) const {
  auto it = acked_.find(de);
  return it == acked_.end() ? 0 : it->second;
}

size_t Device::pending_write_count() const {
  size_t n = 0;
  for (auto& [de, v] : pending_) n += v.size();
  return n;
}

// --- tick machinery ---

void Device::tick() {
  if (!running_) return;
  Message hb;
  hb.kind = MsgKind::HEARTBEAT;
  hb.sender = cfg_.id;
  sim_.send(cfg_.id, kCoordinatorId, std::move(hb));

  check_self_demotion();

  for (auto& [de, dl] : log_.all()) {
    Lease& l = lease(de);
    if (l.state == LeaseState::held) maybe_noop(de);
    if (holder_like(l) || l.assume_seq != 0) flush_de(de);
    fetch_state(de);
    auto pit = pending_.find(de);
    if (pit != pending_.end() && !pit->second.empty() &&
        l.state == LeaseState::not_held)
      start_acquire(de);
  }

  Message df;
  df.kind = MsgKind::DEVTAB_FETCH;
  df.sender = cfg_.id;
  sim_.send(cfg_.id, kCoordinatorId, std::move(df));

  replication_duty();
  run_gc();

  at(cfg_.heartbeat_period, [this] { tick(); });
}

void Device::flush_de(DeId de) {
  DeLog* dl = log_.find(de);
  if (!dl) return;
  for (SeqNo s = acked(de) + 1; s <= dl->head(); ++s) {
    if (dl->at(s).signer != cfg_.id) continue;
    send_update(de, s);
  }
  last_flush_head_[de] = dl->head();
}

void Device::maybe_noop(DeId de) {
  DeLog* dl = log_.find(de);
  if (!dl) return;
  if (dl->head() != acked(de)) return;
  auto it = last_flush_head_.find(de);
  if (it == last_flush_head_.end() || it->second != dl->head()) return;
  // Tenure mark: make sure the newest entry carries our signature, so a
  // recovery walk sees who held last. One suffices; holding quietly after
  // that appends nothing.
  if (!dl->empty() && dl->at(dl->head()).signer == cfg_.id) return;
  Update n;
  n.kind = UpdateKind::NOOP;
  n.de = de;
  n.signer = cfg_.id;
  dl->append_local(std::move(n));
}

SeqNo Device::fetch_cursor(const DeLog& dl) const {
  auto ur = dl.under_replicated(cfg_.replica_target);
  // Refetch from just before the oldest thin write so its replication
  // records come back with it; otherwise only ask for news.
  if (!ur.empty()) return ur.front() - 1;
  return dl.head();
}

void Device::fetch_state(DeId de) {
  const DeLog* dl = log_.find(de);
  if (!dl) return;
  Message m;
  m.kind = MsgKind::STATE_FETCH;
  m.de = de;
  m.sender = cfg_.id;
  m.body = StateFetchBody{fetch_cursor(*dl)};
  sim_.send(cfg_.id, kCoordinatorId, std::move(m));
}

std::vector<DeviceId> Device::duty_eligible(const DeLog& dl) const {
  std::vector<DeviceId> out;
  DeviceId lh = dl.lease_holder();
  for (auto& [id, e] : devtab_) {
    if (id < kFirstDeviceId) continue;
    if (e.status != kDevOk) continue;
    if (id == lh) continue;
    out.push_back(id);
  }
  return out;
}

size_t Device::live_replica_count(const Update& w) const {
  size_t n = 0;
  for (DeviceId r : w.replicas())
    if (r == cfg_.id || devtab_ok(r)) ++n;
  return n;
}

bool Device::devtab_ok(DeviceId id) const {
  auto it = devtab_.find(id);
  return it != devtab_.end() && it->second.status == kDevOk;
}

void Device::replication_duty() {
  for (auto& [de, dl] : log_.all()) {
    auto eligible = duty_eligible(dl);
    if (eligible.empty()) continue;
    SeqNo frontier = dl.stable_frontier(cfg_.replica_target);
    for (SeqNo s = frontier + 1; s <= dl.head(); ++s) {
      const Update& w = dl.at(s);
      if (w.kind != UpdateKind::WRITE) continue;
      size_t live = live_replica_count(w);
      if (live >= cfg_.replica_target) continue;
      size_t need = cfg_.replica_target - live;

      // Deterministic rendezvous: every device computes the same ranking
      // from the write's coordinates, so assignments never collide.
      ByteWriter bw;
      bw.u64(de);
      bw.u64(w.block);
      bw.u32(w.version);
      Digest20 d = content_hash(std::span<const uint8_t>(bw.data(), bw.size()));
      uint64_t start = 0;
      for (int i = 0; i < 8; ++i) start = start << 8 | d[i];
      size_t idx = static_cast<size_t>(start % eligible.size());

      bool mine = false;
      size_t chosen = 0;
      for (size_t i = 0; i < eligible.size() && chosen < need; ++i) {
        DeviceId c = eligible[(idx + i) % eligible.size()];
        if (w.has_replica(c)) continue;
        ++chosen;
        if (c == cfg_.id) {
          mine = true;
          break;
        }
      }
      if (!mine) continue;

      if (store_.has(de, w.block, w.version)) {
        send_replication_record(de, w.block, w.version, cfg_.id);
        continue;
      }
      Key3 key{de, w.block, w.version};
      DutyState& duty = duty_[key];
      if (duty.inflight) continue;
      std::vector<DeviceId> srcs;
      if (cfg_.cloud_enabled && cfg_.pull_from_cloud) {
        // Replica pulls go through the provider store so the writer's
        // access link is debited once, no matter how many replicas form.
        srcs.push_back(kCloudNodeId);
      } else {
        for (DeviceId r : w.replicas()) {
          if (r == cfg_.id) continue;
          if (std::find(srcs.begin(), srcs.end(), r) == srcs.end())
            srcs.push_back(r);
        }
      }
      if (srcs.empty()) continue;
      DeviceId src = srcs[duty.attempts % srcs.size()];
      duty.attempts++;
      duty.inflight = true;
      Message req;
      req.kind = MsgKind::BLOCK_REQUEST;
      req.de = de;
      req.sender = cfg_.id;
      req.body = BlockRequestBody{w.block, w.version};
      sim_.send(cfg_.id, src, std::move(req));
    }
  }
}

void Device::run_gc() {
  for (auto& [de, dl] : log_.all()) {
    for (auto [b, v] : dl.gc_eligible(cfg_.replica_target))
      store_.erase(de, b, v);
  }
  if (post_gc_hook_) post_gc_hook_(*this);
}

void Device::check_self_demotion() {
  if (sim_.now() <= last_hb_ack_ + 2 * cfg_.heartbeat_period) return;
  // Cut off from the coordinator long enough that it may hand the lease
  // elsewhere: stop acting like a holder before that can happen.
  for (auto& [de, l] : leases_) {
    if (holder_like(l)) {
      demote(de, true);
      fail_lease_waiters(de, Errc::disconnected);
    } else if (l.state == LeaseState::acquiring && !l.recovering) {
      l.state = LeaseState::not_held;
      l.seal_active = false;
      fail_lease_waiters(de, Errc::disconnected);
    }
  }
}

// --- lease machinery ---

void Device::start_acquire(DeId de) {
  Lease& l = lease(de);
  if (l.state != LeaseState::not_held && l.state != LeaseState::acquiring)
    return;
  l.state = LeaseState::acquiring;
  Message m;
  m.kind = MsgKind::LH_SWITCH;
  m.de = de;
  m.sender = cfg_.id;
  m.body = LhSwitchBody{cfg_.id};
  sim_.send(cfg_.id, kCoordinatorId, std::move(m));
  schedule_acquire_retry(de);
}

void Device::schedule_acquire_retry(DeId de) {
  Lease& l = lease(de);
  if (l.retry_scheduled) return;
  l.retry_scheduled = true;
  at(l.backoff, [this, de] {
    Lease& l = lease(de);
    l.retry_scheduled = false;
    if (l.state != LeaseState::acquiring) return;
    if (l.recovering || l.seal_active || l.assume_seq != 0) {
      // Another path is driving the acquisition; keep watch.
      schedule_acquire_retry(de);
      return;
    }
    l.backoff = std::min<VDuration>(l.backoff * 2, kAcquireBackoffCap);
    Message m;
    m.kind = MsgKind::LH_SWITCH;
    m.de = de;
    m.sender = cfg_.id;
    m.body = LhSwitchBody{cfg_.id};
    sim_.send(cfg_.id, kCoordinatorId, std::move(m));
    schedule_acquire_retry(de);
  });
}

void Device::become_held(DeId de) {
  Lease& l = lease(de);
  if (l.state == LeaseState::held) return;
  bool was_holderish = holder_like(l);
  l.state = LeaseState::held;
  l.backoff = kUsPerSec;
  l.unknown_tries = 0;
  l.seal_active = false;
  l.seal_seq = 0;
  l.recovering = false;
  l.assume_seq = 0;
  l.last_nominee = 0;
  if (!was_holderish) sim_.oracle().on_lease_state(cfg_.id, de, true);
  replay_pending(de);
  fire_lease_waiters(de);
}

void Device::demote(DeId de, bool rollback) {
  Lease& l = lease(de);
  if (holder_like(l)) sim_.oracle().on_lease_state(cfg_.id, de, false);
  l.state = LeaseState::not_held;
  l.seal_active = false;
  l.seal_seq = 0;
  l.give_to = 0;
  l.transfer_appended = false;
  l.assume_seq = 0;
  l.recovering = false;
  if (rollback) rollback_unacked(de);
}

void Device::fail_lease_waiters(DeId de, Errc e) {
  auto ws = std::move(lease(de).waiters);
  lease(de).waiters.clear();
  for (auto& w : ws) fire(w, false, e);
}

void Device::fire_lease_waiters(DeId de) {
  auto ws = std::move(lease(de).waiters);
  lease(de).waiters.clear();
  for (auto& w : ws) fire(w, true);
}

void Device::progress_transfer(DeId de) {
  Lease& l = lease(de);
  if (l.state != LeaseState::revoking) return;
  if (op_active_) return;  // finish the client op first
  DeLog* dl = log_.find(de);
  if (!dl) return;
  flush_de(de);
  if (acked(de) < dl->head()) return;
  if (!l.transfer_appended) {
    Update u;
    u.kind = UpdateKind::LEASE_HOLDER;
    u.de = de;
    u.old_lh = cfg_.id;
    u.new_lh = l.give_to;
    u.signer = cfg_.id;
    dl->append_local(std::move(u));
    l.transfer_appended = true;
    send_update(de, dl->head());
    return;
  }
  // Everything including the handover entry is acked: seal and let go.
  DeviceId target = l.give_to;
  Bytes seal = transfer_seal_bytes(de, dl->head(), cfg_.id, target);
  Message m;
  m.kind = MsgKind::LH_TRANSFER;
  m.de = de;
  m.sender = cfg_.id;
  m.body = LhTransferBody{
      dl->head(), sign(std::span<const uint8_t>(seal.data(), seal.size()),
                       cfg_.scheme, keys_, cfg_.id)};
  sim_.send(cfg_.id, target, std::move(m));
  sim_.oracle().on_lease_state(cfg_.id, de, false);
  l.state = LeaseState::not_held;
  l.give_to = 0;
  l.transfer_appended = false;
  auto pit = pending_.find(de);
  bool want = !l.waiters.empty() ||
              (pit != pending_.end() && !pit->second.empty());
  if (want) start_acquire(de);
}

void Device::rollback_unacked(DeId de) {
  DeLog* dlp = log_.find(de);
  if (!dlp) return;
  DeLog& dl = *dlp;
  SeqNo keep = std::min(acked(de), dl.head());
  if (dl.head() <= keep) return;

  // Final content per block across the doomed tail becomes a pending
  // replay; the version numbers themselves go back in the pool.
  std::map<BlockId, PendingWrite> caps;
  for (SeqNo s = keep + 1; s <= dl.head(); ++s) {
    const Update& u = dl.at(s);
    if (u.kind != UpdateKind::WRITE) continue;
    const BlockData* c = store_.get(de, u.block, u.version);
    if (!c) continue;
    PendingWrite pw;
    pw.de = de;
    pw.block = u.block;
    pw.plain = decrypt_block(*c, de, u.block, u.version, keys_);
    pw.orig_seq = s;
    pw.orig_hash = u.hash;
    caps[u.block] = std::move(pw);
  }
  for (SeqNo s = keep + 1; s <= dl.head(); ++s) {
    const Update& u = dl.at(s);
    if (u.kind != UpdateKind::WRITE) continue;
    store_.erase(de, u.block, u.version);
    sim_.oracle().retract_block(de, u.block, u.version);
  }
  dl.truncate_to(keep);
  for (auto& [b, pw] : caps) {
    pw.base_version = dl.latest_version(b);
    pending_[de].push_back(std::move(pw));
  }
}

void Device::begin_catchup(DeId de, SeqNo target) {
  Lease& l = lease(de);
  l.state = LeaseState::acquiring;
  bool fresh = !(l.seal_active && l.seal_seq == target);
  if (fresh) {
    l.seal_seq = target;
    l.seal_active = true;
    l.seal_started = sim_.now();
    l.seal_faulted = false;
    catchup_pump(de);
  } else {
    check_seal(de);
  }
}

void Device::catchup_pump(DeId de) {
  Lease& l = lease(de);
  check_seal(de);
  if (!l.seal_active || l.state != LeaseState::acquiring) return;
  if (!l.seal_faulted &&
      sim_.now() > l.seal_started + 2 * cfg_.heartbeat_period) {
    // The coordinator has had two full periods to produce the promised
    // history and still comes up short.
    l.seal_faulted = true;
    sim_.report_fault(FaultKind::suspect_truncation, cfg_.id, de, l.seal_seq);
  }
  fetch_state(de);
  at(kCatchupPumpPeriod, [this, de] { catchup_pump(de); });
}

void Device::check_seal(DeId de) {
  Lease& l = lease(de);
  if (l.state != LeaseState::acquiring || !l.seal_active) return;
  DeLog* dl = log_.find(de);
  if (!dl) return;
  if (dl->head() < l.seal_seq) return;
  if (!dl->empty() && dl->lease_holder() != cfg_.id) return;
  l.seal_active = false;
  l.seal_seq = 0;
  become_held(de);
}

void Device::replay_pending(DeId de) {
  auto it = pending_.find(de);
  if (it == pending_.end() || it->second.empty()) return;
  auto list = std::move(it->second);
  pending_.erase(it);
  DeLog* dl = log_.find(de);
  if (!dl) return;
  for (auto& pw : list) {
    VersionNo cur = dl->latest_version(pw.block);
    const Update* latest = cur ? dl->write_for(pw.block, cur) : nullptr;
    if (latest && latest->signer != cfg_.id && cur > pw.base_version) {
      // Someone else advanced this block while the replay waited; replaying
      // now would silently overwrite their data.
      sim_.report_fault(FaultKind::conflict_detected, cfg_.id, de, pw.block);
      quarantine_.push_back(std::move(pw));
      continue;
    }
    write_block_local(de, pw.block, pw.plain);
  }
}

task<void> Device::recover_lease(DeId de, DeviceId failed, bool forced_self) {
  DeLog& dl = log_.open(de);
  Lease& l = lease(de);

  if (failed != 0 && failed != cfg_.id) {
    // The recorded holder gets one chance to answer before anyone moves.
    auto w = std::make_shared<devdetail::Waiter>();
    ping_waiters_[failed].push_back(w);
    Message p;
    p.kind = MsgKind::PING;
    p.de = de;
    p.sender = cfg_.id;
    sim_.send(cfg_.id, failed, std::move(p));
    at(kPingTimeout, [w] { fire(w, false, Errc::unavailable); });
    co_await devdetail::WaitOn{w.get()};
    if (w->positive) {
      l.recovering = false;
      if (l.state == LeaseState::acquiring) schedule_acquire_retry(de);
      co_return;
    }
  }

  // Pull whatever the coordinator still has until it goes quiet.
  int quiet = 0;
  for (int rounds = 0; quiet < 2 && rounds < 8; ++rounds) {
    SeqNo h0 = dl.head();
    fetch_state(de);
    co_await sleep(700 * kUsPerMs);
    quiet = dl.head() == h0 ? quiet + 1 : 0;
  }
  if (!l.recovering || l.state != LeaseState::acquiring) co_return;

  DeviceId cand = cfg_.id;
  if (!forced_self) {
    // Walk the holder chain backwards for the freshest live ex-holder.
    for (SeqNo s = dl.head(); s >= 1; --s) {
      const Update& u = dl.at(s);
      if (u.kind != UpdateKind::LEASE_HOLDER) continue;
      DeviceId prev = u.old_lh;
      if (prev == 0 || prev == failed) continue;
      if (prev == cfg_.id || devtab_ok(prev)) {
        cand = prev;
        break;
      }
    }
  }

  if (cand != cfg_.id) {
    if (l.last_nominee == cand) {
      // Nominated once already and nothing happened; a human gets to pick.
      l.recovering = false;
      l.state = LeaseState::not_held;
      fail_lease_waiters(de, Errc::human_intervention);
      co_return;
    }
    l.last_nominee = cand;
    Message n;
    n.kind = MsgKind::RECOVERY_NOMINATE;
    n.de = de;
    n.sender = cfg_.id;
    n.body = RecoveryNominateBody{failed};
    sim_.send(cfg_.id, cand, std::move(n));
    l.recovering = false;
    l.backoff = std::min<VDuration>(l.backoff * 2, kAcquireBackoffCap);
    schedule_acquire_retry(de);
    co_return;
  }

  if (dl.lease_holder() == cfg_.id) {
    l.recovering = false;
    become_held(de);
    co_return;
  }
  Update u;
  u.kind = UpdateKind::LEASE_HOLDER;
  u.de = de;
  u.old_lh = dl.empty() ? failed : dl.lease_holder();
  u.new_lh = cfg_.id;
  u.signer = cfg_.id;
  dl.append_local(std::move(u));
  l.assume_seq = dl.head();
  send_update(de, dl.head());
  // The ack or reject finishes the job.
}

// --- op plumbing ---

void Device::submit_create(DeId de, uint64_t blocks,
                           std::function<void(Errc)> cb) {
  if (!running_) {
    sim_.schedule(0, [cb] { cb(Errc::disconnected); });
    return;
  }
  QueuedOp q;
  q.fail = [cb] { cb(Errc::disconnected); };
  q.make = [this, de, blocks, cb] { return op_create(de, blocks, cb); };
  enqueue_op(std::move(q));
}

void Device::submit_read(DeId de, uint64_t addr, uint32_t len,
                         std::function<void(Errc, Bytes)> cb) {
  if (!running_) {
    sim_.schedule(0, [cb] { cb(Errc::disconnected, {}); });
    return;
  }
  QueuedOp q;
  q.fail = [cb] { cb(Errc::disconnected, {}); };
  q.make = [this, de, addr, len, cb] { return op_read(de, addr, len, cb); };
  enqueue_op(std::move(q));
}

void Device::submit_write(DeId de, uint64_t addr, Bytes data,
                          std::function<void(Errc)> cb) {
  if (!running_) {
    sim_.schedule(0, [cb] { cb(Errc::disconnected); });
    return;
  }
  QueuedOp q;
  q.fail = [cb] { cb(Errc::disconnected); };
  q.make = [this, de, addr, data = std::move(data), cb] {
    return op_write(de, addr, data, cb);
  };
  enqueue_op(std::move(q));
}

void Device::enqueue_op(QueuedOp op) {
  op_queue_.push_back(std::move(op));
  pump_ops();
}

void Device::pump_ops() {
  if (op_active_ || !running_ || op_queue_.empty()) return;
  QueuedOp q = std::move(op_queue_.front());
  op_queue_.pop_front();
  op_active_ = true;
  op_slot_.emplace();
  op_slot_->fail = std::move(q.fail);
  op_slot_->root = op_root(q.make());
  op_slot_->root.start();
}

void Device::complete_op(std::function<void()> fire_cb) {
  // Runs while the op coroutine is still on its feet; the teardown event
  // fires after it has reached its final suspension.
  at(0, [this, fire_cb = std::move(fire_cb)] {
    op_slot_.reset();
    op_active_ = false;
    fire_cb();
    for (auto& [de, l] : leases_)
      if (l.state == LeaseState::revoking) progress_transfer(de);
    pump_ops();
  });
}

void Device::require_holder(DeId de) const {
  auto it = leases_.find(de);
  if (it == leases_.end() || (it->second.state != LeaseState::held &&
                              it->second.state != LeaseState::revoking))
    throw Error(Errc::disconnected, "lease lost mid-op");
}

task<void> Device::ensure_lease(DeId de) {
  log_.open(de);
  for (int spins = 0; spins < 64; ++spins) {
    Lease& l = lease(de);
    if (l.state == LeaseState::held) co_return;
    if (l.state == LeaseState::not_held) start_acquire(de);
    auto w = std::make_shared<devdetail::Waiter>();
    lease(de).waiters.push_back(w);
    co_await devdetail::WaitOn{w.get()};
    if (!w->positive) throw Error(w->err, "lease acquisition failed");
  }
  throw Error(Errc::unavailable, "lease thrashing");
}

task<void> Device::op_create(DeId de, uint64_t blocks,
                             std::function<void(Errc)> cb) {
  Errc rc = Errc::ok;
  try {
    log_.open(de);
    created_des_[de] = blocks;
    bool ok = false;
    for (int attempt = 0; attempt < kCreateTries && !ok; ++attempt) {
      auto w = std::make_shared<devdetail::Waiter>();
      create_waiters_[de].push_back(w);
      Message m;
      m.kind = MsgKind::DE_CREATE;
      m.de = de;
      m.sender = cfg_.id;
      m.body = DeCreateBody{blocks};
      sim_.send(cfg_.id, kCoordinatorId, std::move(m));
      at(kCreateTimeout, [w] { fire(w, false, Errc::unavailable); });
      co_await devdetail::WaitOn{w.get()};
      if (w->positive) {
        ok = true;
      } else if (w->err == Errc::duplicate_de) {
        throw Error(Errc::duplicate_de, "owned by another device");
      }
    }
    if (!ok) throw Error(Errc::unavailable, "coordinator unreachable");
    become_held(de);
  } catch (const Error& e) {
    rc = e.code();
  }
  co_await sleep(cfg_.op_service_us);
  complete_op([cb = std::move(cb), rc] { cb(rc); });
}

task<void> Device::op_read(DeId de, uint64_t addr, uint32_t len,
                           std::function<void(Errc, Bytes)> cb) {
  Errc rc = Errc::ok;
  Bytes out;
  try {
    co_await ensure_lease(de);
    uint64_t end = addr + len;
    for (BlockId b = addr / kBlockSize; b * kBlockSize < end; ++b) {
      BlockData plain = co_await get_block_plain(de, b);
      require_holder(de);
      uint64_t bstart = b * kBlockSize;
      size_t off = addr > bstart ? static_cast<size_t>(addr - bstart) : 0;
      size_t stop = static_cast<size_t>(std::min<uint64_t>(end - bstart,
                                                           kBlockSize));
      out.insert(out.end(), plain.begin() + off, plain.begin() + stop);
    }
  } catch (const Error& e) {
    rc = e.code();
    out.clear();
  }
  co_await sleep(cfg_.op_service_us);
  complete_op([cb = std::move(cb), rc, out = std::move(out)] { cb(rc, out); });
}

task<void> Device::op_write(DeId de, uint64_t addr, Bytes data,
                            std::function<void(Errc)> cb) {
  Errc rc = Errc::ok;
  try {
    co_await ensure_lease(de);
    uint64_t pos = addr;
    size_t di = 0;
    while (di < data.size()) {
      BlockId b = pos / kBlockSize;
      size_t off = static_cast<size_t>(pos % kBlockSize);
      size_t n = std::min(kBlockSize - off, data.size() - di);
      BlockData plain{};
      if (off != 0 || n != kBlockSize) {
        plain = co_await get_block_plain(de, b);  // read-modify-write
        require_holder(de);
      }
      std::copy(data.begin() + di, data.begin() + di + n, plain.begin() + off);
      write_block_local(de, b, plain);
      pos += n;
      di += n;
    }
  } catch (const Error& e) {
    rc = e.code();
  }
  co_await sleep(cfg_.op_service_us);
  complete_op([cb = std::move(cb), rc] { cb(rc); });
}

task<BlockData> Device::get_block_plain(DeId de, BlockId b) {
  DeLog* dl = log_.find(de);
  VersionNo v = dl ? dl->latest_version(b) : 0;
  if (v == 0) {
    BlockData zeros{};
    co_return zeros;  // never written
  }
  if (const BlockData* c = store_.get(de, b, v))
    co_return decrypt_block(*c, de, b, v, keys_);
  const Update* w = dl->write_for(b, v);
  if (!w) throw Error(Errc::not_found, "no write for version");
  BlockData cipher = co_await fetch_block(de, *w);
  co_return decrypt_block(cipher, de, b, v, keys_);
}

task<BlockData> Device::fetch_block(DeId de, Update w) {
  std::vector<DeviceId> srcs;
  if (cfg_.cloud_enabled) srcs.push_back(kCloudNodeId);
  for (DeviceId r : w.replicas()) {
    if (r == cfg_.id) continue;
    if (std::find(srcs.begin(), srcs.end(), r) == srcs.end())
      srcs.push_back(r);
  }
  if (srcs.empty()) throw Error(Errc::unavailable, "no source holds block");
  for (size_t attempt = 0; attempt < std::size(kFetchDelays); ++attempt) {
    DeviceId src = srcs[attempt % srcs.size()];
    auto wtr = std::make_shared<devdetail::Waiter>();
    block_waiters_[{de, w.block, w.version}].push_back(wtr);
    Message m;
    m.kind = MsgKind::BLOCK_REQUEST;
    m.de = de;
    m.sender = cfg_.id;
    m.body = BlockRequestBody{w.block, w.version};
    sim_.send(cfg_.id, src, std::move(m));
    at(kFetchDelays[attempt], [wtr] { fire(wtr, false, Errc::unavailable); });
    co_await devdetail::WaitOn{wtr.get()};
    if (!wtr->positive) continue;
    if (content_hash(as_span(wtr->block)) == w.hash) {
      store_verified(de, w.block, w.version, wtr->block);
      co_return wtr->block;
    }
    // Whoever served this returned bytes that do not match the signed
    // write; note it and try the next source.
    sim_.report_fault(FaultKind::integrity_violation, cfg_.id, de, w.block);
  }
  throw Error(Errc::unavailable, "block fetch exhausted");
}

void Device::write_block_local(DeId de, BlockId b, const BlockData& plain) {
  require_holder(de);
  DeLog& dl = log_.open(de);
  VersionNo v = dl.latest_version(b) + 1;
  BlockData cipher = encrypt_block(plain, de, b, v, keys_);
  Digest20 h = content_hash(as_span(cipher));
  sim_.oracle().record_authored_block(de, b, v, h, content_hash(as_span(plain)),
                                      sim_.now(), cfg_.id);
  if (!store_.put(de, b, v, cipher)) {
    store_.erase(de, b, v);
    store_.put(de, b, v, cipher);
  }
  sim_.oracle().on_stored(cfg_.id, de, b, v, cipher, true, sim_.now(),
                          sim_.metrics());
  Update w;
  w.kind = UpdateKind::WRITE;
  w.de = de;
  w.block = b;
  w.version = v;
  w.hash = h;
  w.signer = cfg_.id;
  dl.append_local(std::move(w));
  // Signed and sent by flush, or immediately when the pipe is idle.
  send_update(de, dl.head());
}

void Device::store_verified(DeId de, BlockId b, VersionNo v,
                            const BlockData& c) {
  if (!store_.put(de, b, v, c)) {
    store_.erase(de, b, v);
    store_.put(de, b, v, c);
  }
  sim_.oracle().on_stored(cfg_.id, de, b, v, c, true, sim_.now(),
                          sim_.metrics());
}

// --- wire in/out ---

void Device::send_update(DeId de, SeqNo seq) {
  DeLog* dl = log_.find(de);
  if (!dl) return;
  Update& u = dl->at_mut(seq);
  if (u.signer != cfg_.id) return;
  if (u.sig.size() != signature_size(cfg_.scheme)) {
    Bytes payload = canonical_signed_bytes(u);
    u.sig = sign(std::span<const uint8_t>(payload.data(), payload.size()),
                 cfg_.scheme, keys_, cfg_.id);
  }
  sim_.send(cfg_.id, kCoordinatorId, Message::from_update(u));
}

void Device::send_replication_record(DeId de, BlockId b, VersionNo v,
                                     DeviceId replicator) {
  Update r;
  r.kind = UpdateKind::REPLICATION;
  r.de = de;
  r.block = b;
  r.version = v;
  r.replicator = replicator;
  r.signer = cfg_.id;
  Bytes payload = canonical_signed_bytes(r);
  r.sig = sign(std::span<const uint8_t>(payload.data(), payload.size()),
               cfg_.scheme, keys_, cfg_.id);
  sim_.send(cfg_.id, kCoordinatorId, Message::from_update(r));
  if (DeLog* dl = log_.find(de))
    dl->ingest_replication(r, cfg_.scheme, keys_,
                           cfg_.cloud_enabled ? kCloudNodeId : 0);
}

void Device::ingest_update(const Update& u) {
  DeLog& dl = log_.open(u.de);
  IngestOutcome out = dl.ingest(u, cfg_.scheme, keys_);
  using S = IngestOutcome::Status;
  switch (out.status) {
    case S::applied: {
      sim_.oracle().check_ingested(u);
      // Anything the coordinator handed out is durable there; never roll it
      // back, and drop any pending replay it satisfies.
      SeqNo& a = acked_[u.de];
      if (u.seq > a) a = u.seq;
      if (u.kind == UpdateKind::WRITE && u.signer == cfg_.id) {
        auto pit = pending_.find(u.de);
        if (pit != pending_.end()) {
          auto& v = pit->second;
          v.erase(std::remove_if(v.begin(), v.end(),
                                 [&](const PendingWrite& pw) {
                                   return pw.orig_seq == u.seq &&
                                          pw.orig_hash == u.hash;
                                 }),
                  v.end());
        }
      }
      if (u.kind == UpdateKind::LEASE_HOLDER && u.new_lh != cfg_.id) {
        Lease& l = lease(u.de);
        if (holder_like(l)) demote(u.de, true);
      }
      check_seal(u.de);
      break;
    }
    case S::duplicate:
      check_seal(u.de);
      break;
    case S::bad_signature:
      sim_.report_fault(FaultKind::bad_signature, cfg_.id, u.de, u.seq);
      break;
    case S::fork:
      sim_.report_fault(FaultKind::fork_detected, cfg_.id, u.de, u.seq);
      break;
    case S::gap: {
      SeqNo expect = dl.head() + 1;
      if (gap_reported_at_[u.de] != expect) {
        gap_reported_at_[u.de] = expect;
        sim_.report_fault(FaultKind::gap_detected, cfg_.id, u.de, u.seq);
      }
      break;
    }
    case S::not_entitled:
      sim_.report_fault(FaultKind::not_entitled, cfg_.id, u.de, u.seq);
      break;
    case S::no_write:
      break;
  }
}

void Device::ingest_replication(const Update& r) {
  DeLog& dl = log_.open(r.de);
  IngestOutcome out = dl.ingest_replication(
      r, cfg_.scheme, keys_, cfg_.cloud_enabled ? kCloudNodeId : 0);
  if (out.status == IngestOutcome::Status::bad_signature)
    sim_.report_fault(FaultKind::bad_signature, cfg_.id, r.de, r.block);
}

void Device::handle_block_request(DeviceId from, const Message& m) {
  auto& b = std::get<BlockRequestBody>(m.body);
  const BlockData* c = store_.get(m.de, b.block, b.version);
  if (!c) {
    Message nack;
    nack.kind = MsgKind::BLOCK_NACK;
    nack.de = m.de;
    nack.sender = cfg_.id;
    nack.body = BlockNackBody{b.block, b.version};
    sim_.send(cfg_.id, from, std::move(nack));
    return;
  }
  Message resp;
  resp.kind = MsgKind::BLOCK_RESPONSE;
  resp.de = m.de;
  resp.sender = cfg_.id;
  resp.body = BlockResponseBody{b.block, b.version, *c};
  sim_.send(cfg_.id, from, std::move(resp));
  if (from == kCloudNodeId) {
    // The provider store cannot sign; whoever feeds it vouches for it.
    Key3 key{m.de, b.block, b.version};
    if (attested_.insert(key).second)
      send_replication_record(m.de, b.block, b.version, kCloudNodeId);
  }
}

void Device::handle_block_response(DeviceId from, const Message& m) {
  (void)from;
  auto& b = std::get<BlockResponseBody>(m.body);
  Key3 key{m.de, b.block, b.version};
  auto wit = block_waiters_.find(key);
  if (wit != block_waiters_.end()) {
    auto ws = std::move(wit->second);
    block_waiters_.erase(wit);
    for (auto& w : ws) {
      if (w->done) continue;
      w->block = b.content;
      fire(w, true);
    }
  }
  auto dit = duty_.find(key);
  if (dit != duty_.end() && dit->second.inflight) {
    DeLog* dl = log_.find(m.de);
    const Update* wr = dl ? dl->write_for(b.block, b.version) : nullptr;
    if (wr && content_hash(as_span(b.content)) == wr->hash) {
      store_verified(m.de, b.block, b.version, b.content);
      send_replication_record(m.de, b.block, b.version, cfg_.id);
      duty_.erase(dit);
    } else {
      if (wr)
        sim_.report_fault(FaultKind::integrity_violation, cfg_.id, m.de,
                          b.block);
      dit->second.inflight = false;  // retry another source next tick
    }
  }
}

void Device::handle_switch_reply(DeId de, const LhSwitchReplyBody& b) {
  Lease& l = lease(de);
  switch (b.status) {
    case SwitchStatus::pending:
      break;  // revocation under way; the retry timer keeps nudging
    case SwitchStatus::nack:
      l.backoff = std::min<VDuration>(l.backoff * 2, kAcquireBackoffCap);
      break;
    case SwitchStatus::still_holder: {
      if (l.state != LeaseState::acquiring) break;
      // The coordinator never forgot us, but our log may be behind what it
      // distributed while we were away; only resume once level with it.
      DeLog& dl = log_.open(de);
      if (dl.head() >= b.head &&
          (dl.empty() || dl.lease_holder() == cfg_.id)) {
        l.seal_active = false;
        become_held(de);
      } else {
        begin_catchup(de, b.head);
      }
      break;
    }
    case SwitchStatus::recovery: {
      if (l.state != LeaseState::acquiring || l.recovering) break;
      DeviceId failed = log_.open(de).lease_holder();
      if (failed == cfg_.id) break;  // stale view of ourselves; retry later
      l.recovering = true;
      spawn_bg(recover_lease(de, failed, false));
      break;
    }
    case SwitchStatus::unknown_de: {
      if (l.state != LeaseState::acquiring) break;
      if (created_des_.count(de)) {
        Message m;
        m.kind = MsgKind::DE_CREATE;
        m.de = de;
        m.sender = cfg_.id;
        m.body = DeCreateBody{created_des_[de]};
        sim_.send(cfg_.id, kCoordinatorId, std::move(m));
        break;
      }
      if (++l.unknown_tries >= kUnknownDeTries) {
        l.state = LeaseState::not_held;
        l.unknown_tries = 0;
        fail_lease_waiters(de, Errc::unknown_de);
      }
      break;
    }
  }
}

void Device::handle_update_ack(DeId de, SeqNo seq) {
  SeqNo& a = acked_[de];
  if (seq > a) a = seq;
  Lease& l = lease(de);
  if (l.state == LeaseState::revoking) progress_transfer(de);
  if (l.assume_seq != 0 && a >= l.assume_seq) {
    DeLog* dl = log_.find(de);
    if (dl && dl->lease_holder() == cfg_.id) {
      l.assume_seq = 0;
      become_held(de);
    }
  }
}

void Device::handle_update_reject(DeId de, const UpdateRejectBody& b) {
  Lease& l = lease(de);
  switch (b.reason) {
    case kRejectNotLeaseHolder: {
      if (l.assume_seq != 0) {
        // Recovery bid lost: the holder was alive after all.
        rollback_unacked(de);
        l.assume_seq = 0;
        l.recovering = false;
        schedule_acquire_retry(de);
        break;
      }
      if (holder_like(l)) {
        demote(de, true);
        auto pit = pending_.find(de);
        bool want = !l.waiters.empty() ||
                    (pit != pending_.end() && !pit->second.empty());
        if (want) start_acquire(de);
      }
      break;
    }
    case kRejectBadSeq:
      // Our view of the tail disagrees with the coordinator's; refetch.
      fetch_state(de);
      break;
    case kRejectUnknownDe:
      if (created_des_.count(de)) {
        Message m;
        m.kind = MsgKind::DE_CREATE;
        m.de = de;
        m.sender = cfg_.id;
        m.body = DeCreateBody{created_des_[de]};
        sim_.send(cfg_.id, kCoordinatorId, std::move(m));
      }
      break;
    default:
      break;
  }
}

void Device::on_message(DeviceId from, const Message& m) {
  if (!running_) return;
  switch (m.kind) {
    case MsgKind::HEARTBEAT_ACK: {
      last_hb_ack_ = sim_.now();
      for (DeId de : std::get<HeartbeatAckBody>(m.body).des) log_.open(de);
      break;
    }
    case MsgKind::WRITE:
    case MsgKind::NOOP:
    case MsgKind::LEASE_HOLDER:
      ingest_update(m.to_update());
      break;
    case MsgKind::REPLICATION:
      ingest_replication(m.to_update());
      break;
    case MsgKind::UPDATE_ACK:
      handle_update_ack(m.de, std::get<SeqBody>(m.body).seq);
      break;
    case MsgKind::UPDATE_REJECT:
      handle_update_reject(m.de, std::get<UpdateRejectBody>(m.body));
      break;
    case MsgKind::LH_SWITCH_REPLY:
      handle_switch_reply(m.de, std::get<LhSwitchReplyBody>(m.body));
      break;
    case MsgKind::LH_REVOCATION: {
      Lease& l = lease(m.de);
      if (l.state == LeaseState::held || l.state == LeaseState::revoking) {
        l.state = LeaseState::revoking;
        l.give_to = std::get<LhRevocationBody>(m.body).new_holder;
        progress_transfer(m.de);
      }
      break;
    }
    case MsgKind::LH_TRANSFER: {
      auto& b = std::get<LhTransferBody>(m.body);
      Bytes seal = transfer_seal_bytes(m.de, b.seq, from, cfg_.id);
      if (!verify(std::span<const uint8_t>(seal.data(), seal.size()),
                  std::span<const uint8_t>(b.sig.data(), b.sig.size()),
                  cfg_.scheme, keys_, from)) {
        sim_.report_fault(FaultKind::bad_signature, cfg_.id, m.de, b.seq);
        break;
      }
      Lease& l = lease(m.de);
      if (l.state == LeaseState::held) break;
      begin_catchup(m.de, b.seq);
      break;
    }
    case MsgKind::BLOCK_REQUEST:
      handle_block_request(from, m);
      break;
    case MsgKind::BLOCK_RESPONSE:
      handle_block_response(from, m);
      break;
    case MsgKind::BLOCK_NACK: {
      auto& b = std::get<BlockNackBody>(m.body);
      Key3 key{m.de, b.block, b.version};
      auto wit = block_waiters_.find(key);
      if (wit != block_waiters_.end()) {
        auto ws = std::move(wit->second);
        block_waiters_.erase(wit);
        for (auto& w : ws) fire(w, false, Errc::not_found);
      }
      auto dit = duty_.find(key);
      if (dit != duty_.end()) dit->second.inflight = false;
      break;
    }
    case MsgKind::DEVTAB_REPLY: {
      devtab_.clear();
      for (const auto& e : std::get<DevtabReplyBody>(m.body).entries)
        devtab_[e.device] = e;
      break;
    }
    case MsgKind::DE_CREATE_REPLY: {
      uint8_t status = std::get<StatusBody>(m.body).status;
      auto it = create_waiters_.find(m.de);
      if (it == create_waiters_.end()) break;
      auto ws = std::move(it->second);
      create_waiters_.erase(it);
      for (auto& w : ws)
        fire(w, status == 0, status == 0 ? Errc::ok : Errc::duplicate_de);
      break;
    }
    case MsgKind::PING: {
      Message r;
      r.kind = MsgKind::PING_REPLY;
      r.de = m.de;
      r.sender = cfg_.id;
      sim_.send(cfg_.id, from, std::move(r));
      break;
    }
    case MsgKind::PING_REPLY: {
      auto it = ping_waiters_.find(from);
      if (it == ping_waiters_.end()) break;
      auto ws = std::move(it->second);
      ping_waiters_.erase(it);
      for (auto& w : ws) fire(w, true);
      break;
    }
    case MsgKind::RECOVERY_NOMINATE: {
      Lease& l = lease(m.de);
      if (holder_like(l) || l.recovering) break;
      l.recovering = true;
      l.state = LeaseState::acquiring;
      spawn_bg(recover_lease(m.de, std::get<RecoveryNominateBody>(m.body).failed,
                             /*forced_self=*/true));
      break;
    }
    default:
      break;
  }
}

}  // namespace decloud
