#include "decloud/sim.hpp"

#include <algorithm>

#include "decloud/crypto.hpp"

namespace decloud {

namespace {
constexpr size_t kRingCap = 1 << 16;
}

uint64_t Metrics::total_up_bytes() const {
  uint64_t sum = 0;
  for (const auto& [id, t] : traffic) sum += t.up_block + t.up_ctrl;
  return sum;
}

VDuration Metrics::max_replication_latency() const {
  VDuration m = 0;
  for (VDuration v : replication_latency_us) m = std::max(m, v);
  return m;
}

std::string node_name(DeviceId id) {
  if (id == kCoordinatorId) return "coord";
  if (id == kCloudNodeId) return "cloud";
  return "dev" + std::to_string(id);
}

void Oracle::violation(const std::string& what) const {
  // Remember the trip so the event loop can re-raise even if a coroutine
  // swallows the unwind.
  if (trip_.empty()) trip_ = what;
  throw Error(Errc::invariant_violation, what);
}

void Oracle::record_distributed(const Update& u) {
  if (!u.seq_bearing()) return;
  auto& v = variants_[{u.de, u.seq}];
  Bytes bytes = canonical_signed_bytes(u);
  if (std::find(v.begin(), v.end(), bytes) == v.end())
    v.push_back(std::move(bytes));
}

void Oracle::record_adversary_variant(const Update& u) {
  auto& v = variants_[{u.de, u.seq}];
  Bytes bytes = canonical_signed_bytes(u);
  if (std::find(v.begin(), v.end(), bytes) == v.end())
    v.push_back(std::move(bytes));
}

void Oracle::check_ingested(const Update& u) const {
  if (!u.seq_bearing()) return;
  auto it = variants_.find({u.de, u.seq});
  if (it == variants_.end())
    violation("ingested update nobody authored: de=" + std::to_string(u.de) +
              " seq=" + std::to_string(u.seq));
  Bytes bytes = canonical_signed_bytes(u);
  const auto& v = it->second;
  if (std::find(v.begin(), v.end(), bytes) == v.end())
    violation("ingested update differs from every authored variant: de=" +
              std::to_string(u.de) + " seq=" + std::to_string(u.seq));
}

void Oracle::record_authored_block(DeId de, BlockId b, VersionNo v,
                                   const Digest20& cipher_hash,
                                   const Digest20& plain_hash, VTime now,
                                   DeviceId writer) {
  BlockTruth truth;
  truth.hash = cipher_hash;
  truth.plain = plain_hash;
  truth.created = now;
  truth.copies.insert(writer);
  blocks_[{de, b, v}] = truth;
}

void Oracle::retract_block(DeId de, BlockId b, VersionNo v) {
  blocks_.erase({de, b, v});
}

VersionNo Oracle::version_of_plain(DeId de, BlockId b,
                                   const Digest20& plain) const {
  VersionNo found = 0;
  for (const auto& [key, truth] : blocks_) {
    if (std::get<0>(key) == de && std::get<1>(key) == b &&
        truth.plain == plain)
      found = std::max(found, std::get<2>(key));
  }
  return found;
}

void Oracle::on_stored(DeviceId node, DeId de, BlockId b, VersionNo v,
                       const BlockData& data, bool verified, VTime now,
                       Metrics& metrics) {
  auto it = blocks_.find({de, b, v});
  Digest20 h = content_hash(std::span<const uint8_t>(data.data(), data.size()));
  if (it == blocks_.end()) {
    if (verified)
      violation("node " + node_name(node) + " stored a block nobody wrote");
    return;
  }
  BlockTruth& truth = it->second;
  if (h != truth.hash) {
    if (verified)
      violation("node " + node_name(node) +
                " stored corrupt bytes it claims to have verified");
    return;  // unverified garbage at the provider is the threat model
  }
  truth.copies.insert(node);
  if (!truth.latency_recorded && truth.copies.size() >= 3) {
    truth.latency_recorded = true;
    metrics.replication_latency_us.push_back(now - truth.created);
  }
}

void Oracle::on_lease_state(DeviceId dev, DeId de, bool held) {
  auto& s = held_[de];
  if (held) {
    s.insert(dev);
    if (exclusivity_checked_ && s.size() > 1)
      violation("two live lease holders for de=" + std::to_string(de));
  } else {
    s.erase(dev);
  }
}

bool Oracle::someone_holds(DeId de) const {
  auto it = held_.find(de);
  return it != held_.end() && !it->second.empty();
}

void Oracle::check_accounting(const Metrics& m) const {
  if (m.msgs_sent != m.msgs_delivered + m.msgs_dropped)
    violation("message accounting leak: sent=" + std::to_string(m.msgs_sent) +
              " delivered=" + std::to_string(m.msgs_delivered) +
              " dropped=" + std::to_string(m.msgs_dropped));
}

const Digest20* Oracle::authored_hash(DeId de, BlockId b, VersionNo v) const {
  auto it = blocks_.find({de, b, v});
  return it == blocks_.end() ? nullptr : &it->second.hash;
}

SimWorld::SimWorld(uint64_t seed, NetConfig net)
    : seed_(seed), net_(net), rng_(seed) {
  ring_.reserve(kRingCap);
}

uint64_t SimWorld::rand_range(uint64_t lo, uint64_t hi) {
  return std::uniform_int_distribution<uint64_t>(lo, hi)(rng_);
}

void SimWorld::add_node(DeviceId id, Actor* actor, NodeNetConfig nc) {
  NodeState st;
  st.actor = actor;
  st.net = nc;
  nodes_[id] = st;
  up_.insert(id);
}

void SimWorld::trace(TraceEntry::Ev ev, DeviceId from, DeviceId to,
                     MsgKind kind, DeId de, uint32_t bytes) {
  TraceEntry e{now_, ev, from, to, kind, de, bytes};
  if (ring_.size() < kRingCap) {
    ring_.push_back(e);
  } else {
    ring_[ring_pos_] = e;
    ring_pos_ = (ring_pos_ + 1) % kRingCap;
  }
}

std::vector<TraceEntry> SimWorld::trace_in_order() const {
  std::vector<TraceEntry> out;
  out.reserve(ring_.size());
  for (size_t i = 0; i < ring_.size(); ++i)
    out.push_back(ring_[(ring_pos_ + i) % ring_.size()]);
  return out;
}

// Transmission time for `bytes` through a `bps` pipe; integer microseconds.
static VDuration tx_us(uint64_t bytes, uint64_t bps) {
  if (bps == 0) return 0;
  return (bytes * 8 * kUsPerSec) / bps;
}

void SimWorld::send(DeviceId from, DeviceId to, Message m) {
  NodeState& src = nodes_.at(from);
  auto dst_it = nodes_.find(to);
  size_t bytes = m.wire_size();
  size_t block = m.block_bytes();

  metrics_.msgs_sent++;
  auto& tf = metrics_.traffic[from];
  tf.up_block += block;
  tf.up_ctrl += bytes - block;
  switch (m.kind) {
    case MsgKind::WRITE:
    case MsgKind::NOOP:
    case MsgKind::LEASE_HOLDER:
    case MsgKind::REPLICATION:
    case MsgKind::LH_TRANSFER:
      metrics_.signed_updates_sent++;
      break;
    default:
      break;
  }
  trace(TraceEntry::Ev::send, from, to, m.kind, m.de,
        static_cast<uint32_t>(bytes));

  // Unknown destination (a forged id, say) vanishes like a partitioned one.
  if (dst_it == nodes_.end() || partitioned_.count(from)) {
    metrics_.msgs_dropped++;
    trace(TraceEntry::Ev::drop, from, to, m.kind, m.de,
          static_cast<uint32_t>(bytes));
    return;
  }
  NodeState& dst = dst_it->second;

  VTime up_start = std::max(now_, src.up_busy_until);
  VTime up_done = up_start + tx_us(bytes, src.net.up_bps);
  src.up_busy_until = up_done;

  VTime propagated =
      up_done + rand_range(net_.lat_min_us, net_.lat_max_us);

  VTime down_start = std::max(propagated, dst.down_busy_until);
  VTime down_done = down_start + tx_us(bytes, dst.net.down_bps);
  dst.down_busy_until = down_done;

  // Per-link FIFO: never deliver behind an earlier message on the same link.
  VTime& last = link_last_[{from, to}];
  VTime at = std::max(down_done, last);
  last = at;

  queue_.push(Ev{at, next_ev_++, [this, from, to, m = std::move(m)]() mutable {
                  deliver(from, to, std::move(m));
                }});
}

void SimWorld::deliver(DeviceId from, DeviceId to, Message m) {
  size_t bytes = m.wire_size();
  if (!up_.count(to) || partitioned_.count(to)) {
    metrics_.msgs_dropped++;
    trace(TraceEntry::Ev::drop, from, to, m.kind, m.de,
          static_cast<uint32_t>(bytes));
    return;
  }
  metrics_.msgs_delivered++;
  size_t block = m.block_bytes();
  auto& tf = metrics_.traffic[to];
  tf.down_block += block;
  tf.down_ctrl += bytes - block;
  trace(TraceEntry::Ev::deliver, from, to, m.kind, m.de,
        static_cast<uint32_t>(bytes));
  nodes_.at(to).actor->on_message(from, m);
}

void SimWorld::schedule(VDuration delay, std::function<void()> fn) {
  queue_.push(Ev{now_ + delay, next_ev_++, std::move(fn)});
}

void SimWorld::run_until(VTime t) {
  while (!queue_.empty() && queue_.top().t <= t) {
    Ev ev = std::move(const_cast<Ev&>(queue_.top()));
    queue_.pop();
    now_ = ev.t;
    ev.fn();
    // A violation raised inside a coroutine unwinds into its frame and is
    // stored there; re-raise it where nothing can swallow it.
    if (oracle_.tripped())
      throw Error(Errc::invariant_violation, oracle_.trip_message());
  }
  now_ = std::max(now_, t);
}

void SimWorld::drain() {
  while (!queue_.empty()) {
    Ev ev = std::move(const_cast<Ev&>(queue_.top()));
    queue_.pop();
    now_ = ev.t;
    ev.fn();
    if (oracle_.tripped())
      throw Error(Errc::invariant_violation, oracle_.trip_message());
  }
}

void SimWorld::set_partitioned(DeviceId id, bool on) {
  if (on)
    partitioned_.insert(id);
  else
    partitioned_.erase(id);
  trace(on ? TraceEntry::Ev::partition : TraceEntry::Ev::heal, id, id,
        MsgKind::PING, 0, 0);
}

void SimWorld::crash(DeviceId id) {
  if (!up_.count(id)) return;
  up_.erase(id);
  trace(TraceEntry::Ev::crash, id, id, MsgKind::PING, 0, 0);
  nodes_.at(id).actor->on_crash();
}

void SimWorld::restart(DeviceId id) {
  if (up_.count(id)) return;
  up_.insert(id);
  trace(TraceEntry::Ev::restart, id, id, MsgKind::PING, 0, 0);
  nodes_.at(id).actor->on_restart();
}

std::vector<DeviceId> SimWorld::node_ids() const {
  std::vector<DeviceId> out;
  for (const auto& [id, st] : nodes_) out.push_back(id);
  return out;
}

void SimWorld::report_fault(FaultKind kind, DeviceId reporter, DeId de,
                            uint64_t detail) {
  faults_.push_back(FaultEvent{now_, kind, reporter, de, detail});
  trace(TraceEntry::Ev::fault, reporter, reporter, MsgKind::PING, de,
        static_cast<uint32_t>(detail));
}

bool SimWorld::saw_fault(FaultKind kind) const {
  for (const auto& f : faults_)
    if (f.kind == kind) return true;
  return false;
}

}  // namespace decloud
