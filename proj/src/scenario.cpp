#include "decloud/scenario.hpp"

#include <algorithm>
#include <random>

#include "decloud/mappers.hpp"

namespace decloud {

// --- deployment -------------------------------------------------------------

namespace {

NodeNetConfig device_pipes(const std::string& network) {
  if (network == "unlimited") return {};
  // Home access link: asymmetric, provider side unconstrained.
  return NodeNetConfig{32'000'000, 128'000'000};
}

}  // namespace

World::World(const WorldConfig& wc)
    : cfg(wc), sim(wc.seed, wc.latency), coord(sim, wc.scheme) {
  sim.add_node(kCoordinatorId, &coord, {});
  if (cfg.cloud) {
    cloud = std::make_unique<CloudNode>(sim, cfg.cloud_tick);
    sim.add_node(kCloudNodeId, cloud.get(), {});
    coord.register_device(kCloudNodeId, cfg.cloud_tick);
  }
  std::vector<DeviceId> ids;
  ids.reserve(cfg.devices);
  for (size_t i = 0; i < cfg.devices; ++i)
    ids.push_back(kFirstDeviceId + static_cast<DeviceId>(i));
  for (DeviceId id : ids) {
    DeviceConfig dc;
    dc.id = id;
    dc.heartbeat_period = cfg.heartbeat_period;
    dc.scheme = cfg.scheme;
    dc.replica_target = cfg.replica_target;
    dc.cloud_enabled = cfg.cloud;
    dc.pull_from_cloud = cfg.cloud && cfg.pull_from_cloud;
    devices.push_back(
        std::make_unique<Device>(sim, dc, make_device_keyring(id, ids)));
    sim.add_node(id, devices.back().get(), device_pipes(cfg.network));
    coord.register_device(id, cfg.heartbeat_period);
  }
}

void World::start() {
  for (auto& d : devices) d->controller_start();
  if (cloud) cloud->controller_start();
}

std::vector<Device*> World::device_ptrs() {
  std::vector<Device*> out;
  out.reserve(devices.size());
  for (auto& d : devices) out.push_back(d.get());
  return out;
}

bool world_converged(World& w) {
  std::vector<DeId> des = w.coord.de_ids();
  for (auto& dp : w.devices) {
    Device& d = *dp;
    if (!w.sim.is_up(d.id())) return false;
    if (d.inflight_ops() != 0 || d.pending_write_count() != 0) return false;
    for (DeId de : des) {
      if (!d.log().tracks(de)) return false;
      const DeLog* dl = d.log().find(de);
      if (dl->head() != w.coord.head(de)) return false;
      if (d.acked(de) != dl->head()) return false;
      if (dl->stable_frontier(w.cfg.replica_target) != dl->head())
        return false;
    }
  }
  if (w.cloud) {
    for (DeId de : des) {
      const std::vector<Update>* log = w.coord.log(de);
      for (const Update& u : *log) {
        if (u.kind != UpdateKind::WRITE) continue;
        if (!w.cloud->store().get(de, u.block, u.version)) return false;
      }
    }
  }
  return true;
}

std::optional<VTime> run_until_quiet(World& w, VTime cap, VDuration settle) {
  std::optional<VTime> first;
  for (;;) {
    if (world_converged(w)) {
      if (!first) first = w.sim.now();
      if (w.sim.now() - *first >= settle) return first;
    } else {
      first.reset();
    }
    if (w.sim.now() >= cap) return std::nullopt;
    w.sim.run_until(std::min<VTime>(cap, w.sim.now() + kUsPerSec));
  }
}

void install_gc_audit(World& w) {
  for (auto& dp : w.devices) {
    dp->set_post_gc_hook([](Device& dev) {
      size_t target = dev.config().replica_target;
      for (const auto& [de, dl] : dev.log().all()) {
        // Recompute the stable frontier from scratch: the longest prefix in
        // which every write already has a full replica set.
        SeqNo f = 0;
        for (SeqNo s = 1; s <= dl.head(); ++s) {
          const Update& u = dl.at(s);
          if (u.kind == UpdateKind::WRITE && u.replica_count() < target) break;
          f = s;
        }
        std::map<BlockId, VersionNo> floor;
        for (SeqNo s = 1; s <= f; ++s) {
          const Update& u = dl.at(s);
          if (u.kind == UpdateKind::WRITE)
            floor[u.block] = std::max(floor[u.block], u.version);
        }
        for (SeqNo s = 1; s <= dl.head(); ++s) {
          const Update& u = dl.at(s);
          if (u.kind != UpdateKind::WRITE) continue;
          auto fit = floor.find(u.block);
          bool superseded = fit != floor.end() && u.version < fit->second;
          if (superseded) continue;  // fair game for collection
          if (u.has_replica(dev.id()) &&
              !dev.store().get(de, u.block, u.version)) {
            throw Error(Errc::invariant_violation,
                        "gc dropped a live version this device is a recorded "
                        "replicator of");
          }
        }
      }
    });
  }
}

// --- scenario plumbing -------------------------------------------------------

namespace {

uint64_t get_u64(const ScenarioConfig& sc, const std::string& k, uint64_t def) {
  auto it = sc.overrides.find(k);
  if (it == sc.overrides.end()) return def;
  return std::stoull(it->second);
}

bool get_bool(const ScenarioConfig& sc, const std::string& k, bool def) {
  auto it = sc.overrides.find(k);
  if (it == sc.overrides.end()) return def;
  return it->second == "1" || it->second == "true" || it->second == "on";
}

std::string get_str(const ScenarioConfig& sc, const std::string& k,
                    const std::string& def) {
  auto it = sc.overrides.find(k);
  return it == sc.overrides.end() ? def : it->second;
}

SigScheme parse_scheme(const std::string& s) {
  if (s == "rsa") return SigScheme::ASYM_RSA2048;
  if (s == "hmac") return SigScheme::SYM_HMAC_SHA1;
  if (s == "off") return SigScheme::OFF;
  throw Error(Errc::out_of_range, "unknown scheme: " + s);
}

const char* scheme_str(SigScheme s) {
  switch (s) {
    case SigScheme::ASYM_RSA2048: return "rsa";
    case SigScheme::SYM_HMAC_SHA1: return "hmac";
    case SigScheme::OFF: return "off";
  }
  return "?";
}

WorldConfig world_from(const ScenarioConfig& sc, WorldConfig wc) {
  wc.seed = sc.seed;
  wc.devices = get_u64(sc, "devices", wc.devices);
  wc.scheme = parse_scheme(get_str(sc, "scheme", scheme_str(wc.scheme)));
  wc.cloud = get_bool(sc, "cloud", wc.cloud);
  wc.pull_from_cloud = wc.cloud && get_bool(sc, "pull_from_cloud", true);
  wc.network = get_str(sc, "network", wc.network);
  if (wc.network != "home" && wc.network != "unlimited")
    throw Error(Errc::out_of_range, "unknown network: " + wc.network);
  size_t reachable = wc.devices + (wc.cloud ? 1 : 0);
  wc.replica_target =
      get_u64(sc, "target", std::min(wc.replica_target, reachable));
  return wc;
}

ScenarioResult base_result(const ScenarioConfig& sc) {
  ScenarioResult r;
  r.preset = sc.preset;
  r.seed = sc.seed;
  r.overrides = sc.overrides;
  return r;
}

// Advance the world until pred holds or the absolute cap passes.
bool wait_for(World& w, VTime cap, const std::function<bool()>& pred) {
  for (;;) {
    if (pred()) return true;
    if (w.sim.now() >= cap) return false;
    w.sim.run_until(std::min<VTime>(cap, w.sim.now() + 100 * kUsPerMs));
  }
}

// Run one callback-style op to completion; unavailable on timeout.
Errc run_op(World& w, VDuration budget,
            const std::function<void(std::function<void(Errc)>)>& submit) {
  auto done = std::make_shared<std::optional<Errc>>();
  submit([done](Errc e) { *done = e; });
  wait_for(w, w.sim.now() + budget, [&] { return done->has_value(); });
  return done->has_value() ? **done : Errc::unavailable;
}

using Floors = std::map<std::pair<DeId, BlockId>, VersionNo>;

// Every full block a read returns must be content some writer authored, and
// versions may only move forward unless a crash/partition legitimately rolls
// back an unacknowledged tail (callers clear the floors at such points).
SequentialDriver::ReadCheck oracle_read_check(World& w,
                                              std::shared_ptr<Floors> floors) {
  SimWorld* sim = &w.sim;
  return [sim, floors](Device&, const OpRecord& op, const Bytes& data) {
    if (op.addr % kBlockSize != 0 || data.size() % kBlockSize != 0) return;
    for (size_t off = 0; off < data.size(); off += kBlockSize) {
      BlockId b = (op.addr + off) / kBlockSize;
      BlockData pb;
      std::copy_n(data.data() + off, kBlockSize, pb.begin());
      bool zero = std::all_of(pb.begin(), pb.end(),
                              [](uint8_t x) { return x == 0; });
      Digest20 ph = content_hash({pb.data(), pb.size()});
      VersionNo v = sim->oracle().version_of_plain(op.de, b, ph);
      if (v == 0 && !zero)
        throw Error(Errc::invariant_violation,
                    "read returned bytes nobody wrote");
      auto key = std::make_pair(op.de, b);
      auto [it, fresh] = floors->try_emplace(key, v);
      if (!fresh) {
        if (v < it->second)
          throw Error(Errc::invariant_violation, "read went back in time");
        it->second = v;
      }
    }
  };
}

void finalize(ScenarioResult& r, World& w,
              const std::vector<SequentialDriver*>& drivers) {
  for (auto* d : drivers) d->stop();
  try {
    for (auto& dp : w.devices)
      if (w.sim.is_up(dp->id())) dp->controller_stop();
    if (w.cloud) w.cloud->controller_stop();
    w.sim.drain();
    w.sim.oracle().check_accounting(w.sim.metrics());
  } catch (const Error& e) {
    r.ok = false;
    if (r.note.empty()) r.note = e.what();
  }
  r.metrics = w.sim.metrics();
  r.nodes = w.sim.node_ids();
  r.faults = w.sim.faults();
  r.trace = w.sim.trace_in_order();
  r.end_time = w.sim.now();
  for (auto* d : drivers) {
    r.ops_ok += d->stats().ok;
    r.ops_failed += d->stats().failed;
    r.reads_checked += d->stats().reads_checked;
  }
  r.extras["lease_switches"] = 0;
  for (auto& [id, tf] : r.metrics.traffic)
    r.extras["lease_switches"] += tf.lease_switches;
}

void require(bool cond, const char* what) {
  if (!cond) throw Error(Errc::invariant_violation, what);
}

uint64_t count_faults(const World& w, FaultKind k) {
  uint64_t n = 0;
  for (const auto& f : w.sim.faults()) n += f.kind == k;
  return n;
}

// Shared-namespace setup: device 0 formats, every device creates one file
// and keeps its DE id (resolve cache warm from creation).
std::vector<DeId> setup_files(World& w, std::vector<UfsMount>& mounts,
                              uint64_t file_blocks) {
  Errc e = run_op(w, 300 * kUsPerSec,
                  [&](std::function<void(Errc)> cb) {
                    mounts[0].format(std::move(cb));
                  });
  if (e != Errc::ok) throw Error(e, "namespace format failed");
  std::vector<DeId> file_de(mounts.size(), 0);
  for (size_t i = 0; i < mounts.size(); ++i) {
    auto got = std::make_shared<std::optional<std::pair<Errc, DeId>>>();
    mounts[i].create("src" + std::to_string(i), file_blocks,
                     [got](Errc ec, DeId d) { *got = std::make_pair(ec, d); });
    bool fin = wait_for(w, w.sim.now() + 300 * kUsPerSec,
                        [&] { return got->has_value(); });
    if (!fin || (*got)->first != Errc::ok)
      throw Error(Errc::unavailable, "file create failed");
    file_de[i] = (*got)->second;
  }
  return file_de;
}

// --- presets -----------------------------------------------------------------

// Build-like mix: each device hammers its own file through a shared
// namespace; 3 writes per 10 ops, the rest reads.
ScenarioResult preset_compile(const ScenarioConfig& sc) {
  ScenarioResult r = base_result(sc);
  WorldConfig wc = world_from(sc, WorldConfig{});
  uint64_t ops_total = get_u64(sc, "ops", 1883);
  uint64_t file_blocks = get_u64(sc, "file_blocks", 16);
  World w(wc);
  if (get_bool(sc, "gc_audit", false)) install_gc_audit(w);
  std::vector<std::unique_ptr<SequentialDriver>> owned;
  std::vector<SequentialDriver*> drivers;
  try {
    w.start();
    size_t n = w.devices.size();
    std::vector<UfsMount> mounts;
    mounts.reserve(n);
    for (size_t i = 0; i < n; ++i) mounts.emplace_back(w.dev(i));
    std::vector<DeId> file_de = setup_files(w, mounts, file_blocks);

    std::vector<std::vector<OpRecord>> plans(n);
    uint64_t writes_planned = 0;
    for (uint64_t i = 0; i < ops_total; ++i) {
      size_t d = i % n;
      uint64_t rem = i % 10;
      bool wr = rem == 0 || rem == 3 || rem == 6;
      OpRecord op;
      op.kind = wr ? OpRecord::Kind::write : OpRecord::Kind::read;
      op.de = file_de[d];
      op.addr = ((i * 7 + d * 3) % file_blocks) * kBlockSize;
      op.len = kBlockSize;
      op.fill = (sc.seed << 32) ^ (i * 2654435761ULL + 17);
      plans[d].push_back(op);
      writes_planned += wr;
    }
    auto floors = std::make_shared<Floors>();
    for (size_t i = 0; i < n; ++i) {
      owned.push_back(std::make_unique<SequentialDriver>(
          w.sim, plan_for(w.dev(i), plans[i])));
      owned.back()->set_read_check(oracle_read_check(w, floors));
      drivers.push_back(owned.back().get());
    }
    VTime t0 = w.sim.now();
    for (auto* d : drivers) d->start();
    bool done = wait_for(w, t0 + 1800 * kUsPerSec, [&] {
      return std::all_of(drivers.begin(), drivers.end(),
                         [](SequentialDriver* d) { return d->done(); });
    });
    require(done, "client ops did not finish");
    uint64_t elapsed = 0;
    for (auto* d : drivers)
      elapsed = std::max(elapsed, d->stats().last_done - t0);
    auto conv = run_until_quiet(w, w.sim.now() + 1800 * kUsPerSec);
    require(conv.has_value(), "replication did not settle");
    r.extras["writes_planned"] = writes_planned;
    r.extras["ops_elapsed_us"] = elapsed;
    r.extras["converged_at_us"] = *conv;
    r.ok = true;
  } catch (const Error& e) {
    r.ok = false;
    r.note = e.what();
  }
  finalize(r, w, drivers);
  if (r.ok && r.ops_failed != 0) {
    r.ok = false;
    r.note = "client ops failed";
  }
  return r;
}

// One device streams a seeded volume it holds no copies of.
ScenarioResult preset_sread(const ScenarioConfig& sc) {
  ScenarioResult r = base_result(sc);
  WorldConfig wc;
  wc.replica_target = 2;
  wc = world_from(sc, wc);
  uint64_t blocks = get_u64(sc, "blocks", 64);
  World w(wc);
  std::vector<std::unique_ptr<SequentialDriver>> owned;
  std::vector<SequentialDriver*> drivers;
  try {
    size_t n = w.devices.size();
    require(n >= 2, "needs at least two devices");
    constexpr DeId kVol = 9;
    WorldSeeder seeder(w.sim, w.coord, w.cloud.get(), w.device_ptrs(),
                       wc.scheme);
    SeedSpec spec;
    spec.de = kVol;
    spec.writer = w.dev(0).id();
    spec.blocks = blocks;
    if (n >= 3) spec.replicators.push_back(w.dev(1).id());
    seeder.seed(spec);
    w.sim.metrics() = Metrics{};
    w.start();

    Device& reader = w.dev(n - 1);
    std::vector<OpRecord> plan;
    for (BlockId b = 0; b < blocks; ++b) {
      OpRecord op;
      op.kind = OpRecord::Kind::read;
      op.de = kVol;
      op.addr = b * kBlockSize;
      op.len = kBlockSize;
      plan.push_back(op);
    }
    owned.push_back(std::make_unique<SequentialDriver>(
        w.sim, plan_for(reader, plan)));
    auto floors = std::make_shared<Floors>();
    owned.back()->set_read_check(oracle_read_check(w, floors));
    drivers.push_back(owned.back().get());
    VTime t0 = w.sim.now();
    drivers[0]->start();
    bool done = wait_for(w, t0 + 600 * kUsPerSec,
                         [&] { return drivers[0]->done(); });
    require(done, "reads did not finish");
    r.extras["ops_elapsed_us"] = drivers[0]->stats().last_done - t0;
    auto conv = run_until_quiet(w, w.sim.now() + 600 * kUsPerSec);
    require(conv.has_value(), "did not settle");
    r.extras["reader_down_block"] =
        w.sim.metrics().traffic[reader.id()].down_block;
    r.ok = true;
  } catch (const Error& e) {
    r.ok = false;
    r.note = e.what();
  }
  finalize(r, w, drivers);
  if (r.ok && r.ops_failed != 0) {
    r.ok = false;
    r.note = "reads failed";
  }
  return r;
}

// One device overwrites a seeded volume end to end.
ScenarioResult preset_swrite(const ScenarioConfig& sc) {
  ScenarioResult r = base_result(sc);
  WorldConfig wc;
  wc.replica_target = 2;
  wc = world_from(sc, wc);
  uint64_t blocks = get_u64(sc, "blocks", 64);
  World w(wc);
  std::vector<std::unique_ptr<SequentialDriver>> owned;
  std::vector<SequentialDriver*> drivers;
  try {
    size_t n = w.devices.size();
    require(n >= 2, "needs at least two devices");
    constexpr DeId kVol = 9;
    WorldSeeder seeder(w.sim, w.coord, w.cloud.get(), w.device_ptrs(),
                       wc.scheme);
    SeedSpec spec;
    spec.de = kVol;
    spec.writer = w.dev(0).id();
    spec.blocks = blocks;
    if (n >= 3) spec.replicators.push_back(w.dev(1).id());
    seeder.seed(spec);
    w.sim.metrics() = Metrics{};
    w.start();

    Device& writer = w.dev(n - 1);
    std::vector<OpRecord> plan;
    for (BlockId b = 0; b < blocks; ++b) {
      OpRecord op;
      op.kind = OpRecord::Kind::write;
      op.de = kVol;
      op.addr = b * kBlockSize;
      op.len = kBlockSize;
      op.fill = (sc.seed << 32) ^ (b * 0x5851F42DULL + 9);
      plan.push_back(op);
    }
    owned.push_back(std::make_unique<SequentialDriver>(
        w.sim, plan_for(writer, plan)));
    drivers.push_back(owned.back().get());
    VTime t0 = w.sim.now();
    drivers[0]->start();
    bool done = wait_for(w, t0 + 600 * kUsPerSec,
                         [&] { return drivers[0]->done(); });
    require(done, "writes did not finish");
    r.extras["ops_elapsed_us"] = drivers[0]->stats().last_done - t0;
    auto conv = run_until_quiet(w, w.sim.now() + 600 * kUsPerSec);
    require(conv.has_value(), "replication did not settle");
    r.extras["writer_up_block"] =
        w.sim.metrics().traffic[writer.id()].up_block;
    r.extras["converged_at_us"] = *conv;
    r.extras["max_repl_latency_us"] =
        w.sim.metrics().max_replication_latency();
    r.ok = true;
  } catch (const Error& e) {
    r.ok = false;
    r.note = e.what();
  }
  finalize(r, w, drivers);
  if (r.ok && r.ops_failed != 0) {
    r.ok = false;
    r.note = "writes failed";
  }
  return r;
}

// Concurrent writers. With `shared` they hammer disjoint slices of one
// volume, so every op contends for the single lease; without it each hammers
// its own file and leases settle after setup.
ScenarioResult preset_false_sharing(const ScenarioConfig& sc, bool shared) {
  ScenarioResult r = base_result(sc);
  WorldConfig wc = world_from(sc, WorldConfig{});
  uint64_t per_dev = get_u64(sc, "ops", 30);
  uint64_t blocks = get_u64(sc, "blocks", 15);
  uint64_t file_blocks = get_u64(sc, "file_blocks", 16);
  World w(wc);
  std::vector<std::unique_ptr<SequentialDriver>> owned;
  std::vector<SequentialDriver*> drivers;
  try {
    size_t n = w.devices.size();
    constexpr DeId kVol = 7;
    std::vector<DeId> file_de;
    if (shared) {
      WorldSeeder seeder(w.sim, w.coord, w.cloud.get(), w.device_ptrs(),
                         wc.scheme);
      SeedSpec spec;
      spec.de = kVol;
      spec.writer = w.dev(0).id();
      spec.blocks = blocks;
      for (size_t i = 1; i < n && spec.replicators.size() + 2 <= wc.replica_target;
           ++i)
        spec.replicators.push_back(w.dev(i).id());
      seeder.seed(spec);
      w.sim.metrics() = Metrics{};
      w.start();
    } else {
      w.start();
      std::vector<UfsMount> mounts;
      mounts.reserve(n);
      for (size_t i = 0; i < n; ++i) mounts.emplace_back(w.dev(i));
      file_de = setup_files(w, mounts, file_blocks);
    }

    uint64_t span = std::max<uint64_t>(1, blocks / n);
    for (size_t j = 0; j < n; ++j) {
      std::vector<OpRecord> ops;
      ops.reserve(per_dev);
      for (uint64_t m = 0; m < per_dev; ++m) {
        OpRecord op;
        op.kind = OpRecord::Kind::write;
        op.de = shared ? kVol : file_de[j];
        uint64_t block = shared ? (j * span + m % span) : (m % file_blocks);
        op.addr = block * kBlockSize;
        op.len = kBlockSize;
        op.fill = (sc.seed << 32) ^ ((j * per_dev + m) * 0x9E3779B9ULL + 3);
        ops.push_back(op);
      }
      owned.push_back(std::make_unique<SequentialDriver>(
          w.sim, plan_for(w.dev(j), std::move(ops))));
      drivers.push_back(owned.back().get());
    }
    VTime t0 = w.sim.now();
    for (auto* d : drivers) d->start();
    bool done = wait_for(w, t0 + 7200 * kUsPerSec, [&] {
      return std::all_of(drivers.begin(), drivers.end(),
                         [](SequentialDriver* d) { return d->done(); });
    });
    require(done, "writers did not finish");
    VTime last = t0;
    uint64_t ok_ops = 0;
    for (auto* d : drivers) {
      last = std::max(last, d->stats().last_done);
      ok_ops += d->stats().ok;
    }
    r.extras["ops_done"] = ok_ops;
    r.extras["ops_elapsed_us"] = last - t0;
    auto conv = run_until_quiet(w, w.sim.now() + 1800 * kUsPerSec);
    require(conv.has_value(), "replication did not settle");
    r.ok = true;
  } catch (const Error& e) {
    r.ok = false;
    r.note = e.what();
  }
  finalize(r, w, drivers);
  if (r.ok && r.ops_failed != 0) {
    r.ok = false;
    r.note = "writes failed";
  }
  return r;
}

// One writer fills a fresh volume; how the copies fan out depends on whether
// the provider store participates.
ScenarioResult preset_replication(const ScenarioConfig& sc) {
  ScenarioResult r = base_result(sc);
  WorldConfig wc = world_from(sc, WorldConfig{});
  uint64_t writes = get_u64(sc, "writes", 16);
  World w(wc);
  std::vector<std::unique_ptr<SequentialDriver>> owned;
  std::vector<SequentialDriver*> drivers;
  try {
    w.start();
    constexpr DeId kVol = 7;
    Device& writer = w.dev(0);
    std::vector<OpRecord> plan;
    {
      OpRecord op;
      op.kind = OpRecord::Kind::create;
      op.de = kVol;
      op.addr = writes;  // size in blocks
      plan.push_back(op);
    }
    for (uint64_t b = 0; b < writes; ++b) {
      OpRecord op;
      op.kind = OpRecord::Kind::write;
      op.de = kVol;
      op.addr = b * kBlockSize;
      op.len = kBlockSize;
      op.fill = (sc.seed << 32) ^ (b * 0x2545F491ULL + 5);
      plan.push_back(op);
    }
    owned.push_back(std::make_unique<SequentialDriver>(
        w.sim, plan_for(writer, plan)));
    drivers.push_back(owned.back().get());
    VTime t0 = w.sim.now();
    drivers[0]->start();
    bool done = wait_for(w, t0 + 600 * kUsPerSec,
                         [&] { return drivers[0]->done(); });
    require(done, "writes did not finish");
    auto conv = run_until_quiet(w, w.sim.now() + 600 * kUsPerSec);
    require(conv.has_value(), "replication did not settle");
    r.extras["writer_up_block"] =
        w.sim.metrics().traffic[writer.id()].up_block;
    r.extras["converged_at_us"] = *conv;
    r.extras["max_repl_latency_us"] =
        w.sim.metrics().max_replication_latency();
    r.extras["writes_done"] = writes;
    r.ok = true;
  } catch (const Error& e) {
    r.ok = false;
    r.note = e.what();
  }
  finalize(r, w, drivers);
  if (r.ok && r.ops_failed != 0) {
    r.ok = false;
    r.note = "writes failed";
  }
  return r;
}

// Mixed ops while devices crash and links flap, then a drain to a settled
// state with the history cross-checked against the coordinator.
ScenarioResult preset_crash_churn(const ScenarioConfig& sc) {
  ScenarioResult r = base_result(sc);
  WorldConfig wc = world_from(sc, WorldConfig{});
  uint64_t per_dev = get_u64(sc, "ops", 40);
  uint64_t blocks = get_u64(sc, "blocks", 8);
  VTime churn_end = get_u64(sc, "churn_s", 400) * kUsPerSec;
  VTime cap = get_u64(sc, "cap_s", 2000) * kUsPerSec;
  bool audit = get_bool(sc, "gc_audit", true);
  World w(wc);
  std::vector<std::unique_ptr<SequentialDriver>> owned;
  std::vector<SequentialDriver*> drivers;
  try {
    size_t n = w.devices.size();
    constexpr DeId kShared = 5;
    WorldSeeder seeder(w.sim, w.coord, w.cloud.get(), w.device_ptrs(),
                       wc.scheme);
    {
      SeedSpec spec;
      spec.de = kShared;
      spec.writer = w.dev(0).id();
      spec.blocks = blocks;
      for (size_t i = 1; i < n; ++i) spec.replicators.push_back(w.dev(i).id());
      seeder.seed(spec);
    }
    std::vector<DeId> own_de(n);
    for (size_t i = 0; i < n; ++i) {
      own_de[i] = 20 + static_cast<DeId>(i);
      SeedSpec spec;
      spec.de = own_de[i];
      spec.writer = w.dev(i).id();
      spec.blocks = blocks;
      seeder.seed(spec);
    }
    w.sim.metrics() = Metrics{};
    if (audit) install_gc_audit(w);
    w.start();

    auto floors = std::make_shared<Floors>();
    std::mt19937_64 prng(sc.seed * 0x9E3779B97F4A7C15ULL + 0x2545F4914F6CDD1DULL);
    auto pick = [&prng](uint64_t lo, uint64_t hi) {
      return lo + prng() % (hi - lo + 1);
    };

    // Each device gets one crash window and one partition pulse inside the
    // churn phase; the coordinator sometimes reboots too. Floors reset at
    // every disturbance: rollback of an unacked tail is legitimate then.
    for (size_t i = 0; i < n; ++i) {
      DeviceId id = w.dev(i).id();
      VTime ct = pick(60, 200) * kUsPerSec;
      VDuration cd = pick(20, 60) * kUsPerSec;
      w.sim.schedule(ct, [&w, id, cd, floors] {
        floors->clear();
        if (w.sim.is_up(id)) w.sim.crash(id);
        w.sim.schedule(cd, [&w, id, floors] {
          floors->clear();
          if (!w.sim.is_up(id)) w.sim.restart(id);
        });
      });
      VTime pt = pick(260, 360) * kUsPerSec;
      VDuration pd = pick(10, 40) * kUsPerSec;
      w.sim.schedule(pt, [&w, id, pd, floors] {
        floors->clear();
        w.sim.set_partitioned(id, true);
        w.sim.schedule(pd, [&w, id, floors] {
          floors->clear();
          w.sim.set_partitioned(id, false);
        });
      });
    }
    if (prng() % 3 == 0) {
      VTime ct = pick(100, 300) * kUsPerSec;
      VDuration cd = pick(8, 18) * kUsPerSec;
      w.sim.schedule(ct, [&w, cd] {
        w.sim.crash(kCoordinatorId);
        w.sim.schedule(cd, [&w] { w.sim.restart(kCoordinatorId); });
      });
    }

    for (size_t i = 0; i < n; ++i) {
      std::vector<OpRecord> plan;
      for (uint64_t k = 0; k < per_dev; ++k) {
        OpRecord op;
        bool wr = prng() % 10 < 3;
        op.kind = wr ? OpRecord::Kind::write : OpRecord::Kind::read;
        op.de = (prng() % 2) ? own_de[i] : kShared;
        op.addr = (prng() % blocks) * kBlockSize;
        op.len = kBlockSize;
        op.fill = (sc.seed << 32) ^ ((i * 1000 + k) * 0x9E3779B9ULL + 11);
        plan.push_back(op);
      }
      owned.push_back(std::make_unique<SequentialDriver>(
          w.sim, plan_for(w.dev(i), plan)));
      owned.back()->set_read_check(oracle_read_check(w, floors));
      drivers.push_back(owned.back().get());
    }
    for (auto* d : drivers) d->start();

    bool done = wait_for(w, std::max(churn_end, cap / 2), [&] {
      return std::all_of(drivers.begin(), drivers.end(),
                         [](SequentialDriver* d) { return d->done(); });
    });
    require(done, "client ops did not finish");
    auto conv = run_until_quiet(w, cap);
    require(conv.has_value(), "world did not settle after churn");
    r.extras["converged_at_us"] = *conv;

    // The verified logs must be byte-level prefixes of the coordinator's.
    for (auto& dp : w.devices) {
      for (const auto& [de, dl] : dp->log().all()) {
        const std::vector<Update>* cl = w.coord.log(de);
        require(cl != nullptr, "device tracks a de the coordinator lacks");
        SeqNo upto = std::min<SeqNo>(dl.head(), cl->size());
        for (SeqNo s = 1; s <= upto; ++s) {
          require(canonical_signed_bytes(dl.at(s)) ==
                      canonical_signed_bytes((*cl)[s - 1]),
                  "device log diverged from coordinator history");
        }
      }
    }
    // Every version still needed by the stable snapshot must be fetchable
    // somewhere, bytes matching the signed digest.
    for (DeId de : w.coord.de_ids()) {
      const std::vector<Update>* cl = w.coord.log(de);
      SeqNo f = 0;
      for (SeqNo s = 1; s <= cl->size(); ++s) {
        const Update& u = (*cl)[s - 1];
        if (u.kind == UpdateKind::WRITE &&
            u.replica_count() < wc.replica_target)
          break;
        f = s;
      }
      std::map<BlockId, VersionNo> floor;
      for (SeqNo s = 1; s <= f; ++s) {
        const Update& u = (*cl)[s - 1];
        if (u.kind == UpdateKind::WRITE)
          floor[u.block] = std::max(floor[u.block], u.version);
      }
      for (const Update& u : *cl) {
        if (u.kind != UpdateKind::WRITE) continue;
        auto fit = floor.find(u.block);
        if (fit != floor.end() && u.version < fit->second) continue;
        bool found = false;
        auto probe = [&](const BlockData* bd) {
          if (found || !bd) return;
          found = content_hash({bd->data(), bd->size()}) == u.hash;
        };
        for (auto& dp : w.devices)
          probe(dp->store().get(de, u.block, u.version));
        if (w.cloud) probe(w.cloud->store().get(de, u.block, u.version));
        require(found, "a live version is no longer fetchable anywhere");
      }
    }

    uint64_t quarantined = 0;
    for (auto& dp : w.devices) quarantined += dp->quarantined().size();
    r.extras["quarantined"] = quarantined;
    r.extras["fault_gap"] = count_faults(w, FaultKind::gap_detected);
    r.extras["fault_conflict"] = count_faults(w, FaultKind::conflict_detected);
    for (const auto& f : w.sim.faults()) {
      bool forbidden = f.kind == FaultKind::fork_detected ||
                       f.kind == FaultKind::bad_signature ||
                       f.kind == FaultKind::integrity_violation ||
                       f.kind == FaultKind::not_entitled ||
                       f.kind == FaultKind::suspect_truncation;
      require(!forbidden, "honest run reported an adversary-class fault");
    }
    r.ok = true;
  } catch (const Error& e) {
    r.ok = false;
    r.note = e.what();
  }
  finalize(r, w, drivers);
  return r;
}

// Provider hides the log tail (and one entry) during a lease handoff; the
// incoming holder must notice instead of serving stale state.
ScenarioResult preset_truncation(const ScenarioConfig& sc) {
  ScenarioResult r = base_result(sc);
  WorldConfig wc = world_from(sc, WorldConfig{});
  World w(wc);
  std::vector<SequentialDriver*> drivers;
  try {
    size_t n = w.devices.size();
    require(n >= 3, "needs three devices");
    constexpr DeId kVol = 6;
    constexpr uint64_t kBlocks = 6;
    Device& a = w.dev(0);
    Device& b = w.dev(1);
    WorldSeeder seeder(w.sim, w.coord, w.cloud.get(), w.device_ptrs(),
                       wc.scheme);
    SeedSpec spec;
    spec.de = kVol;
    spec.writer = a.id();
    spec.blocks = kBlocks;
    spec.replicators.push_back(w.dev(2).id());
    spec.skip_log.push_back(b.id());
    SeededLog seeded = seeder.seed(spec);

    // The victim knows only a prefix; everything newer must come from the
    // coordinator, which is lying.
    constexpr SeqNo kPrefix = 2;
    DeLog& bl = b.log_mut().open(kVol);
    for (SeqNo s = 1; s <= kPrefix; ++s)
      bl.ingest(seeded.updates[s - 1], wc.scheme, b.keys());
    for (const Update& rec : seeded.records)
      if (rec.block < kPrefix) bl.ingest_replication(rec, wc.scheme, b.keys(),
                                                     kCloudNodeId);
    b.seed_acked(kVol, kPrefix);

    w.coord.adversary().truncate_at[kVol] = 4;
    w.coord.adversary().omit_updates.insert({kVol, 3});
    w.sim.metrics() = Metrics{};
    w.start();

    r.extras["attack_started_us"] = w.sim.now();
    b.submit_write(kVol, 5 * kBlockSize, fill_bytes(0xB0B, kBlockSize),
                   [](Errc) {});
    bool seen = wait_for(w, 200 * kUsPerSec, [&] {
      return w.sim.saw_fault(FaultKind::gap_detected) &&
             w.sim.saw_fault(FaultKind::suspect_truncation);
    });
    require(seen, "victim never flagged the hidden history");
    require(!b.holds_lease(kVol), "victim took the lease over a gap");
    for (const auto& f : w.sim.faults()) {  // first occurrence of each
      if (f.kind == FaultKind::gap_detected && !r.extras.count("gap_at_us"))
        r.extras["gap_at_us"] = f.t;
      if (f.kind == FaultKind::suspect_truncation &&
          !r.extras.count("truncation_at_us"))
        r.extras["truncation_at_us"] = f.t;
    }
    r.ok = true;
  } catch (const Error& e) {
    r.ok = false;
    r.note = e.what();
  }
  finalize(r, w, drivers);
  return r;
}

// Provider serves one device a conflicting signed history, then recants;
// the first honest refetch must surface the fork.
ScenarioResult preset_equivocation(const ScenarioConfig& sc) {
  ScenarioResult r = base_result(sc);
  WorldConfig wc = world_from(sc, WorldConfig{});
  // Unattainable replica target keeps every device refetching history, so
  // the recant is guaranteed to cross the forged view.
  wc.replica_target = get_u64(sc, "target", wc.devices + 2);
  World w(wc);
  std::vector<SequentialDriver*> drivers;
  try {
    size_t n = w.devices.size();
    require(n >= 3, "needs three devices");
    constexpr DeId kVol = 8;
    Device& writer = w.dev(0);
    Device& victim = w.dev(n - 1);
    WorldSeeder seeder(w.sim, w.coord, w.cloud.get(), w.device_ptrs(),
                       wc.scheme);
    SeedSpec spec;
    spec.de = kVol;
    spec.writer = writer.id();
    spec.blocks = 4;
    spec.replicators.push_back(w.dev(1).id());
    spec.skip_log.push_back(victim.id());
    SeededLog seeded = seeder.seed(spec);

    // A second, conflicting entry at seq 2, validly signed by the writer:
    // equivocation presumes a signer willing to double-sign.
    Update alt = seeded.updates[1];
    alt.attachments.clear();
    BlockData plain = fill_block(0xA17E41A7);
    BlockData ct =
        encrypt_block(plain, kVol, alt.block, alt.version, writer.keys());
    alt.hash = content_hash({ct.data(), ct.size()});
    alt.sig =
        sign(canonical_signed_bytes(alt), wc.scheme, writer.keys(), writer.id());
    w.sim.oracle().record_adversary_variant(alt);
    w.coord.adversary().equivocate[victim.id()][kVol][2] = alt;
    w.sim.metrics() = Metrics{};
    w.start();

    bool took = wait_for(w, 120 * kUsPerSec, [&] {
      const DeLog* dl = victim.log().find(kVol);
      return dl && dl->head() >= 2 &&
             canonical_signed_bytes(dl->at(2)) == canonical_signed_bytes(alt);
    });
    require(took, "victim never ingested the forged view");
    VTime recant_at = w.sim.now();
    w.coord.adversary().equivocate.clear();

    bool seen = wait_for(w, recant_at + 200 * kUsPerSec, [&] {
      return w.sim.saw_fault(FaultKind::fork_detected);
    });
    require(seen, "refetch never surfaced the fork");
    for (const auto& f : w.sim.faults()) {
      if (f.kind == FaultKind::fork_detected) {
        r.extras["fork_at_us"] = f.t;
        break;
      }
    }
    require(r.extras["fork_at_us"] >= recant_at,
            "fork flagged before the recant");
    // First verified entry wins; the recant must not rewrite it.
    require(canonical_signed_bytes(victim.log().find(kVol)->at(2)) ==
                canonical_signed_bytes(alt),
            "fork rewrote an already-verified entry");
    r.extras["recant_at_us"] = recant_at;
    r.ok = true;
  } catch (const Error& e) {
    r.ok = false;
    r.note = e.what();
  }
  finalize(r, w, drivers);
  return r;
}

// Provider invents replication records for a ghost device. Nobody may count
// them, and real replication has to converge anyway.
ScenarioResult preset_forged_replication(const ScenarioConfig& sc) {
  ScenarioResult r = base_result(sc);
  WorldConfig wc = world_from(sc, WorldConfig{});
  uint64_t writes = get_u64(sc, "writes", 4);
  World w(wc);
  std::vector<std::unique_ptr<SequentialDriver>> owned;
  std::vector<SequentialDriver*> drivers;
  try {
    constexpr DeId kVol = 7;
    constexpr DeviceId kGhost = 99;
    w.coord.adversary().forge_replication = true;
    w.coord.adversary().forge_replicator = kGhost;
    w.start();
    Device& writer = w.dev(0);
    std::vector<OpRecord> plan;
    {
      OpRecord op;
      op.kind = OpRecord::Kind::create;
      op.de = kVol;
      op.addr = writes;
      plan.push_back(op);
    }
    for (uint64_t b = 0; b < writes; ++b) {
      OpRecord op;
      op.kind = OpRecord::Kind::write;
      op.de = kVol;
      op.addr = b * kBlockSize;
      op.len = kBlockSize;
      op.fill = (sc.seed << 32) ^ (b * 0x6C62272EULL + 21);
      plan.push_back(op);
    }
    owned.push_back(std::make_unique<SequentialDriver>(
        w.sim, plan_for(writer, plan)));
    drivers.push_back(owned.back().get());
    drivers[0]->start();
    bool done = wait_for(w, 600 * kUsPerSec,
                         [&] { return drivers[0]->done(); });
    require(done, "writes did not finish");
    auto conv = run_until_quiet(w, w.sim.now() + 900 * kUsPerSec);
    require(conv.has_value(),
            "real replication never converged despite the forgeries");
    require(w.sim.saw_fault(FaultKind::bad_signature),
            "forged records sailed through unreported");
    for (auto& dp : w.devices) {
      for (const auto& [de, dl] : dp->log().all()) {
        for (SeqNo s = 1; s <= dl.head(); ++s) {
          const Update& u = dl.at(s);
          if (u.kind == UpdateKind::WRITE)
            require(!u.has_replica(kGhost),
                    "a forged replication record was accepted");
        }
      }
    }
    r.extras["forged_rejections"] = count_faults(w, FaultKind::bad_signature);
    r.extras["converged_at_us"] = *conv;
    r.ok = true;
  } catch (const Error& e) {
    r.ok = false;
    r.note = e.what();
  }
  finalize(r, w, drivers);
  if (r.ok && r.ops_failed != 0) {
    r.ok = false;
    r.note = "writes failed";
  }
  return r;
}

// Provider store serves bit-flipped blocks; reads flag each one and fall
// back to a device replica, so every read still returns authored bytes.
ScenarioResult preset_corrupt_cloud(const ScenarioConfig& sc) {
  ScenarioResult r = base_result(sc);
  WorldConfig wc = world_from(sc, WorldConfig{});
  uint64_t blocks = get_u64(sc, "blocks", 8);
  World w(wc);
  std::vector<std::unique_ptr<SequentialDriver>> owned;
  std::vector<SequentialDriver*> drivers;
  try {
    size_t n = w.devices.size();
    require(n >= 3, "needs three devices");
    require(w.cloud != nullptr, "needs the provider store");
    constexpr DeId kVol = 11;
    WorldSeeder seeder(w.sim, w.coord, w.cloud.get(), w.device_ptrs(),
                       wc.scheme);
    SeedSpec spec;
    spec.de = kVol;
    spec.writer = w.dev(0).id();
    spec.blocks = blocks;
    spec.replicators.push_back(w.dev(1).id());
    seeder.seed(spec);
    w.sim.metrics() = Metrics{};
    w.cloud->policy().corrupt_blocks = true;
    w.start();

    Device& reader = w.dev(n - 1);
    std::vector<OpRecord> plan;
    for (BlockId b = 0; b < blocks; ++b) {
      OpRecord op;
      op.kind = OpRecord::Kind::read;
      op.de = kVol;
      op.addr = b * kBlockSize;
      op.len = kBlockSize;
      plan.push_back(op);
    }
    owned.push_back(std::make_unique<SequentialDriver>(
        w.sim, plan_for(reader, plan)));
    auto floors = std::make_shared<Floors>();
    owned.back()->set_read_check(oracle_read_check(w, floors));
    drivers.push_back(owned.back().get());
    drivers[0]->start();
    bool done = wait_for(w, 600 * kUsPerSec,
                         [&] { return drivers[0]->done(); });
    require(done, "reads did not finish");
    require(w.sim.saw_fault(FaultKind::integrity_violation),
            "corrupted blocks never flagged");
    r.extras["integrity_faults"] =
        count_faults(w, FaultKind::integrity_violation);
    // Nothing bit-flipped may have landed in any device store.
    for (auto& dp : w.devices) {
      for (auto& [de, dl] : dp->log().all()) {
        for (auto [blk, v] : dl.all_block_versions()) {
          const BlockData* c = dp->store().get(de, blk, v);
          if (!c) continue;
          require(content_hash({c->data(), c->size()}) ==
                      dl.write_for(blk, v)->hash,
                  "device stored unverified bytes");
        }
      }
    }
    r.ok = true;
  } catch (const Error& e) {
    r.ok = false;
    r.note = e.what();
  }
  finalize(r, w, drivers);
  if (r.ok && (r.ops_failed != 0 || r.reads_checked != blocks)) {
    r.ok = false;
    r.note = "reads failed or went unchecked";
  }
  return r;
}

}  // namespace

// --- registry ----------------------------------------------------------------

const std::vector<PresetInfo>& scenario_presets() {
  static const std::vector<PresetInfo> kPresets = {
      {"compile", "per-device files in a shared namespace, 70/30 read/write"},
      {"sread", "one device streams a seeded volume it has no copies of"},
      {"swrite", "one device overwrites a seeded volume end to end"},
      {"false-sharing",
       "concurrent writers on disjoint slices of one shared volume"},
      {"false-sharing-ufs",
       "concurrent writers, each in its own file; leases stay put"},
      {"replication",
       "one writer fills a fresh volume; copy fan-out with or without the "
       "provider store"},
      {"crash-churn",
       "mixed ops under crashes and partitions, drained to a settled state"},
      {"truncation-attack",
       "provider hides the log tail and one entry during a lease handoff"},
      {"equivocation-attack",
       "provider serves one device a conflicting history, then recants"},
      {"forged-replication",
       "provider invents replication records nobody signed"},
      {"corrupt-cloud",
       "provider store serves corrupted blocks; reads self-correct"},
  };
  return kPresets;
}

bool is_scenario_preset(const std::string& name) {
  for (const auto& p : scenario_presets())
    if (p.name == name) return true;
  return false;
}

ScenarioResult run_scenario(const ScenarioConfig& cfg) {
  ScenarioResult r = base_result(cfg);
  try {
    if (cfg.preset == "compile") return preset_compile(cfg);
    if (cfg.preset == "sread") return preset_sread(cfg);
    if (cfg.preset == "swrite") return preset_swrite(cfg);
    if (cfg.preset == "false-sharing") return preset_false_sharing(cfg, true);
    if (cfg.preset == "false-sharing-ufs")
      return preset_false_sharing(cfg, false);
    if (cfg.preset == "replication") return preset_replication(cfg);
    if (cfg.preset == "crash-churn") return preset_crash_churn(cfg);
    if (cfg.preset == "truncation-attack") return preset_truncation(cfg);
    if (cfg.preset == "equivocation-attack") return preset_equivocation(cfg);
    if (cfg.preset == "forged-replication")
      return preset_forged_replication(cfg);
    if (cfg.preset == "corrupt-cloud") return preset_corrupt_cloud(cfg);
    r.note = "unknown preset: " + cfg.preset;
  } catch (const Error& e) {
    r.ok = false;
    r.note = e.what();
  }
  return r;
}

}  // namespace decloud
