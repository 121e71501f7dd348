// Full-system gate. Nine checks, one verdict line each, nonzero exit if any
// fail. `--golden-dir DIR` points at the reference CSVs; `--write-golden`
// regenerates them from the current build instead of comparing.
#include <algorithm>
#include <chrono>
#include <cstdarg>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "decloud/crypto.hpp"
#include "decloud/messages.hpp"
#include "decloud/rebuild.hpp"
#include "decloud/report.hpp"
#include "decloud/scenario.hpp"
#include "decloud/workload.hpp"

using namespace decloud;

namespace {

struct Check {
  int id = 0;
  std::string name;
  bool pass = false;
  std::string detail;
};

double wall_seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

ScenarioResult run(const std::string& preset, uint64_t seed,
                   std::map<std::string, std::string> overrides = {}) {
  ScenarioConfig cfg;
  cfg.preset = preset;
  cfg.seed = seed;
  cfg.overrides = std::move(overrides);
  return run_scenario(cfg);
}

uint64_t total_ctrl(const Metrics& m) {
  uint64_t sum = 0;
  for (const auto& [id, t] : m.traffic) sum += t.up_ctrl;
  return sum;
}

std::string fmt(const char* f, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, f);
  vsnprintf(buf, sizeof buf, f, ap);
  va_end(ap);
  return buf;
}

// Shared helpers for the checks that drive a World directly.

template <typename Pred>
bool advance_until(World& w, VDuration budget, Pred p) {
  VTime cap = w.sim.now() + budget;
  while (!p()) {
    if (w.sim.now() >= cap) return false;
    w.sim.run_until(w.sim.now() + 100 * kUsPerMs);
  }
  return true;
}

Errc do_write(World& w, Device& d, DeId de, uint64_t addr, uint64_t fill) {
  auto done = std::make_shared<std::optional<Errc>>();
  d.submit_write(de, addr, fill_bytes(fill, kBlockSize),
                 [done](Errc e) { *done = e; });
  if (!advance_until(w, 300 * kUsPerSec, [&] { return done->has_value(); }))
    return Errc::unavailable;
  return **done;
}

// --- 1: randomized safety sweep ----------------------------------------------

Check check_safety_sweep() {
  Check c{1, "safety sweep", false, ""};
  auto t0 = std::chrono::steady_clock::now();
  const int kSeeds = 1000;
  const int kRsaSeeds = 10;  // slower scheme gets a shorter churn window
  for (int seed = 1; seed <= kSeeds; ++seed) {
    std::map<std::string, std::string> ov{
        {"ops", "4"}, {"churn_s", "120"}, {"cap_s", "900"}, {"devices", "3"}};
    if (seed > kSeeds - kRsaSeeds) {
      ov["scheme"] = "rsa";
      ov["ops"] = "2";
      ov["churn_s"] = "60";
      ov["cap_s"] = "500";
    }
    ScenarioResult r = run("crash-churn", static_cast<uint64_t>(seed), ov);
    if (!r.ok) {
      c.detail = fmt("seed %d failed: %s", seed, r.note.c_str());
      return c;
    }
  }
  double secs = wall_seconds_since(t0);
  if (secs > 30.0) {
    c.detail = fmt("%d seeds clean but took %.1fs (budget 30s)", kSeeds, secs);
    return c;
  }
  c.pass = true;
  c.detail = fmt(
      "%d crash/partition seeds clean in %.1fs; lease exclusivity, log "
      "prefix consistency and store hashes oracle-checked throughout",
      kSeeds, secs);
  return c;
}

// --- 2: adversary detection --------------------------------------------------

Check check_adversaries() {
  Check c{2, "adversary detection", false, ""};

  ScenarioResult tr = run("truncation-attack", 2);
  if (!tr.ok) {
    c.detail = "truncation: " + tr.note;
    return c;
  }
  uint64_t started = tr.extras.at("attack_started_us");
  uint64_t first =
      std::min(tr.extras.at("gap_at_us"), tr.extras.at("truncation_at_us"));
  uint64_t bound = 2 * 30 * kUsPerSec;  // two lease-holder heartbeat periods
  if (first - started > bound) {
    c.detail = fmt("truncation flagged only after %.1fs virtual",
                   (first - started) / 1e6);
    return c;
  }

  ScenarioResult eq = run("equivocation-attack", 2);
  if (!eq.ok) {
    c.detail = "equivocation: " + eq.note;
    return c;
  }
  if (eq.extras.at("fork_at_us") < eq.extras.at("recant_at_us")) {
    c.detail = "fork reported before the recant could be observed";
    return c;
  }

  ScenarioResult fr = run("forged-replication", 2);
  if (!fr.ok) {
    c.detail = "forged replication: " + fr.note;
    return c;
  }
  if (fr.extras.at("forged_rejections") == 0) {
    c.detail = "forged records were never rejected";
    return c;
  }

  ScenarioResult cc = run("corrupt-cloud", 2);
  if (!cc.ok) {
    c.detail = "corrupt cloud: " + cc.note;
    return c;
  }
  if (cc.extras.at("integrity_faults") == 0) {
    c.detail = "corrupted blocks were never flagged";
    return c;
  }

  c.pass = true;
  c.detail = fmt(
      "truncation flagged in %.1fs virtual; fork pinned after recant; "
      "%llu forged records rejected; %llu corrupt blocks refused",
      (first - started) / 1e6,
      static_cast<unsigned long long>(fr.extras.at("forged_rejections")),
      static_cast<unsigned long long>(cc.extras.at("integrity_faults")));
  return c;
}

// --- 3: durability via device-only rebuild -----------------------------------

Check check_durability() {
  Check c{3, "durability rebuild", false, ""};
  auto t0 = std::chrono::steady_clock::now();

  WorldConfig wc;
  wc.devices = 3;
  wc.network = "unlimited";
  World w(wc);
  WorldSeeder seeder(w.sim, w.coord, w.cloud.get(), w.device_ptrs(),
                     w.cfg.scheme);
  SeedSpec spec;
  spec.de = 21;
  spec.writer = w.dev(0).id();
  spec.blocks = 6;
  seeder.seed(spec);
  w.start();

  for (BlockId b = 0; b < 6; ++b)
    if (do_write(w, w.dev(0), 21, b * kBlockSize, 0x9000 + b) != Errc::ok) {
      c.detail = "setup write failed";
      return c;
    }
  for (BlockId b = 0; b < 3; ++b)
    if (do_write(w, w.dev(0), 21, b * kBlockSize, 0x9100 + b) != Errc::ok) {
      c.detail = "setup rewrite failed";
      return c;
    }
  if (!run_until_quiet(w, w.sim.now() + 600 * kUsPerSec)) {
    c.detail = "world never settled";
    return c;
  }

  // Provider gone: coordinator and its store are no longer reachable.
  w.sim.crash(kCoordinatorId);
  w.sim.crash(kCloudNodeId);

  auto expect_cipher = [&](BlockId b) {
    VersionNo v = b < 3 ? 3 : 2;
    uint64_t fill = (b < 3 ? 0x9100 : 0x9000) + b;
    return encrypt_block(fill_block(fill), 21, b, v, w.dev(0).keys());
  };

  std::vector<const Device*> all;
  for (auto& d : w.devices) all.push_back(d.get());
  RebuildResult full = rebuild_from_devices(all, w.cfg.scheme);
  if (!full.complete()) {
    c.detail = fmt("full rebuild missing %zu versions", full.missing.size());
    return c;
  }
  for (BlockId b = 0; b < 6; ++b) {
    VersionNo v = full.logs.at(21).latest_version(b);
    if (v != (b < 3 ? 3u : 2u)) {
      c.detail = fmt("block %llu rebuilt at version %u",
                     static_cast<unsigned long long>(b), v);
      return c;
    }
    const BlockData* got = full.blocks.get(21, b, v);
    if (!got || *got != expect_cipher(b)) {
      c.detail = fmt("block %llu bytes differ from the reference",
                     static_cast<unsigned long long>(b));
      return c;
    }
  }

  // Any single device may die too; two survivors still rebuild bit-exactly.
  Digest20 want = full.digest();
  for (size_t kill = 0; kill < all.size(); ++kill) {
    std::vector<const Device*> rest;
    for (size_t i = 0; i < all.size(); ++i)
      if (i != kill) rest.push_back(all[i]);
    RebuildResult part = rebuild_from_devices(rest, w.cfg.scheme);
    if (!part.complete() || part.digest() != want) {
      c.detail = fmt("rebuild without device %zu diverged", kill);
      return c;
    }
  }

  double secs = wall_seconds_since(t0);
  if (secs >= 5.0) {
    c.detail = fmt("bit-exact but took %.1fs (budget 5s)", secs);
    return c;
  }
  c.pass = true;
  c.detail = fmt(
      "provider killed: 3-device rebuild bit-exact vs reference; every "
      "single-device loss also bit-exact; %.2fs", secs);
  return c;
}

// --- 4: replication convergence bound ----------------------------------------

Check check_replication_latency() {
  Check c{4, "replication convergence", false, ""};
  ScenarioResult r = run("replication", 1);
  if (!r.ok) {
    c.detail = r.note;
    return c;
  }
  uint64_t worst = r.extras.at("max_repl_latency_us");
  uint64_t bound = (3 * 60 + 10) * kUsPerSec;
  if (worst > bound) {
    c.detail = fmt("slowest write reached 3 copies after %.1fs virtual",
                   worst / 1e6);
    return c;
  }
  c.pass = true;
  c.detail = fmt(
      "every write at 3 copies within %.1fs virtual (bound %.0fs); %llu "
      "writes measured",
      worst / 1e6, bound / 1e6,
      static_cast<unsigned long long>(r.extras.at("writes_done")));
  return c;
}

// --- 5: GC safety under sustained overwrite churn -----------------------------

Check check_gc_safety() {
  Check c{5, "snapshot-safe garbage collection", false, ""};

  // Dedicated churn: one DE, four blocks, 520 randomized overwrites with the
  // frontier audit re-run from the raw log after every collection pass.
  WorldConfig wc;
  wc.devices = 3;
  wc.network = "unlimited";
  World w(wc);
  install_gc_audit(w);
  WorldSeeder seeder(w.sim, w.coord, w.cloud.get(), w.device_ptrs(),
                     w.cfg.scheme);
  SeedSpec spec;
  spec.de = 17;
  spec.writer = w.dev(0).id();
  spec.blocks = 4;
  seeder.seed(spec);
  w.start();

  std::mt19937_64 prng(41);
  std::vector<OpRecord> ops;
  const uint64_t kWrites = 520;
  for (uint64_t i = 0; i < kWrites; ++i) {
    OpRecord op;
    op.kind = OpRecord::Kind::write;
    op.de = 17;
    op.addr = (prng() % 4) * kBlockSize;
    op.len = kBlockSize;
    op.fill = prng();
    ops.push_back(op);
  }
  SequentialDriver driver(w.sim, plan_for(w.dev(0), std::move(ops)));
  driver.start();
  if (!advance_until(w, 3600 * kUsPerSec, [&] { return driver.done(); })) {
    c.detail = "write churn never finished";
    return c;
  }
  if (driver.stats().failed != 0) {
    c.detail = fmt("%llu writes failed",
                   static_cast<unsigned long long>(driver.stats().failed));
    return c;
  }
  if (!run_until_quiet(w, w.sim.now() + 600 * kUsPerSec)) {
    c.detail = "world never settled after churn";
    return c;
  }

  // Superseded versions must actually be gone, newest ones still present.
  const DeLog* dl = w.dev(0).log().find(17);
  uint64_t evicted = 0;
  for (auto& dp : w.devices) {
    for (BlockId b = 0; b < 4; ++b) {
      VersionNo latest = dl->latest_version(b);
      for (VersionNo v = 1; v < latest; ++v)
        if (dp->store().has(17, b, v)) {
          c.detail = fmt("stale version %u of block %llu survived GC", v,
                         static_cast<unsigned long long>(b));
          return c;
        } else {
          ++evicted;
        }
    }
  }
  if (!w.dev(0).store().has(17, 0, dl->latest_version(0))) {
    c.detail = "writer lost its newest copy";
    return c;
  }
  c.pass = true;
  c.detail = fmt(
      "%llu overwrites; every post-GC frontier re-derived from the raw log "
      "and all covered versions fetchable; %llu stale slots verified empty",
      static_cast<unsigned long long>(kWrites),
      static_cast<unsigned long long>(evicted));
  return c;
}

// --- 6: bandwidth accounting -------------------------------------------------

Check check_bandwidth_accounting() {
  Check c{6, "bandwidth accounting", false, ""};

  // Wire sizes against the field-sum arithmetic.
  Update u;
  u.kind = UpdateKind::WRITE;
  u.de = 3;
  u.signer = 10;
  u.seq = 5;
  u.block = 1;
  u.version = 2;
  Message mw;
  mw.kind = MsgKind::WRITE;
  mw.de = 3;
  mw.sender = 10;
  u.sig.assign(signature_size(SigScheme::ASYM_RSA2048), 0);
  mw.body = UpdateBody{u, {10, 2}};
  size_t rsa_write = 24 + (8 + 4 + 8 + 20 + 2 + 2 * 8 + 256);
  if (mw.wire_size() != rsa_write || mw.wire_size() != 338) {
    c.detail = fmt("RSA write wire size %zu != %zu", mw.wire_size(), rsa_write);
    return c;
  }
  u.sig.assign(signature_size(SigScheme::SYM_HMAC_SHA1), 0);
  mw.body = UpdateBody{u, {10, 2}};
  if (mw.wire_size() != 102) {
    c.detail = fmt("HMAC write wire size %zu != 102", mw.wire_size());
    return c;
  }
  Message mb;
  mb.kind = MsgKind::BLOCK_RESPONSE;
  mb.de = 3;
  mb.sender = 2;
  mb.body = BlockResponseBody{};
  if (mb.wire_size() != 24 + 8 + 4 + 4096 || mb.block_bytes() != 4108) {
    c.detail = "block response size diverged from field sum";
    return c;
  }
  Message hb;
  hb.kind = MsgKind::HEARTBEAT;
  hb.sender = 10;
  if (hb.wire_size() != 24) {
    c.detail = "heartbeat is no longer header-only";
    return c;
  }

  // Same seeded run under each signature scheme, unlimited links: flows are
  // identical, so control bytes differ by exactly the signature delta.
  std::map<std::string, std::string> ov{{"network", "unlimited"}};
  auto rsa = run("replication", 1, [&] { auto m = ov; m["scheme"] = "rsa"; return m; }());
  auto hmac = run("replication", 1, [&] { auto m = ov; m["scheme"] = "hmac"; return m; }());
  auto off = run("replication", 1, [&] { auto m = ov; m["scheme"] = "off"; return m; }());
  if (!rsa.ok || !hmac.ok || !off.ok) {
    c.detail = "scheme comparison run failed: " + rsa.note + hmac.note + off.note;
    return c;
  }
  if (rsa.metrics.msgs_sent != hmac.metrics.msgs_sent ||
      hmac.metrics.msgs_sent != off.metrics.msgs_sent ||
      rsa.metrics.signed_updates_sent != hmac.metrics.signed_updates_sent ||
      hmac.metrics.signed_updates_sent != off.metrics.signed_updates_sent) {
    c.detail = "scheme change altered the message flow";
    return c;
  }
  uint64_t signed_n = rsa.metrics.signed_updates_sent;
  uint64_t ctrl_rsa = total_ctrl(rsa.metrics);
  uint64_t ctrl_hmac = total_ctrl(hmac.metrics);
  uint64_t ctrl_off = total_ctrl(off.metrics);
  if (ctrl_rsa - ctrl_hmac != 236 * signed_n) {
    c.detail = fmt("RSA-HMAC control delta %llu != 236 x %llu",
                   static_cast<unsigned long long>(ctrl_rsa - ctrl_hmac),
                   static_cast<unsigned long long>(signed_n));
    return c;
  }
  if (ctrl_hmac - ctrl_off != 20 * signed_n) {
    c.detail = fmt("HMAC-OFF control delta %llu != 20 x %llu",
                   static_cast<unsigned long long>(ctrl_hmac - ctrl_off),
                   static_cast<unsigned long long>(signed_n));
    return c;
  }
  if (!(ctrl_rsa > ctrl_hmac && ctrl_hmac > ctrl_off)) {
    c.detail = "control-byte ordering by scheme is not strict";
    return c;
  }
  c.pass = true;
  c.detail = fmt(
      "wire sizes match field sums; control bytes RSA %llu > HMAC %llu > "
      "OFF %llu, deltas exactly 236/20 x %llu signed updates",
      static_cast<unsigned long long>(ctrl_rsa),
      static_cast<unsigned long long>(ctrl_hmac),
      static_cast<unsigned long long>(ctrl_off),
      static_cast<unsigned long long>(signed_n));
  return c;
}

// --- 7: false-sharing contention trend ----------------------------------------

Check check_false_sharing() {
  Check c{7, "false-sharing trend", false, ""};
  auto throughput = [](const ScenarioResult& r, uint64_t devs) {
    return static_cast<double>(r.extras.at("ops_done")) / devs /
           static_cast<double>(r.extras.at("ops_elapsed_us"));
  };

  std::map<uint64_t, ScenarioResult> ubd;
  for (uint64_t n : {1, 2, 3}) {
    ubd[n] = run("false-sharing", 1, {{"devices", std::to_string(n)}});
    if (!ubd[n].ok) {
      c.detail = fmt("shared-volume run with %llu devices failed: %s",
                     static_cast<unsigned long long>(n), ubd[n].note.c_str());
      return c;
    }
  }
  uint64_t sw1 = ubd[1].extras.at("lease_switches");
  uint64_t sw2 = ubd[2].extras.at("lease_switches");
  uint64_t sw3 = ubd[3].extras.at("lease_switches");
  // 30 ops per device: contention forces at least one switch per op issued
  // by the devices that do not currently hold the lease.
  if (!(sw2 >= 30 && sw3 >= 60 && sw3 > sw2 && sw2 > sw1)) {
    c.detail = fmt("switch counts %llu/%llu/%llu do not grow with writers",
                   static_cast<unsigned long long>(sw1),
                   static_cast<unsigned long long>(sw2),
                   static_cast<unsigned long long>(sw3));
    return c;
  }
  double ubd_degrade = throughput(ubd[1], 1) / throughput(ubd[3], 3);
  if (ubd_degrade < 5.0) {
    c.detail = fmt("shared-volume throughput degraded only %.1fx from 1 to 3 "
                   "devices", ubd_degrade);
    return c;
  }

  auto ufs1 = run("false-sharing-ufs", 1, {{"devices", "1"}});
  auto ufs3 = run("false-sharing-ufs", 1, {{"devices", "3"}});
  auto ufs3b = run("false-sharing-ufs", 1,
                   {{"devices", "3"}, {"ops", "60"}});
  if (!ufs1.ok || !ufs3.ok || !ufs3b.ok) {
    c.detail = "own-file run failed: " + ufs1.note + ufs3.note + ufs3b.note;
    return c;
  }
  uint64_t usw3 = ufs3.extras.at("lease_switches");
  uint64_t usw3b = ufs3b.extras.at("lease_switches");
  if (usw3 != usw3b) {
    c.detail = fmt("own-file switches moved with op count: %llu vs %llu",
                   static_cast<unsigned long long>(usw3),
                   static_cast<unsigned long long>(usw3b));
    return c;
  }
  if (usw3 > 2 * 3 + 4) {  // bounded by file creations plus namespace setup
    c.detail = fmt("own-file switches %llu exceed the creation bound",
                   static_cast<unsigned long long>(usw3));
    return c;
  }
  double ufs_degrade = throughput(ufs1, 1) / throughput(ufs3, 3);
  if (ufs_degrade > 1.2) {
    c.detail = fmt("own-file throughput degraded %.2fx from 1 to 3 devices",
                   ufs_degrade);
    return c;
  }
  c.pass = true;
  c.detail = fmt(
      "shared volume: switches %llu/%llu/%llu, throughput down %.0fx at 3 "
      "devices; own files: switches fixed at %llu, throughput down %.2fx",
      static_cast<unsigned long long>(sw1),
      static_cast<unsigned long long>(sw2),
      static_cast<unsigned long long>(sw3), ubd_degrade,
      static_cast<unsigned long long>(usw3), ufs_degrade);
  return c;
}

// --- 8: upload savings from the provider store ---------------------------------

Check check_upload_savings() {
  Check c{8, "holder upload savings", false, ""};
  std::map<std::string, std::string> base{{"network", "unlimited"}};
  auto with_pull = run("swrite", 1, base);
  auto no_pull = run("swrite", 1, [&] {
    auto m = base;
    m["pull_from_cloud"] = "0";
    return m;
  }());
  if (!with_pull.ok || !no_pull.ok) {
    c.detail = "swrite runs failed: " + with_pull.note + no_pull.note;
    return c;
  }
  uint64_t writes = 64;  // preset overwrites the whole 64-block volume
  uint64_t per_block = 4108;
  uint64_t up_pull = with_pull.extras.at("writer_up_block");
  uint64_t up_direct = no_pull.extras.at("writer_up_block");
  if (up_pull != writes * per_block) {
    c.detail = fmt("holder uploaded %llu block bytes, want exactly one copy "
                   "per write (%llu)",
                   static_cast<unsigned long long>(up_pull),
                   static_cast<unsigned long long>(writes * per_block));
    return c;
  }
  if (up_direct - up_pull != writes * per_block) {
    c.detail = fmt("savings %llu != (target-2) x %llu writes x %llu",
                   static_cast<unsigned long long>(up_direct - up_pull),
                   static_cast<unsigned long long>(writes),
                   static_cast<unsigned long long>(per_block));
    return c;
  }
  c.pass = true;
  c.detail = fmt(
      "holder block upload %llu with provider-store fan-out vs %llu without; "
      "savings exactly one avoided copy per write",
      static_cast<unsigned long long>(up_pull),
      static_cast<unsigned long long>(up_direct));
  return c;
}

// --- 9: golden determinism -----------------------------------------------------

const std::vector<std::string> kGoldenPresets = {"compile", "sread", "swrite",
                                                 "false-sharing"};

Check check_golden(const std::string& dir) {
  Check c{9, "golden CSVs", false, ""};
  for (const std::string& p : kGoldenPresets) {
    ScenarioResult r = run(p, 1);
    if (!r.ok) {
      c.detail = p + " failed: " + r.note;
      return c;
    }
    std::string have = metrics_csv(r.metrics, r.nodes);
    std::string path = dir + "/" + p + "-seed1.csv";
    std::ifstream in(path, std::ios::binary);
    if (!in) {
      c.detail = "missing " + path + " (regenerate with --write-golden)";
      return c;
    }
    std::stringstream ss;
    ss << in.rdbuf();
    if (ss.str() != have) {
      c.detail = p + " metrics diverged from " + path;
      return c;
    }
  }
  c.pass = true;
  c.detail = fmt("%zu presets byte-identical to their checked-in metrics",
                 kGoldenPresets.size());
  return c;
}

int write_golden(const std::string& dir) {
  for (const std::string& p : kGoldenPresets) {
    ScenarioResult r = run(p, 1);
    if (!r.ok) {
      fprintf(stderr, "%s failed: %s\n", p.c_str(), r.note.c_str());
      return 1;
    }
    std::string path = dir + "/" + p + "-seed1.csv";
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
      fprintf(stderr, "cannot write %s\n", path.c_str());
      return 1;
    }
    out << metrics_csv(r.metrics, r.nodes);
    printf("wrote %s\n", path.c_str());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  std::string golden_dir = "tests/golden";
  bool regen = false;
  int only = 0;
  for (int i = 1; i < argc; ++i) {
    if (!strcmp(argv[i], "--golden-dir") && i + 1 < argc) {
      golden_dir = argv[++i];
    } else if (!strcmp(argv[i], "--write-golden")) {
      regen = true;
    } else if (!strcmp(argv[i], "--only") && i + 1 < argc) {
      only = atoi(argv[++i]);
    } else {
      fprintf(stderr,
              "usage: %s [--golden-dir DIR] [--write-golden] [--only N]\n",
              argv[0]);
      return 2;
    }
  }
  if (regen) return write_golden(golden_dir);

  using Fn = Check (*)();
  struct Entry {
    int id;
    Fn fn;
  };
  const Entry entries[] = {
      {1, check_safety_sweep},    {2, check_adversaries},
      {3, check_durability},      {4, check_replication_latency},
      {5, check_gc_safety},       {6, check_bandwidth_accounting},
      {7, check_false_sharing},   {8, check_upload_savings},
  };

  int failed = 0;
  auto report = [&](const Check& c) {
    printf("[%d] %s  %s: %s\n", c.id, c.pass ? "PASS" : "FAIL",
           c.name.c_str(), c.detail.c_str());
    fflush(stdout);
    if (!c.pass) ++failed;
  };

  for (const Entry& e : entries) {
    if (only && e.id != only) continue;
    report(e.fn());
  }
  if (!only || only == 9) report(check_golden(golden_dir));

  if (failed == 0)
    printf("all acceptance checks passed\n");
  else
    printf("%d acceptance check(s) failed\n", failed);
  return failed == 0 ? 0 : 1;
}
