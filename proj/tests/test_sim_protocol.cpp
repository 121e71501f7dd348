#include <doctest.h>

#include "decloud/rebuild.hpp"
#include "decloud/scenario.hpp"
#include "decloud/workload.hpp"

using namespace decloud;

namespace {

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

std::pair<Errc, Bytes> do_read(World& w, Device& d, DeId de, uint64_t addr) {
  auto done = std::make_shared<std::optional<std::pair<Errc, Bytes>>>();
  d.submit_read(de, addr, kBlockSize,
                [done](Errc e, Bytes b) { *done = std::make_pair(e, std::move(b)); });
  if (!advance_until(w, 300 * kUsPerSec, [&] { return done->has_value(); }))
    return {Errc::unavailable, {}};
  return **done;
}

WorldConfig base_world() {
  WorldConfig wc;
  wc.devices = 3;
  wc.network = "unlimited";
  return wc;
}

}  // namespace

TEST_SUITE("sim_protocol") {

TEST_CASE("a write spreads to the replica target and frees old versions") {
  World w(base_world());
  WorldSeeder seeder(w.sim, w.coord, w.cloud.get(), w.device_ptrs(),
                     w.cfg.scheme);
  SeedSpec spec;
  spec.de = 5;
  spec.writer = w.dev(0).id();
  spec.blocks = 2;
  seeder.seed(spec);
  install_gc_audit(w);
  w.start();

  REQUIRE(do_write(w, w.dev(0), 5, 0, 1001) == Errc::ok);
  auto settled = run_until_quiet(w, 400 * kUsPerSec);
  REQUIRE(settled.has_value());

  // Every write in the log now carries three distinct replicators...
  const DeLog* dl = w.dev(0).log().find(5);
  REQUIRE(dl != nullptr);
  CHECK(dl->stable_frontier(3) == dl->head());
  const Update* v2 = dl->write_for(0, 2);
  REQUIRE(v2 != nullptr);
  CHECK(v2->replica_count() >= 3);

  // ...and the superseded version is gone wherever it was collected, while
  // v2 is fetchable from every recorded replica.
  for (DeviceId r : v2->replicas()) {
    if (r == kCloudNodeId) {
      CHECK(w.cloud->store().has(5, 0, 2));
    } else {
      for (auto& dp : w.devices)
        if (dp->id() == r) CHECK(dp->store().has(5, 0, 2));
    }
  }
  CHECK(dl->gc_eligible(3) ==
        std::vector<std::pair<BlockId, VersionNo>>{{0, 1}});
  CHECK_FALSE(w.dev(0).store().has(5, 0, 1));
}

TEST_CASE("an unacknowledged write survives a crash as a pending replay") {
  World w(base_world());
  WorldSeeder seeder(w.sim, w.coord, w.cloud.get(), w.device_ptrs(),
                     w.cfg.scheme);
  SeedSpec spec;
  spec.de = 5;
  spec.writer = w.dev(0).id();
  spec.blocks = 2;
  seeder.seed(spec);
  w.start();
  w.sim.run_until(kUsPerSec);

  // Cut the writer off so the coordinator never sees the update.
  w.sim.set_partitioned(w.dev(0).id(), true);
  REQUIRE(do_write(w, w.dev(0), 5, 0, 77) == Errc::ok);  // local completion
  const DeLog* dl = w.dev(0).log().find(5);
  CHECK(dl->head() == 3);
  CHECK(w.dev(0).acked(5) == 2);

  w.sim.crash(w.dev(0).id());
  w.sim.set_partitioned(w.dev(0).id(), false);
  w.sim.restart(w.dev(0).id());

  // The rolled-back tail is replayed under the re-taken lease.
  bool replayed = advance_until(w, 300 * kUsPerSec, [&] {
    const DeLog* l = w.dev(0).log().find(5);
    return l && l->latest_version(0) == 2 &&
           w.dev(0).acked(5) >= l->head() && l->head() >= 3;
  });
  REQUIRE(replayed);
  CHECK(w.dev(0).quarantined().empty());
  CHECK(w.dev(0).pending_write_count() == 0);
  auto [rc, got] = do_read(w, w.dev(0), 5, 0);
  REQUIRE(rc == Errc::ok);
  CHECK(got == fill_bytes(77, kBlockSize));
  CHECK_FALSE(w.sim.saw_fault(FaultKind::conflict_detected));
}

TEST_CASE("a replay that lost the race is quarantined, not merged") {
  World w(base_world());
  WorldSeeder seeder(w.sim, w.coord, w.cloud.get(), w.device_ptrs(),
                     w.cfg.scheme);
  SeedSpec spec;
  spec.de = 5;
  spec.writer = w.dev(0).id();
  spec.blocks = 2;
  seeder.seed(spec);
  w.start();
  w.sim.run_until(kUsPerSec);

  w.sim.set_partitioned(w.dev(0).id(), true);
  REQUIRE(do_write(w, w.dev(0), 5, 0, 77) == Errc::ok);
  w.sim.crash(w.dev(0).id());

  // While the writer is dark, someone else advances the same block.
  bool taken = advance_until(w, 400 * kUsPerSec, [&] {
    return do_write(w, w.dev(1), 5, 0, 88) == Errc::ok;
  });
  REQUIRE(taken);

  w.sim.set_partitioned(w.dev(0).id(), false);
  w.sim.restart(w.dev(0).id());
  bool flagged = advance_until(w, 400 * kUsPerSec, [&] {
    return !w.dev(0).quarantined().empty();
  });
  REQUIRE(flagged);
  CHECK(w.sim.saw_fault(FaultKind::conflict_detected));
  const PendingWrite& q = w.dev(0).quarantined().front();
  CHECK(q.de == 5);
  CHECK(q.block == 0);
  CHECK(q.plain == fill_block(77));

  // The surviving history is the other writer's.
  auto [rc, got] = do_read(w, w.dev(0), 5, 0);
  REQUIRE(rc == Errc::ok);
  CHECK(got == fill_bytes(88, kBlockSize));
}

TEST_CASE("an isolated holder demotes itself before the lease moves on") {
  World w(base_world());
  WorldSeeder seeder(w.sim, w.coord, w.cloud.get(), w.device_ptrs(),
                     w.cfg.scheme);
  SeedSpec spec;
  spec.de = 5;
  spec.writer = w.dev(0).id();
  spec.blocks = 2;
  seeder.seed(spec);
  w.start();
  REQUIRE(w.dev(0).holds_lease(5));

  w.sim.set_partitioned(w.dev(0).id(), true);
  bool dropped = advance_until(w, 200 * kUsPerSec, [&] {
    return !w.dev(0).holds_lease(5);
  });
  REQUIRE(dropped);

  // With the old holder silent, another device can take the lease over.
  REQUIRE(do_write(w, w.dev(1), 5, 1, 55) == Errc::ok);
  CHECK(w.dev(1).holds_lease(5));

  // The healed node rejoins as a follower and sees the new history.
  w.sim.set_partitioned(w.dev(0).id(), false);
  bool caught_up = advance_until(w, 200 * kUsPerSec, [&] {
    const DeLog* l = w.dev(0).log().find(5);
    return l && l->latest_version(1) == 2;
  });
  CHECK(caught_up);
  CHECK_FALSE(w.dev(0).holds_lease(5));
}

TEST_CASE("sends to an address nobody owns vanish like a partition") {
  World w(base_world());
  w.start();
  uint64_t dropped = w.sim.metrics().msgs_dropped;
  Message m;
  m.kind = MsgKind::PING;
  m.sender = w.dev(0).id();
  w.sim.send(w.dev(0).id(), 99, std::move(m));
  CHECK(w.sim.metrics().msgs_dropped == dropped + 1);
  w.sim.drain();
  w.sim.oracle().check_accounting(w.sim.metrics());
}

TEST_CASE("surviving devices alone rebuild the full state bit-exact") {
  auto build = [](uint64_t seed) {
    WorldConfig wc = base_world();
    wc.seed = seed;
    auto w = std::make_unique<World>(wc);
    WorldSeeder seeder(w->sim, w->coord, w->cloud.get(), w->device_ptrs(),
                       w->cfg.scheme);
    SeedSpec spec;
    spec.de = 5;
    spec.writer = w->dev(0).id();
    spec.blocks = 3;
    seeder.seed(spec);
    w->start();
    REQUIRE(do_write(*w, w->dev(0), 5, 0, 500) == Errc::ok);
    REQUIRE(do_write(*w, w->dev(1), 5, 2 * kBlockSize, 600) == Errc::ok);
    REQUIRE(run_until_quiet(*w, w->sim.now() + 600 * kUsPerSec).has_value());
    return w;
  };

  auto w1 = build(7);
  std::vector<const Device*> devs;
  for (auto& d : w1->devices) devs.push_back(d.get());
  RebuildResult r = rebuild_from_devices(devs, w1->cfg.scheme);
  CHECK(r.complete());
  REQUIRE(r.logs.count(5) == 1);
  CHECK(r.logs.at(5).head() == w1->coord.head(5));
  // Newest version of every block, content matching the signed digest.
  for (auto [b, v] : r.logs.at(5).all_block_versions()) {
    const Update* u = r.logs.at(5).write_for(b, v);
    if (v != r.logs.at(5).latest_version(b)) continue;
    REQUIRE(r.blocks.has(5, b, v));
    const BlockData* data = r.blocks.get(5, b, v);
    CHECK(content_hash({data->data(), data->size()}) == u->hash);
  }

  // Same seed, same ops: the digest pins the whole recovered state.
  auto w2 = build(7);
  std::vector<const Device*> devs2;
  for (auto& d : w2->devices) devs2.push_back(d.get());
  CHECK(rebuild_from_devices(devs2, w2->cfg.scheme).digest() == r.digest());

  // Losing every holder of a block is visible, not silent.
  WorldConfig thin = base_world();
  thin.replica_target = 2;  // writer + provider store only
  World w3(thin);
  WorldSeeder seeder(w3.sim, w3.coord, w3.cloud.get(), w3.device_ptrs(),
                     w3.cfg.scheme);
  SeedSpec spec;
  spec.de = 5;
  spec.writer = w3.dev(0).id();
  spec.blocks = 2;
  spec.cloud_copy = true;
  seeder.seed(spec);
  w3.start();
  REQUIRE(run_until_quiet(w3, w3.sim.now() + 200 * kUsPerSec).has_value());
  std::vector<const Device*> partial{&w3.dev(1), &w3.dev(2)};
  RebuildResult r3 = rebuild_from_devices(partial, w3.cfg.scheme);
  CHECK_FALSE(r3.complete());
  CHECK(r3.missing.size() == 2);
  CHECK(r3.logs.at(5).head() == 2);  // history survives via the logs
}

}  // TEST_SUITE
