#include <doctest.h>

#include "decloud/mappers.hpp"
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

Errc wait_errc(World& w, const std::function<void(std::function<void(Errc)>)>& go) {
  auto done = std::make_shared<std::optional<Errc>>();
  go([done](Errc e) { *done = e; });
  if (!advance_until(w, 300 * kUsPerSec, [&] { return done->has_value(); }))
    return Errc::unavailable;
  return **done;
}

std::pair<Errc, DeId> wait_de(
    World& w, const std::function<void(std::function<void(Errc, DeId)>)>& go) {
  auto done = std::make_shared<std::optional<std::pair<Errc, DeId>>>();
  go([done](Errc e, DeId d) { *done = std::make_pair(e, d); });
  if (!advance_until(w, 300 * kUsPerSec, [&] { return done->has_value(); }))
    return {Errc::unavailable, 0};
  return **done;
}

std::pair<Errc, Bytes> wait_read(
    World& w,
    const std::function<void(std::function<void(Errc, Bytes)>)>& go) {
  auto done = std::make_shared<std::optional<std::pair<Errc, Bytes>>>();
  go([done](Errc e, Bytes b) { *done = std::make_pair(e, std::move(b)); });
  if (!advance_until(w, 300 * kUsPerSec, [&] { return done->has_value(); }))
    return {Errc::unavailable, {}};
  return **done;
}

WorldConfig small_world() {
  WorldConfig wc;
  wc.devices = 3;
  wc.network = "unlimited";
  return wc;
}

}  // namespace

TEST_SUITE("mappers") {

TEST_CASE("raw volume round-trips bytes at block granularity and beyond") {
  World w(small_world());
  w.start();
  UbdVolume vol(w.dev(0), 30, 4);
  REQUIRE(wait_errc(w, [&](auto cb) { vol.format(std::move(cb)); }) ==
          Errc::ok);

  Bytes payload = fill_bytes(42, 2 * kBlockSize);
  REQUIRE(wait_errc(w, [&](auto cb) {
            vol.write(kBlockSize, payload, std::move(cb));
          }) == Errc::ok);

  auto [rc, got] = wait_read(w, [&](auto cb) {
    vol.read(kBlockSize, 2 * kBlockSize, std::move(cb));
  });
  REQUIRE(rc == Errc::ok);
  CHECK(got == payload);

  // Unwritten space reads as zeros.
  auto [rc0, zeros] = wait_read(w, [&](auto cb) {
    vol.read(3 * kBlockSize, kBlockSize, std::move(cb));
  });
  REQUIRE(rc0 == Errc::ok);
  CHECK(std::all_of(zeros.begin(), zeros.end(),
                    [](uint8_t b) { return b == 0; }));

  // Sub-block slice of what was written.
  auto [rc1, slice] = wait_read(w, [&](auto cb) {
    vol.read(kBlockSize + 100, 64, std::move(cb));
  });
  REQUIRE(rc1 == Errc::ok);
  CHECK(Bytes(payload.begin() + 100, payload.begin() + 164) == slice);
}

TEST_CASE("file namespace: create, resolve across devices, write, remove") {
  World w(small_world());
  w.start();
  UfsMount m0(w.dev(0));
  UfsMount m1(w.dev(1));

  REQUIRE(wait_errc(w, [&](auto cb) { m0.format(std::move(cb)); }) ==
          Errc::ok);

  auto [c1, de1] = wait_de(w, [&](auto cb) {
    m0.create("notes.txt", 4, std::move(cb));
  });
  REQUIRE(c1 == Errc::ok);
  CHECK(de1 == UfsMount::kFirstFileDe);

  auto [c2, de2] = wait_de(w, [&](auto cb) {
    m0.create("build.log", 2, std::move(cb));
  });
  REQUIRE(c2 == Errc::ok);
  CHECK(de2 == de1 + 1);

  // Names are unique.
  auto [c3, de3] = wait_de(w, [&](auto cb) {
    m0.create("notes.txt", 1, std::move(cb));
  });
  CHECK(c3 == Errc::name_exists);
  CHECK(de3 == 0);

  // Another device resolves through the shared directory DE.
  auto [r1, rde] = wait_de(w, [&](auto cb) {
    m1.resolve("notes.txt", std::move(cb));
  });
  REQUIRE(r1 == Errc::ok);
  CHECK(rde == de1);

  // Content written by one device reads back on another.
  Bytes body = fill_bytes(7, 300);
  REQUIRE(wait_errc(w, [&](auto cb) {
            m0.write("notes.txt", 0, body, std::move(cb));
          }) == Errc::ok);
  auto [rr, got] = wait_read(w, [&](auto cb) {
    m1.read("notes.txt", 0, 300, std::move(cb));
  });
  REQUIRE(rr == Errc::ok);
  CHECK(got == body);

  // Removal drops the name everywhere, even for cold caches.
  REQUIRE(wait_errc(w, [&](auto cb) { m0.remove("notes.txt", std::move(cb)); }) ==
          Errc::ok);
  m1.drop_cache();
  auto [r2, rde2] = wait_de(w, [&](auto cb) {
    m1.resolve("notes.txt", std::move(cb));
  });
  CHECK(r2 == Errc::name_not_found);
  CHECK(rde2 == 0);
  auto [r3, rde3] = wait_de(w, [&](auto cb) {
    m1.resolve("build.log", std::move(cb));
  });
  CHECK(r3 == Errc::ok);
  CHECK(rde3 == de2);

  // A freed name is reusable and allocates a fresh DE.
  auto [c4, de4] = wait_de(w, [&](auto cb) {
    m0.create("notes.txt", 1, std::move(cb));
  });
  REQUIRE(c4 == Errc::ok);
  CHECK(de4 > de2);
}

TEST_CASE("files on separate des keep their leases apart") {
  World w(small_world());
  w.start();
  UfsMount m0(w.dev(0));
  UfsMount m1(w.dev(1));
  REQUIRE(wait_errc(w, [&](auto cb) { m0.format(std::move(cb)); }) ==
          Errc::ok);
  auto [ca, dea] = wait_de(w, [&](auto cb) { m0.create("a", 2, std::move(cb)); });
  REQUIRE(ca == Errc::ok);
  auto [cb_, deb] = wait_de(w, [&](auto cb) { m1.create("b", 2, std::move(cb)); });
  REQUIRE(cb_ == Errc::ok);

  REQUIRE(wait_errc(w, [&](auto cb) {
            m0.write("a", 0, fill_bytes(1, 64), std::move(cb));
          }) == Errc::ok);
  REQUIRE(wait_errc(w, [&](auto cb) {
            m1.write("b", 0, fill_bytes(2, 64), std::move(cb));
          }) == Errc::ok);

  // Each writer still holds its own file's lease; nobody fought over them.
  CHECK(w.dev(0).holds_lease(dea));
  CHECK(w.dev(1).holds_lease(deb));
  CHECK_FALSE(w.dev(0).holds_lease(deb));
  CHECK_FALSE(w.dev(1).holds_lease(dea));
}

}  // TEST_SUITE
