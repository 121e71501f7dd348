#include <doctest.h>

#include "decloud/report.hpp"
#include "decloud/scenario.hpp"

using namespace decloud;

namespace {

ScenarioResult run(const std::string& preset, uint64_t seed,
                   std::map<std::string, std::string> overrides = {}) {
  ScenarioConfig cfg;
  cfg.preset = preset;
  cfg.seed = seed;
  cfg.overrides = std::move(overrides);
  return run_scenario(cfg);
}

uint64_t fault_count(const ScenarioResult& r, FaultKind k) {
  uint64_t n = 0;
  for (auto& f : r.faults)
    if (f.kind == k) ++n;
  return n;
}

}  // namespace

TEST_SUITE("scenario") {

TEST_CASE("compile workload completes and converges at reduced scale") {
  auto r = run("compile", 2,
               {{"ops", "90"}, {"devices", "3"}, {"file_blocks", "8"}});
  REQUIRE_MESSAGE(r.ok, r.note);
  CHECK(r.ops_failed == 0);
  CHECK(r.ops_ok >= 90);
  CHECK(r.extras.at("writes_planned") > 0);
  CHECK(r.extras.at("converged_at_us") > 0);
  // Every device moved control traffic; the writers moved block traffic.
  uint64_t up_block = 0;
  for (DeviceId n : r.nodes) {
    if (n < kFirstDeviceId) continue;
    auto it = r.metrics.traffic.find(n);
    REQUIRE(it != r.metrics.traffic.end());
    CHECK(it->second.up_ctrl > 0);
    up_block += it->second.up_block;
  }
  CHECK(up_block > 0);
}

TEST_CASE("false-sharing preset drives a shared chain to completion") {
  auto r = run("false-sharing", 4,
               {{"ops", "6"}, {"blocks", "4"}, {"devices", "2"}});
  REQUIRE_MESSAGE(r.ok, r.note);
  CHECK(r.extras.at("ops_done") == 12);
  CHECK(r.extras.at("lease_switches") > 0);
}

TEST_CASE("identical seeds reproduce identical metrics, fresh seeds do not") {
  std::map<std::string, std::string> ov{{"blocks", "6"}, {"devices", "3"}};
  auto a = run("sread", 5, ov);
  auto b = run("sread", 5, ov);
  REQUIRE_MESSAGE(a.ok, a.note);
  REQUIRE_MESSAGE(b.ok, b.note);
  std::string csv_a = metrics_csv(a.metrics, a.nodes);
  CHECK(csv_a == metrics_csv(b.metrics, b.nodes));
  CHECK(csv_a.substr(0, csv_a.find('\n')) ==
        "node,up_block,up_ctrl,down_block,down_ctrl,lease_switches");
  CHECK(a.extras.at("ops_elapsed_us") == b.extras.at("ops_elapsed_us"));

  auto c = run("sread", 6, ov);
  REQUIRE_MESSAGE(c.ok, c.note);
  CHECK(a.extras.at("ops_elapsed_us") != c.extras.at("ops_elapsed_us"));
}

TEST_CASE("log truncation by the coordinator is noticed downstream") {
  auto r = run("truncation-attack", 3);
  REQUIRE_MESSAGE(r.ok, r.note);
  CHECK(r.extras.at("gap_at_us") > 0);
  CHECK(r.extras.at("truncation_at_us") > 0);
  CHECK(fault_count(r, FaultKind::suspect_truncation) >= 1);
  CHECK(fault_count(r, FaultKind::gap_detected) >= 1);
}

TEST_CASE("an equivocating coordinator is pinned once it recants") {
  auto r = run("equivocation-attack", 3);
  REQUIRE_MESSAGE(r.ok, r.note);
  CHECK(r.extras.at("fork_at_us") >= r.extras.at("recant_at_us"));
  CHECK(fault_count(r, FaultKind::fork_detected) >= 1);
}

TEST_CASE("forged replication records never enter a log") {
  auto r = run("forged-replication", 3);
  REQUIRE_MESSAGE(r.ok, r.note);
  CHECK(r.extras.at("forged_rejections") > 0);
  CHECK(r.extras.at("converged_at_us") > 0);
}

TEST_CASE("corrupted provider blocks fail verification, reads fall back") {
  auto r = run("corrupt-cloud", 3);
  REQUIRE_MESSAGE(r.ok, r.note);
  CHECK(r.extras.at("integrity_faults") > 0);
  CHECK(r.reads_checked > 0);
  CHECK(r.ops_failed == 0);
}

TEST_CASE("short crash churn ends converged with no safety faults") {
  auto r = run("crash-churn", 9,
               {{"ops", "6"}, {"churn_s", "120"}, {"cap_s", "900"},
                {"devices", "3"}});
  REQUIRE_MESSAGE(r.ok, r.note);
  CHECK(r.extras.at("converged_at_us") > 0);
  CHECK(fault_count(r, FaultKind::fork_detected) == 0);
  CHECK(fault_count(r, FaultKind::bad_signature) == 0);
  CHECK(fault_count(r, FaultKind::integrity_violation) == 0);
}

TEST_CASE("unknown presets fail with a note instead of running") {
  auto r = run("no-such-preset", 1);
  CHECK_FALSE(r.ok);
  CHECK(r.note.find("no-such-preset") != std::string::npos);
}

TEST_CASE("the registry names exactly the runnable presets") {
  const auto& infos = scenario_presets();
  CHECK(infos.size() >= 10);
  bool has_compile = false;
  for (auto& p : infos) {
    CHECK(is_scenario_preset(p.name));
    CHECK_FALSE(p.summary.empty());
    if (p.name == "compile") has_compile = true;
  }
  CHECK(has_compile);
  CHECK_FALSE(is_scenario_preset("bogus"));
}

}  // TEST_SUITE
