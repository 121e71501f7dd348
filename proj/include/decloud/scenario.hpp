#pragma once

#include <memory>
#include <optional>

#include "decloud/workload.hpp"

namespace decloud {

// Deployment shape shared by every scenario.
struct WorldConfig {
  uint64_t seed = 1;
  size_t devices = 3;
  SigScheme scheme = SigScheme::SYM_HMAC_SHA1;
  bool cloud = true;
  bool pull_from_cloud = true;
  size_t replica_target = 3;
  VDuration heartbeat_period = 30 * kUsPerSec;
  VDuration cloud_tick = 10 * kUsPerSec;
  std::string network = "home";  // "home" or "unlimited"
  NetConfig latency{};
};

// A full simulated deployment: coordinator, optional cloud node, devices.
// Nodes are added and registered on construction; call start() (after any
// seeding) to begin heartbeats and ticks.
struct World {
  explicit World(const WorldConfig& wc);

  void start();
  Device& dev(size_t i) { return *devices[i]; }
  std::vector<Device*> device_ptrs();

  WorldConfig cfg;
  SimWorld sim;
  Coordinator coord;
  std::unique_ptr<CloudNode> cloud;
  std::vector<std::unique_ptr<Device>> devices;
};

// True once every started node is up, all client loops have drained, every
// device's log matches the coordinator head with a full replica set, and
// the cloud store (when present) holds every written version.
bool world_converged(World& w);

// Advance in slices until converged twice `settle` apart, or `cap`.
// Returns the virtual time of first convergence, or nullopt on timeout.
std::optional<VTime> run_until_quiet(World& w, VTime cap,
                                     VDuration settle = 5 * kUsPerSec);

// Post-GC safety audit on every device: a version at or above the newest
// stable one for its block may never leave the store of a device the log
// records as its replicator. Violations throw.
void install_gc_audit(World& w);

struct ScenarioConfig {
  std::string preset;
  uint64_t seed = 1;
  std::map<std::string, std::string> overrides;
};

struct ScenarioResult {
  bool ok = false;
  std::string note;  // what failed, when !ok
  std::string preset;
  uint64_t seed = 0;
  std::map<std::string, std::string> overrides;

  Metrics metrics;
  std::vector<DeviceId> nodes;  // metric row order
  std::vector<FaultEvent> faults;
  std::vector<TraceEntry> trace;
  VTime end_time = 0;
  uint64_t ops_ok = 0;
  uint64_t ops_failed = 0;
  uint64_t reads_checked = 0;
  std::map<std::string, uint64_t> extras;
};

struct PresetInfo {
  std::string name;
  std::string summary;
};

const std::vector<PresetInfo>& scenario_presets();
bool is_scenario_preset(const std::string& name);

ScenarioResult run_scenario(const ScenarioConfig& cfg);

}  // namespace decloud
