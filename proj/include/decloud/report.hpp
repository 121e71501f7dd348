#pragma once

#include <filesystem>

#include "decloud/scenario.hpp"

namespace decloud {

// One row per node, id order: node,up_block,up_ctrl,down_block,down_ctrl,
// lease_switches. Byte-stable across runs with identical traffic.
std::string metrics_csv(const Metrics& m, const std::vector<DeviceId>& nodes);

// t_us,event,from,to,kind,de,bytes
std::string trace_csv(const std::vector<TraceEntry>& trace);

// t_us,kind,reporter,de,detail
std::string faults_csv(const std::vector<FaultEvent>& faults);

// Full machine-readable result: config echo, totals, faults, extras.
std::string run_json(const ScenarioResult& r);

// Aligned human summary for the terminal.
std::string summary_text(const ScenarioResult& r);

// metrics.csv + faults.csv + trace.csv + run.json under `dir`.
void write_run_dir(const std::filesystem::path& dir, const ScenarioResult& r);

}  // namespace decloud
