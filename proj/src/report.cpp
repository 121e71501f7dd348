#include "decloud/report.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>

#include <json.hpp>

namespace decloud {

std::string metrics_csv(const Metrics& m, const std::vector<DeviceId>& nodes) {
  std::ostringstream out;
  out << "node,up_block,up_ctrl,down_block,down_ctrl,lease_switches\n";
  for (DeviceId id : nodes) {
    NodeTraffic t;
    auto it = m.traffic.find(id);
    if (it != m.traffic.end()) t = it->second;
    out << node_name(id) << ',' << t.up_block << ',' << t.up_ctrl << ','
        << t.down_block << ',' << t.down_ctrl << ',' << t.lease_switches
        << '\n';
  }
  return out.str();
}

namespace {

const char* ev_name(TraceEntry::Ev e) {
  switch (e) {
    case TraceEntry::Ev::send: return "send";
    case TraceEntry::Ev::deliver: return "deliver";
    case TraceEntry::Ev::drop: return "drop";
    case TraceEntry::Ev::crash: return "crash";
    case TraceEntry::Ev::restart: return "restart";
    case TraceEntry::Ev::partition: return "partition";
    case TraceEntry::Ev::heal: return "heal";
    case TraceEntry::Ev::fault: return "fault";
  }
  return "?";
}

bool message_ev(TraceEntry::Ev e) {
  return e == TraceEntry::Ev::send || e == TraceEntry::Ev::deliver ||
         e == TraceEntry::Ev::drop;
}

}  // namespace

std::string trace_csv(const std::vector<TraceEntry>& trace) {
  std::ostringstream out;
  out << "t_us,event,from,to,kind,de,bytes\n";
  for (const TraceEntry& e : trace) {
    out << e.t << ',' << ev_name(e.ev) << ',' << node_name(e.from) << ',';
    if (message_ev(e.ev))
      out << node_name(e.to) << ',' << msg_kind_name(e.kind);
    else
      out << ',';
    out << ',' << e.de << ',' << e.bytes << '\n';
  }
  return out.str();
}

std::string faults_csv(const std::vector<FaultEvent>& faults) {
  std::ostringstream out;
  out << "t_us,kind,reporter,de,detail\n";
  for (const FaultEvent& f : faults) {
    out << f.t << ',' << fault_kind_name(f.kind) << ',' << node_name(f.reporter)
        << ',' << f.de << ',' << f.detail << '\n';
  }
  return out.str();
}

std::string run_json(const ScenarioResult& r) {
  nlohmann::json j;
  j["preset"] = r.preset;
  j["seed"] = r.seed;
  j["ok"] = r.ok;
  j["note"] = r.note;
  j["overrides"] = r.overrides;
  j["end_time_us"] = r.end_time;
  j["ops"] = {{"ok", r.ops_ok},
              {"failed", r.ops_failed},
              {"reads_checked", r.reads_checked}};
  j["messages"] = {{"sent", r.metrics.msgs_sent},
                   {"delivered", r.metrics.msgs_delivered},
                   {"dropped", r.metrics.msgs_dropped},
                   {"signed_updates", r.metrics.signed_updates_sent}};
  j["replication_latency_max_us"] = r.metrics.max_replication_latency();
  nlohmann::json traffic = nlohmann::json::object();
  for (DeviceId id : r.nodes) {
    NodeTraffic t;
    auto it = r.metrics.traffic.find(id);
    if (it != r.metrics.traffic.end()) t = it->second;
    traffic[node_name(id)] = {{"up_block", t.up_block},
                              {"up_ctrl", t.up_ctrl},
                              {"down_block", t.down_block},
                              {"down_ctrl", t.down_ctrl},
                              {"lease_switches", t.lease_switches}};
  }
  j["traffic"] = std::move(traffic);
  nlohmann::json faults = nlohmann::json::array();
  for (const FaultEvent& f : r.faults) {
    faults.push_back({{"t_us", f.t},
                      {"kind", fault_kind_name(f.kind)},
                      {"reporter", node_name(f.reporter)},
                      {"de", f.de},
                      {"detail", f.detail}});
  }
  j["faults"] = std::move(faults);
  j["extras"] = r.extras;
  return j.dump(2) + "\n";
}

std::string summary_text(const ScenarioResult& r) {
  std::ostringstream out;
  out << r.preset << " seed=" << r.seed << "  "
      << (r.ok ? "ok" : "FAILED");
  if (!r.note.empty()) out << "  (" << r.note << ")";
  out << "\n";
  out << "  virtual end: " << r.end_time / 1000000.0 << " s,  ops ok/failed: "
      << r.ops_ok << "/" << r.ops_failed << ",  faults: " << r.faults.size()
      << "\n";
  out << "  " << std::left << std::setw(8) << "node" << std::right
      << std::setw(14) << "up_block" << std::setw(12) << "up_ctrl"
      << std::setw(14) << "down_block" << std::setw(12) << "down_ctrl"
      << std::setw(10) << "switches" << "\n";
  for (DeviceId id : r.nodes) {
    NodeTraffic t;
    auto it = r.metrics.traffic.find(id);
    if (it != r.metrics.traffic.end()) t = it->second;
    out << "  " << std::left << std::setw(8) << node_name(id) << std::right
        << std::setw(14) << t.up_block << std::setw(12) << t.up_ctrl
        << std::setw(14) << t.down_block << std::setw(12) << t.down_ctrl
        << std::setw(10) << t.lease_switches << "\n";
  }
  if (!r.extras.empty()) {
    out << "  extras:";
    for (const auto& [k, v] : r.extras) out << " " << k << "=" << v;
    out << "\n";
  }
  return out.str();
}

void write_run_dir(const std::filesystem::path& dir, const ScenarioResult& r) {
  std::filesystem::create_directories(dir);
  auto put = [&](const char* name, const std::string& body) {
    std::ofstream f(dir / name, std::ios::binary);
    f << body;
  };
  put("metrics.csv", metrics_csv(r.metrics, r.nodes));
  put("faults.csv", faults_csv(r.faults));
  put("trace.csv", trace_csv(r.trace));
  put("run.json", run_json(r));
}

}  // namespace decloud
