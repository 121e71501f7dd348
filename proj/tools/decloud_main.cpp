#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "decloud/report.hpp"
#include "decloud/scenario.hpp"

namespace fs = std::filesystem;
using namespace decloud;

namespace {

int cmd_run(const std::string& preset, uint64_t seed,
            const std::vector<std::string>& sets, const std::string& out_dir,
            bool quiet) {
  ScenarioConfig sc;
  sc.preset = preset;
  sc.seed = seed;
  for (const std::string& kv : sets) {
    auto eq = kv.find('=');
    if (eq == std::string::npos || eq == 0) {
      std::cerr << "--set expects key=value, got: " << kv << "\n";
      return 2;
    }
    sc.overrides[kv.substr(0, eq)] = kv.substr(eq + 1);
  }
  if (!is_scenario_preset(sc.preset)) {
    std::cerr << "unknown preset: " << sc.preset << "\nknown presets:\n";
    for (const auto& p : scenario_presets())
      std::cerr << "  " << p.name << "\n";
    return 2;
  }
  ScenarioResult r = run_scenario(sc);
  fs::path dir = out_dir.empty()
                     ? fs::path("runs") /
                           (sc.preset + "-seed" + std::to_string(sc.seed))
                     : fs::path(out_dir);
  write_run_dir(dir, r);
  if (!quiet) {
    std::cout << summary_text(r);
    std::cout << "  artifacts: " << dir.string() << "\n";
  }
  return r.ok ? 0 : 1;
}

int cmd_list() {
  size_t width = 0;
  for (const auto& p : scenario_presets())
    width = std::max(width, p.name.size());
  for (const auto& p : scenario_presets())
    std::cout << std::left << std::setw(static_cast<int>(width) + 2) << p.name
              << p.summary << "\n";
  return 0;
}

int cmd_dump_trace(const std::string& run_dir) {
  fs::path p = fs::path(run_dir) / "trace.csv";
  std::ifstream f(p, std::ios::binary);
  if (!f) {
    std::cerr << "no trace at " << p.string() << "\n";
    return 2;
  }
  std::cout << f.rdbuf();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"deterministic simulation of a lease-coordinated "
               "personal cloud storage fleet"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "run one scenario preset");
  std::string preset;
  uint64_t seed = 1;
  std::vector<std::string> sets;
  std::string out_dir;
  bool quiet = false;
  run->add_option("preset", preset, "preset name (see list-presets)")
      ->required();
  run->add_option("--seed", seed, "deterministic run seed");
  run->add_option("--set", sets, "override, key=value (repeatable)");
  run->add_option("--out", out_dir, "artifact directory (default runs/<name>)");
  run->add_flag("--quiet", quiet, "suppress the summary");

  auto* list = app.add_subcommand("list-presets", "list scenario presets");

  auto* dump = app.add_subcommand("dump-trace",
                                  "print the message trace of a recorded run");
  std::string run_dir;
  dump->add_option("run-dir", run_dir, "directory written by `run`")
      ->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return cmd_run(preset, seed, sets, out_dir, quiet);
    if (list->parsed()) return cmd_list();
    if (dump->parsed()) return cmd_dump_trace(run_dir);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
