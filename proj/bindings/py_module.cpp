#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "decloud/report.hpp"
#include "decloud/scenario.hpp"

namespace py = pybind11;
using namespace decloud;

PYBIND11_MODULE(_decloud, m) {
  m.doc() = "deterministic simulation of a lease-coordinated personal cloud "
            "storage fleet";

  m.def(
      "run_scenario_json",
      [](const std::string& preset, uint64_t seed,
         const std::map<std::string, std::string>& overrides) {
        ScenarioConfig sc;
        sc.preset = preset;
        sc.seed = seed;
        sc.overrides = overrides;
        ScenarioResult r = run_scenario(sc);
        return run_json(r);
      },
      py::arg("preset"), py::arg("seed") = 1,
      py::arg("overrides") = std::map<std::string, std::string>{},
      py::call_guard<py::gil_scoped_release>(),
      "Run one preset; returns the full result as a JSON string.");

  m.def(
      "metrics_csv",
      [](const std::string& preset, uint64_t seed,
         const std::map<std::string, std::string>& overrides) {
        ScenarioConfig sc;
        sc.preset = preset;
        sc.seed = seed;
        sc.overrides = overrides;
        ScenarioResult r = run_scenario(sc);
        if (!r.ok)
          throw std::runtime_error("scenario failed: " + r.note);
        return metrics_csv(r.metrics, r.nodes);
      },
      py::arg("preset"), py::arg("seed") = 1,
      py::arg("overrides") = std::map<std::string, std::string>{},
      py::call_guard<py::gil_scoped_release>(),
      "Run one preset; returns the per-node traffic table as CSV.");

  m.def("presets", [] {
    std::vector<std::pair<std::string, std::string>> out;
    for (const auto& p : scenario_presets()) out.emplace_back(p.name, p.summary);
    return out;
  });
}
