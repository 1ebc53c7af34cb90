// Python bindings. Configs cross the boundary as JSON text; the package
// wrapper in rwrelab/__init__.py converts to and from dicts.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <map>
#include <sstream>

#include "rwre/commands.hpp"
#include "rwre/config.hpp"
#include "rwre/decomp.hpp"
#include "rwre/ldp.hpp"
#include "rwre/report.hpp"
#include "rwre/tilt.hpp"

namespace py = pybind11;
using nlohmann::json;

namespace {

rwre::ExperimentConfig parse(const std::string& text) { return rwre::config_from_json(json::parse(text)); }

rwre::RunSettings settings(int threads, const std::string& out_dir = "") {
  rwre::RunSettings run;
  run.threads = threads;
  run.out_dir = out_dir;
  return run;
}

std::string tilt_json(const rwre::TiltParams& tp) {
  auto j = rwre::to_json(tp);
  json checks = json::array();
  for (const auto& c : rwre::check_tilt(tp)) {
    checks.push_back({{"name", c.name}, {"residual", c.residual}, {"tolerance", c.tolerance}});
  }
  j["invariants"] = checks;
  return j.dump();
}

std::tuple<int, std::string, std::string> run_command(const std::string& name, const std::string& cfg_text, int threads,
                                                      const std::string& out_dir) {
  using Command = int (*)(const rwre::ExperimentConfig&, const rwre::RunSettings&, std::ostream&, std::ostream&);
  static const std::map<std::string, Command> table = {
      {"verify", rwre::cmd_verify}, {"gap", rwre::cmd_gap},           {"rate", rwre::cmd_rate},
      {"env-sample", rwre::cmd_env_sample}, {"tau-stats", rwre::cmd_tau_stats},
  };
  const auto it = table.find(name);
  if (it == table.end()) throw py::value_error("unknown command: " + name);
  const auto cfg = parse(cfg_text);
  std::ostringstream out, err;
  int code;
  {
    py::gil_scoped_release release;
    code = it->second(cfg, settings(threads, out_dir), out, err);
  }
  return {code, out.str(), err.str()};
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Random walks in random environments: tilts, identities, gap certification and rates.";

  py::register_exception<rwre::ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<rwre::BudgetError>(m, "BudgetError", PyExc_RuntimeError);

  m.def("default_config", [] { return rwre::to_json(rwre::ExperimentConfig{}).dump(); });
  m.def("normalize_config", [](const std::string& text) { return rwre::canonical_dump(parse(text)); });
  m.def("config_hash", [](const std::string& text) { return rwre::config_hash(parse(text)); });

  m.def("solve_tilt", [](const std::vector<double>& means, const std::vector<double>& z) {
    return tilt_json(rwre::solve_tilt(means, z));
  });
  m.def("tilt_for_config", [](const std::string& text) {
    const auto cfg = parse(text);
    return tilt_json(rwre::solve_tilt(*rwre::build_law(cfg.law), cfg.z));
  });
  m.def("expected_tau", py::overload_cast<double, int>(&rwre::expected_tau), py::arg("kbar"), py::arg("L"));

  m.def("identity_annealed", [](const std::string& text, const std::vector<double>& theta, int n) {
    const auto cfg = parse(text);
    const auto law = rwre::build_law(cfg.law);
    py::gil_scoped_release release;
    const auto s = rwre::verify_identity_annealed(law, rwre::solve_tilt(*law, cfg.z), theta, n);
    return std::pair{s.lhs, s.rhs};
  });

  m.def("verify", [](const std::string& text, int threads) {
    const auto cfg = parse(text);
    std::vector<rwre::FamilyResult> rows;
    {
      py::gil_scoped_release release;
      rows = rwre::run_verification(cfg, settings(threads));
    }
    json out = json::array();
    for (const auto& r : rows) {
      out.push_back({{"family", r.family},
                     {"checks", r.checks},
                     {"worst", r.worst},
                     {"tolerance", r.tolerance},
                     {"worst_case", r.worst_case},
                     {"ok", r.ok()}});
    }
    return out.dump();
  }, py::arg("config"), py::arg("threads") = 1);

  m.def("gap_report", [](const std::string& text, int threads) {
    const auto cfg = parse(text);
    int code = 0;
    std::string doc;
    {
      py::gil_scoped_release release;
      doc = rwre::gap_report_document(cfg, settings(threads), &code);
    }
    return std::pair{code, doc};
  }, py::arg("config"), py::arg("threads") = 1);

  m.def("rate_point", [](const std::string& text, const std::vector<double>& x, int threads) {
    const auto cfg = parse(text);
    const auto law = rwre::build_law(cfg.law);
    const auto options = rwre::build_rate_options(cfg, settings(threads));
    py::gil_scoped_release release;
    return rwre::to_json(rwre::rate_point(law, x, options)).dump();
  }, py::arg("config"), py::arg("x"), py::arg("threads") = 1);

  m.def("run_command", &run_command, py::arg("name"), py::arg("config"), py::arg("threads") = 1,
        py::arg("out_dir") = "");

  m.attr("EXIT_OK") = static_cast<int>(rwre::kExitOk);
  m.attr("EXIT_FALSIFIED") = static_cast<int>(rwre::kExitFalsified);
  m.attr("EXIT_BUDGET") = static_cast<int>(rwre::kExitBudget);
  m.attr("EXIT_INCONCLUSIVE") = static_cast<int>(rwre::kExitInconclusive);
  m.attr("EXIT_USAGE") = static_cast<int>(rwre::kExitUsage);
}
