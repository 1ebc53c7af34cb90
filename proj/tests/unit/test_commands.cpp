#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "rwre/commands.hpp"

using namespace rwre;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("rwre_cmd_" + name);
  fs::remove_all(p);
  return p;
}

ExperimentConfig two_atom_gap() {
  ExperimentConfig cfg;
  cfg.L = 2;
  return cfg;
}

ExperimentConfig zero_disorder() {
  ExperimentConfig cfg;
  cfg.L = 2;
  cfg.law.atoms = {{0.5, 0.5}};
  cfg.law.weights = {1.0};
  return cfg;
}

}  // namespace

TEST_CASE("verify reports six families and passes by default") {
  const auto dir = scratch("verify");
  std::ostringstream out, err;
  CHECK(cmd_verify(ExperimentConfig{}, {1, dir.string()}, out, err) == kExitOk);
  const auto doc = nlohmann::json::parse(slurp(dir / "verify.json"));
  CHECK(doc["verify"].size() == 6u);
  CHECK(doc["config_hash"] == config_hash(ExperimentConfig{}));
  CHECK(out.str().find("FAIL") == std::string::npos);
}

TEST_CASE("verify names the invariant broken by a corrupted tilt") {
  ExperimentConfig cfg;
  cfg.verify.corrupt_theta = true;
  std::ostringstream out, err;
  CHECK(cmd_verify(cfg, {}, out, err) == kExitFalsified);
  CHECK(err.str().find("exponential-factorization") != std::string::npos);
}

TEST_CASE("verify in two dimensions") {
  ExperimentConfig cfg;
  cfg.law.dimension = 2;
  cfg.law.kappa = 0.05;
  cfg.law.atoms = {{0.3, 0.2, 0.25, 0.25}, {0.2, 0.3, 0.2, 0.3}};
  cfg.z = {0.3, -0.1};
  cfg.verify.n_max = 5;
  std::ostringstream out, err;
  CHECK(cmd_verify(cfg, {}, out, err) == kExitOk);
}

TEST_CASE("verify reports budget overruns") {
  ExperimentConfig cfg;
  cfg.verify.n_max = 40;
  std::ostringstream out, err;
  CHECK(cmd_verify(cfg, {}, out, err) == kExitBudget);
}

TEST_CASE("gap exit codes") {
  std::ostringstream out, err;
  CHECK(cmd_gap(two_atom_gap(), {}, out, err) == kExitOk);
  CHECK(cmd_gap(zero_disorder(), {}, out, err) == kExitInconclusive);
  auto bad = two_atom_gap();
  bad.L = 1;
  CHECK(cmd_gap(bad, {}, out, err) == kExitUsage);
  bad = two_atom_gap();
  bad.ell = "-e1";
  CHECK(cmd_gap(bad, {}, out, err) == kExitUsage);
}

TEST_CASE("gap artifacts replay byte for byte across runs and thread counts") {
  auto cfg = two_atom_gap();
  cfg.gap.exact_check_horizon = 10;
  const auto a = scratch("gap_a"), b = scratch("gap_b"), c = scratch("gap_c");
  std::ostringstream out, err;
  CHECK(cmd_gap(cfg, {1, a.string()}, out, err) == kExitOk);
  CHECK(cmd_gap(cfg, {1, b.string()}, out, err) == kExitOk);
  CHECK(cmd_gap(cfg, {8, c.string()}, out, err) == kExitOk);
  for (const char* f : {"gap_report.json", "gap_trace.csv"}) {
    CHECK(slurp(a / f) == slurp(b / f));
    CHECK(slurp(a / f) == slurp(c / f));
  }
  const auto doc = nlohmann::json::parse(slurp(a / "gap_report.json"));
  CHECK(doc["seed"] == 1);
  CHECK(doc["config_hash"] == config_hash(cfg));
  CHECK(doc["gap_report"]["verdict"] == "certified");
  CHECK(doc["gap_report"].contains("exact_check"));
  CHECK(slurp(a / "gap_trace.csv").rfind("# config_hash=" + config_hash(cfg), 0) == 0);
}

TEST_CASE("rate grid") {
  ExperimentConfig cfg;
  std::ostringstream out, err;
  SUBCASE("boundary pair") {
    cfg.rate.grid = {{1.0}};
    const auto dir = scratch("rate");
    CHECK(cmd_rate(cfg, {1, dir.string()}, out, err) == kExitOk);
    const auto doc = nlohmann::json::parse(slurp(dir / "rate_grid.json"));
    const auto& p = doc["rate_points"][0];
    CHECK(std::abs(p["I_a"].get<double>() - 0.6931) < 0.01);
    CHECK(std::abs(p["I_q"].get<double>() - 0.7136) < 0.01);
    CHECK(slurp(dir / "rate_grid.csv").find("x1,I_a,I_q,stderr_a,stderr_q,method,horizon") != std::string::npos);
  }
  SUBCASE("usage errors") {
    cfg.rate.grid = {};
    CHECK(cmd_rate(cfg, {}, out, err) == kExitUsage);
    cfg.rate.grid = {{1.2}};
    CHECK(cmd_rate(cfg, {}, out, err) == kExitUsage);
    cfg.rate.grid = {{0.1, 0.1}};
    CHECK(cmd_rate(cfg, {}, out, err) == kExitUsage);
  }
}

TEST_CASE("env-sample and tau-stats") {
  std::ostringstream out, err;
  ExperimentConfig cfg;
  cfg.env_sample.radius = 3;
  const auto dir = scratch("env");
  CHECK(cmd_env_sample(cfg, {1, dir.string()}, out, err) == kExitOk);
  CHECK(slurp(dir / "environment.csv").rfind("# config_hash=", 0) == 0);

  cfg.tau_stats.draws = 20000;
  cfg.tau_stats.kbars = {0.25};
  cfg.tau_stats.block_lengths = {1, 2};
  std::ostringstream t1, t8;
  CHECK(cmd_tau_stats(cfg, {1, ""}, t1, err) == kExitOk);
  CHECK(cmd_tau_stats(cfg, {8, ""}, t8, err) == kExitOk);
  CHECK(t1.str() == t8.str());
  cfg.tau_stats.kbars = {0.6};
  CHECK(cmd_tau_stats(cfg, {}, out, err) == kExitUsage);
}
