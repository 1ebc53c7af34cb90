#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "rwre/config.hpp"

using namespace rwre;
using nlohmann::json;

TEST_CASE("default config round-trips and has a pinned hash") {
  const ExperimentConfig cfg;
  CHECK(config_from_json(to_json(cfg)) == cfg);
  CHECK(config_hash(cfg) == "694e89334e49e0cc");
  CHECK(config_hash(cfg).size() == 16u);
  CHECK(canonical_dump(cfg) == to_json(cfg).dump());
}

TEST_CASE("modified configs round-trip losslessly") {
  ExperimentConfig cfg;
  cfg.law.dimension = 2;
  cfg.law.kappa = 0.05;
  cfg.law.atoms = {{0.3, 0.2, 0.25, 0.25}, {0.2, 0.3, 0.25, 0.25}};
  cfg.z = {0.1 + 0.2, -1.0 / 3.0};
  cfg.ell = "-e2";
  cfg.L = 4;
  cfg.kbar = 0.0625;
  cfg.seed = 0xFFFFFFFFFFFFFFFFULL;
  cfg.verify.identity_tolerance = 3e-11;
  cfg.gap.exact_check_horizon = 10;
  cfg.rate.grid = {{0.1, 0.2}, {0.0, 1.0}};
  cfg.tau_stats.kbars = {0.125, 0.25};
  const auto back = config_from_json(json::parse(canonical_dump(cfg)));
  CHECK(back == cfg);
  CHECK(config_hash(back) == config_hash(cfg));
  CHECK(config_hash(cfg) != config_hash(ExperimentConfig{}));

  ExperimentConfig markov;
  markov.law.kind = "markov";
  markov.law.atoms.clear();
  markov.law.weights.clear();
  markov.law.states = {{0.3, 0.7}, {0.7, 0.3}};
  markov.law.beta = 0.4;
  markov.law.mixing_C = 2.0;
  markov.law.mixing_L0 = 3;
  CHECK(config_from_json(to_json(markov)) == markov);
}

TEST_CASE("partial configs fill in defaults") {
  const auto cfg = config_from_json(json::parse(R"({"seed": 9, "gap": {"groups": 32}})"));
  CHECK(cfg.seed == 9u);
  CHECK(cfg.gap.groups == 32);
  CHECK(cfg.gap.max_groups == GapConfig{}.max_groups);
  CHECK(cfg.law == LawConfig{});
}

TEST_CASE("malformed configs are usage errors") {
  CHECK_THROWS_AS(config_from_json(json::parse(R"({"sede": 1})")), ConfigError);
  CHECK_THROWS_AS(config_from_json(json::parse(R"({"gap": {"grops": 1}})")), ConfigError);
  CHECK_THROWS_AS(config_from_json(json::parse(R"({"L": "three"})")), ConfigError);
  CHECK_THROWS_AS(config_from_json(json::parse(R"({"law": {"kind": "gaussian"}})")), ConfigError);
  CHECK_THROWS_AS(config_from_json(json::parse(R"({"rate": {"method": "magic"}})")), ConfigError);
  CHECK_THROWS_AS(config_from_json(json::parse("[1, 2]")), ConfigError);
  CHECK_THROWS_AS(load_config("/nonexistent/config.json"), ConfigError);

  const auto path = std::filesystem::temp_directory_path() / "rwre_bad_config.json";
  std::ofstream(path) << "{ not json";
  CHECK_THROWS_AS(load_config(path.string()), ConfigError);
  std::filesystem::remove(path);
}

TEST_CASE("builders validate against the model") {
  ExperimentConfig cfg;
  CHECK(build_law(cfg.law)->dimension() == 1);
  CHECK(config_direction(cfg) == Direction::positive(0));
  CHECK(build_stopping(cfg).L == 3);

  cfg.L = 1;
  CHECK_THROWS_AS(build_stopping(cfg), ConfigError);
  cfg.L = 2;
  cfg.ell = "+e2";
  CHECK_THROWS_AS(config_direction(cfg), ConfigError);

  ExperimentConfig bad_law;
  bad_law.law.atoms = {{0.05, 0.95}};
  bad_law.law.weights = {1.0};
  CHECK_THROWS_AS(build_law(bad_law.law), ConfigError);

  ExperimentConfig k;
  k.kbar = 0.3;
  const auto law = build_law(k.law);
  const auto tp = solve_tilt(*law, k.z);
  CHECK_THROWS_AS(build_epsilon(k, tp), ConfigError);
  k.kbar.reset();
  CHECK(build_epsilon(k, tp).kbar() == doctest::Approx(EpsilonLaw::default_kbar(tp)));

  RunSettings run;
  run.threads = 4;
  const auto budget = build_gap_budget(ExperimentConfig{}, run);
  CHECK(budget.ray.threads == 4);
  CHECK(budget.ray.seed == 1u);
  CHECK(build_rate_options(ExperimentConfig{}, run).method == RateMethod::Enumeration);
}
