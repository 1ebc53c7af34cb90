#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "rwre/commands.hpp"
#include "rwre/config.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Random walks in random environment: tilt, decomposition and large-deviation estimators"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  std::optional<std::uint64_t> seed;
  rwre::RunSettings run;
  app.add_option("--config", config_path, "experiment config (JSON); defaults apply when omitted")
      ->check(CLI::ExistingFile);
  app.add_option("--seed", seed, "overrides the config seed");
  app.add_option("--threads", run.threads, "worker threads (results do not depend on it)")
      ->check(CLI::PositiveNumber);
  app.add_option("--out", run.out_dir, "directory for JSON/CSV artifacts");

  using Command = int (*)(const rwre::ExperimentConfig&, const rwre::RunSettings&, std::ostream&, std::ostream&);
  Command chosen = nullptr;
  const std::pair<const char*, Command> table[] = {
      {"verify", rwre::cmd_verify},
      {"gap", rwre::cmd_gap},
      {"rate", rwre::cmd_rate},
      {"env-sample", rwre::cmd_env_sample},
      {"tau-stats", rwre::cmd_tau_stats},
  };
  const char* help[] = {
      "run the exact-oracle identity suite",
      "certify the quenched/annealed gap on the ray",
      "estimate rate functions over a velocity grid",
      "sample an environment on a box",
      "check stopping-time statistics against the closed form",
  };
  for (std::size_t i = 0; i < std::size(table); ++i) {
    auto* sub = app.add_subcommand(table[i].first, help[i]);
    sub->callback([&chosen, c = table[i].second] { chosen = c; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : rwre::kExitUsage;
  }

  rwre::ExperimentConfig cfg;
  try {
    if (!config_path.empty()) cfg = rwre::load_config(config_path);
  } catch (const std::exception& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return rwre::kExitUsage;
  }
  if (seed) cfg.seed = *seed;
  return chosen(cfg, run, std::cout, std::cerr);
}
