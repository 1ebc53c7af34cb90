#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "rwre/decomp.hpp"
#include "rwre/environment.hpp"
#include "rwre/ldp.hpp"

namespace rwre {

/// Malformed or inconsistent configuration (a usage error).
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct LawConfig {
  int dimension = 1;
  double kappa = 0.1;
  std::string kind = "iid";  ///< "iid" or "markov"
  std::vector<std::vector<double>> atoms{{0.4, 0.6}, {0.6, 0.4}};
  std::vector<double> weights{0.5, 0.5};
  int range = 1;
  double beta = 0.0;
  std::vector<std::vector<double>> states;
  int sweeps = 64;
  std::string mean_mode = "auto";  ///< "auto", "exact" or "monte-carlo"
  std::optional<double> mixing_C;
  std::optional<double> mixing_g;
  std::optional<int> mixing_L0;

  bool operator==(const LawConfig&) const = default;
};

struct VerifyConfig {
  int n_max = 10;  ///< identity horizons 1..n_max
  int theta_samples = 20;
  double theta_bound = 2.0;
  int decomposition_n = 5;
  int psi_n = 5;
  int psi_theta_samples = 4;
  int one_step_samples = 1000;
  double identity_tolerance = 1e-10;
  double one_step_tolerance = 1e-12;
  double tilt_tolerance = 1e-12;
  double factorization_tolerance = 1e-10;
  bool corrupt_theta = false;  ///< test hook: perturbs theta before checking

  bool operator==(const VerifyConfig&) const = default;
};

struct GapConfig {
  std::int64_t env_replicas = 16'000;
  std::int64_t block_replicas = 4'000;
  int groups = 16;
  int max_groups = 256;
  std::int64_t horizon = 0;  ///< 0: chosen from E tau
  int max_doublings = 4;
  double certify_threshold = 5.0;
  double refute_threshold = 3.0;
  std::int64_t exact_check_horizon = 0;  ///< > 0 adds an exact small-horizon cross-check

  bool operator==(const GapConfig&) const = default;
};

struct RateConfig {
  std::string method = "enumeration";  ///< "enumeration" or "tilted-mc"
  std::vector<std::vector<double>> grid{{1.0}};
  int horizon = 10'000;
  int annealed_enumeration_horizon = 20;
  int env_replicas = 8;
  std::int64_t path_replicas = 4'000;
  int mc_horizon = 400;
  double grid_half_width = 0.6;
  double grid_step = 0.05;

  bool operator==(const RateConfig&) const = default;
};

struct EnvSampleConfig {
  std::int64_t radius = 10;

  bool operator==(const EnvSampleConfig&) const = default;
};

struct TauStatsConfig {
  std::int64_t draws = 1'000'000;
  std::vector<double> kbars;  ///< empty: the configured/default kbar
  std::vector<int> block_lengths;  ///< empty: the configured L

  bool operator==(const TauStatsConfig&) const = default;
};

struct ExperimentConfig {
  LawConfig law;
  std::vector<double> z{0.5};
  std::string ell = "+e1";
  int L = 3;
  std::optional<int> L0;
  std::optional<double> kbar;
  std::uint64_t seed = 1;
  VerifyConfig verify;
  GapConfig gap;
  RateConfig rate;
  EnvSampleConfig env_sample;
  TauStatsConfig tau_stats;

  bool operator==(const ExperimentConfig&) const = default;
};

/// Run settings that never influence results and are excluded from the hash.
struct RunSettings {
  int threads = 1;
  std::string out_dir;
};

nlohmann::json to_json(const ExperimentConfig& cfg);
/// Missing keys take their defaults; unknown keys are rejected.
ExperimentConfig config_from_json(const nlohmann::json& j);
ExperimentConfig load_config(const std::string& path);

/// Canonical serialization (sorted keys, shortest round-trip doubles).
std::string canonical_dump(const ExperimentConfig& cfg);
/// FNV-1a 64 of canonical_dump, as 16 hex digits.
std::string config_hash(const ExperimentConfig& cfg);

LawPtr build_law(const LawConfig& cfg);
Direction config_direction(const ExperimentConfig& cfg);
StoppingConfig build_stopping(const ExperimentConfig& cfg);
EpsilonLaw build_epsilon(const ExperimentConfig& cfg, const TiltParams& tp);
GapBudget build_gap_budget(const ExperimentConfig& cfg, const RunSettings& run);
RateOptions build_rate_options(const ExperimentConfig& cfg, const RunSettings& run);

}  // namespace rwre
