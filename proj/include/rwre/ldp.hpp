#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rwre/decomp.hpp"
#include "rwre/environment.hpp"
#include "rwre/tilt.hpp"

namespace rwre {

// ---------------------------------------------------------------------------
// Free energies

struct FreeEnergyOptions {
  int horizon = 100;
  std::int64_t replicas = 10'000;
  std::uint64_t seed = 1;
  int threads = 1;
};

struct FreeEnergyEstimate {
  std::vector<double> theta;
  double value = 0.0;      ///< (1/N) log of the estimated tilted expectation
  double std_error = 0.0;  ///< delete-one jackknife
  int horizon = 0;
  Mode mode = Mode::Annealed;
  std::int64_t replicas = 0;
  double ess = 0.0;         ///< effective sample size of the importance weights
  bool degenerate = false;  ///< ess < 10
};

/// (1/N) log E^Q[ e^{<theta,Z_N>} E prod xi ] by importance sampling under the
/// tilted walk. i.i.d. laws use exact per-path xi-moments; Markov fields pair
/// each path with a freshly sampled environment.
FreeEnergyEstimate estimate_free_energy(const LawPtr& law, const TiltParams& tp, const std::vector<double>& theta,
                                        const FreeEnergyOptions& options);

/// Quenched counterpart in the fixed environment `env` (must cover the
/// radius-N box).
FreeEnergyEstimate estimate_free_energy(const Environment& env, const TiltParams& tp, const std::vector<double>& theta,
                                        const FreeEnergyOptions& options);

/// Exact (1/n) log of the same expectations by path enumeration.
double exact_free_energy(const LawPtr& law, const TiltParams& tp, const std::vector<double>& theta, int n);
double exact_free_energy(const Environment& env, const TiltParams& tp, const std::vector<double>& theta, int n);

/// Jackknife (delete-one) standard error of log(mean exp(log_weights)).
double jackknife_log_mean_error(std::span<const double> log_weights);

// ---------------------------------------------------------------------------
// Convex conjugate

struct LegendreResult {
  double value = 0.0;
  double unclipped = 0.0;
  std::vector<double> argmax;
  bool clipped = false;  ///< unclipped value was below -tolerance
};

/// Regular grid: every axis uses the same sorted node values.
struct ThetaGrid {
  int dimension = 1;
  std::vector<double> nodes;

  std::vector<std::vector<double>> points() const;
  static ThetaGrid uniform(int dimension, double half_width, double step);
};

/// sup over the grid of <theta,x> - Lambda(theta), refined by golden-section
/// search along each axis through the best node. Throws std::domain_error when
/// the best node sits on the grid boundary.
LegendreResult legendre_transform(const std::function<double(const std::vector<double>&)>& lambda,
                                  const ThetaGrid& grid, const std::vector<double>& x, double tolerance = 1e-9);

/// Same from tabulated samples on a regular grid; the refinement runs on the
/// quadratic through the best node and its two neighbours on the best axis.
LegendreResult legendre_transform(const std::map<std::vector<double>, double>& samples, const std::vector<double>& x,
                                  double tolerance = 1e-9);

// ---------------------------------------------------------------------------
// Ray blocks and the rate-function bounds at a lattice direction

/// log D + <theta_z, ell>
double ray_tilt_constant(const TiltParams& tp, Direction ell);

/// Truncation horizon H with U(tau_1 > H) < 1e-4 by Markov's inequality.
std::int64_t default_ray_horizon(const EpsilonLaw& eps, const StoppingConfig& cfg);

/// One block that stayed on the ray: its length and the steps j (1-based)
/// whose letter was free, i.e. where psi depends on the environment.
struct OnRayBlock {
  std::int64_t index = 0;  ///< position of the block in its sampling sequence
  std::int64_t tau = 0;
  std::vector<std::int32_t> free_steps;
};

/// Blocks drawn from U x Qbar. Blocks that leave the ray, or whose tau_1
/// exceeds the horizon, contribute zero and are only counted.
struct RayBlockSet {
  std::int64_t blocks = 0;
  std::vector<OnRayBlock> on_ray;

  std::int64_t max_tau() const;
};

RayBlockSet sample_ray_blocks(const TiltParams& tp, const EpsilonLaw& eps, const StoppingConfig& cfg,
                              std::int64_t count, std::int64_t horizon, Engine& g);

/// E^{Qbar}[ prod_{j <= tau_1} psi_j 1{Z_j = j ell} 1{tau_1 <= H} ] given the
/// free-letter factor psi at every ray step 1..H, by a run-length recursion.
double ray_block_expectation(const TiltParams& tp, const EpsilonLaw& eps, const StoppingConfig& cfg,
                             std::span<const double> free_factors);

struct RayOptions {
  std::int64_t env_replicas = 2'000;  ///< environments, split evenly over groups
  std::int64_t block_replicas = 4'000;  ///< starting letter blocks per group
  int groups = 16;                      ///< independent (blocks, environments) groups
  std::int64_t horizon = 0;             ///< 0 selects default_ray_horizon
  std::uint64_t seed = 1;
  int threads = 1;
  int max_doublings = 4;
};

struct BoundEstimate {
  double value = 0.0;
  double std_error = 0.0;
  double W = 0.0;
  double side = 0.0;  ///< the (1/E tau) log-term that is subtracted from W
  double expected_tau = 0.0;
  std::int64_t horizon = 0;
  std::int64_t blocks = 0;
  std::int64_t on_ray_blocks = 0;
};

/// W - (1/E tau) log E^{Qbar}[ E prod psi 1{ray} ]: Monte Carlo over letters
/// with exact per-site moments (paired environments for Markov fields). Each
/// group's log-mean is delta-corrected; the error is taken across groups.
BoundEstimate bound_Ia(const TiltParams& tp, const EpsilonLaw& eps, const StoppingConfig& cfg, const LawPtr& law,
                       const RayOptions& options);

/// W - (1/E tau) E_P log E^{Qbar}[ prod psi 1{ray} ]: nested Monte Carlo with
/// inner-replica doubling until the estimate moves by less than half a
/// standard error.
BoundEstimate bound_Iq(const TiltParams& tp, const EpsilonLaw& eps, const StoppingConfig& cfg, const LawPtr& law,
                       const RayOptions& options);

enum class GapVerdict { Certified, Inconclusive, Refuted };
std::string to_string(GapVerdict v);

struct GapGroup {
  std::int64_t on_ray_blocks = 0;
  double annealed = 0.0;  ///< log of the annealed block mean (bias-corrected)
  double quenched = 0.0;  ///< mean over environments of log quenched block means
};

struct GapReport {
  Direction ell;
  int L = 0;
  double kbar = 0.0;
  std::int64_t horizon = 0;
  double expected_tau = 0.0;
  double W = 0.0;
  double quenched_side = 0.0;
  double quenched_std_error = 0.0;
  double annealed_side = 0.0;
  double annealed_std_error = 0.0;
  double gap = 0.0;
  double std_error = 0.0;
  double bias_bound = 0.0;
  double significance = 0.0;  ///< (gap - bias_bound) / std_error; 0 when both vanish
  double bound_Ia = 0.0;      ///< W - annealed_side
  double bound_Iq = 0.0;      ///< W - quenched_side
  double ratio = 0.0;         ///< quenched_side / annealed_side
  double disorder = 0.0;
  int groups = 0;
  std::int64_t blocks_per_group = 0;
  std::int64_t envs_per_group = 0;
  GapVerdict verdict = GapVerdict::Inconclusive;
  std::vector<GapGroup> trace;
};

struct GapBudget {
  RayOptions ray;
  int max_groups = 256;
  double certify_threshold = 5.0;
  double refute_threshold = 3.0;
};

/// Estimates both sides of the Jensen inequality on a common truncation
/// horizon with common letter blocks, doubling the number of groups until the
/// gap is certified, refuted or the budget runs out.
GapReport certify_gap(const TiltParams& tp, const EpsilonLaw& eps, const StoppingConfig& cfg, const LawPtr& law,
                      const GapBudget& budget);

struct ExactRayGap {
  double annealed_side = 0.0;
  double quenched_side = 0.0;
  double gap = 0.0;
  std::int64_t configurations = 0;
};

/// Both sides at truncation horizon H exactly: every ray configuration of an
/// i.i.d. law on the H ray sites is enumerated (atoms^H <= 2^22).
ExactRayGap exact_ray_gap(const TiltParams& tp, const EpsilonLaw& eps, const StoppingConfig& cfg,
                          const EnvironmentLaw& law, std::int64_t horizon);

// ---------------------------------------------------------------------------
// Rate functions

enum class RateMethod { Enumeration, TiltedMC };
std::string to_string(RateMethod m);

struct RateOptions {
  RateMethod method = RateMethod::Enumeration;
  int horizon = 10'000;  ///< N for the quenched/ray route
  int annealed_enumeration_horizon = 20;
  int env_replicas = 8;
  std::int64_t path_replicas = 4'000;  ///< tilted-MC paths per grid point
  int mc_horizon = 400;
  double grid_half_width = 0.6;
  double grid_step = 0.05;
  std::uint64_t seed = 1;
  int threads = 1;
};

struct RatePointEstimate {
  std::vector<double> x;
  double I_a = 0.0;
  double I_q = 0.0;
  double std_error_a = 0.0;
  double std_error_q = 0.0;
  RateMethod method = RateMethod::Enumeration;
  int horizon = 0;
};

/// Validates x for rate_point: |x|_1 < 1, or x a lattice direction.
void check_velocity(const std::vector<double>& x);

RatePointEstimate rate_point(const LawPtr& law, const std::vector<double>& x, const RateOptions& options);

}  // namespace rwre
