#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <vector>

#include "rwre/environment.hpp"
#include "rwre/random.hpp"
#include "rwre/tilt.hpp"
#include "rwre/walk.hpp"

namespace rwre {

/// Letter of the forcing alphabet W = V u {0}. Values 0..2d-1 are the
/// directions (same indexing as Direction), 2d is the free letter 0.
class Symbol {
 public:
  constexpr Symbol() = default;
  constexpr explicit Symbol(int value) : value_(value) {}
  static constexpr Symbol forcing(Direction e) { return Symbol(e.index()); }
  static constexpr Symbol free(int dimension) { return Symbol(num_directions(dimension)); }

  constexpr int value() const { return value_; }
  constexpr bool is_free(int dimension) const { return value_ == num_directions(dimension); }
  constexpr Direction direction() const { return Direction(value_); }
  constexpr auto operator<=>(const Symbol&) const = default;

 private:
  int value_ = 0;
};

/// Product law U on W: each direction has mass kbar, the free letter
/// 1 - 2d kbar. Requires 0 < kbar < min_e u(e) and 2d kbar < 1.
class EpsilonLaw {
 public:
  EpsilonLaw(const TiltParams& tp, double kbar);
  /// kbar = min(1/(4d), min_e u(e) / 2).
  static EpsilonLaw with_default(const TiltParams& tp);
  static double default_kbar(const TiltParams& tp);
  /// The letter law alone (for stopping-time statistics); checks only
  /// 0 < kbar and 2d kbar < 1.
  static EpsilonLaw alphabet_only(int dimension, double kbar);

  int dimension() const { return dimension_; }
  double kbar() const { return kbar_; }
  double free_mass() const { return 1.0 - num_directions(dimension_) * kbar_; }
  double probability(Symbol s) const { return s.is_free(dimension_) ? free_mass() : kbar_; }
  Symbol sample(Engine& g) const;

 private:
  EpsilonLaw(int dimension, double kbar);

  int dimension_;
  double kbar_;
};

/// Block length L and the ray direction ell (<z, ell> > 0).
struct StoppingConfig {
  int L = 3;
  Direction ell;
  std::optional<int> L0;  ///< declared metadata only

  void validate(const TiltParams& tp) const;
};

/// Conditional step law given the letter: a forcing letter e moves along e;
/// the free letter moves along e with probability (u(e) - kbar)/(1 - 2d kbar).
std::vector<double> conditional_step_distribution(const TiltParams& tp, const EpsilonLaw& eps, Symbol letter);
Direction conditional_step(const TiltParams& tp, const EpsilonLaw& eps, Symbol letter, Engine& g);

inline constexpr std::int64_t kTauHorizonCap = 10'000'000;

/// First time the letters end with L consecutive copies of ell, counting the
/// letters drawn (so E tau = (kbar^-L - 1)/(1 - kbar)). Throws BudgetError when
/// no run completes within `horizon_cap` letters.
std::int64_t sample_tau(const EpsilonLaw& eps, const StoppingConfig& cfg, Engine& g,
                        std::int64_t horizon_cap = kTauHorizonCap);

/// The first `count` stopping times of one letter sequence; each scan restarts
/// with an empty run after the previous stopping time.
std::vector<std::int64_t> sample_stopping_times(const EpsilonLaw& eps, const StoppingConfig& cfg, Engine& g, int count,
                                                std::int64_t horizon_cap = kTauHorizonCap);

/// (kbar^-L - 1)/(1 - kbar)
double expected_tau(const EpsilonLaw& eps, const StoppingConfig& cfg);
/// (kbar^-L - 1) / (1 - kbar) for any kbar in (0, 1).
double expected_tau(double kbar, int L);

/// 1{letter = step} + 1{letter free} [xi + kbar/(u(step) - kbar) (xi - 1)]
double psi_factor(const TiltParams& tp, const EpsilonLaw& eps, Symbol letter, Direction step, double xi_value);
double psi_factor(const TiltParams& tp, const EpsilonLaw& eps, const Environment& env, Symbol letter,
                  const Site& position, Direction step);

/// E^{U x Qbar}[ e^{<theta,Z_n>} prod psi_j ] and E^Q[ e^{<theta,Z_n>} prod xi_j ]
/// by exact enumeration of (letter, step) sequences and of paths.
IdentitySides verify_psi_identity(const TiltParams& tp, const EpsilonLaw& eps, const Environment& env,
                                  const std::vector<double>& theta, int n);

/// Law of Z_n under U x Qbar and under Q, both by exact enumeration.
std::map<Site, double> decomposed_endpoint_distribution(const TiltParams& tp, const EpsilonLaw& eps, int n);
std::map<Site, double> qwalk_endpoint_distribution(const TiltParams& tp, int n);

enum class Mode { Quenched, Annealed };

struct BlockSample {
  std::vector<Symbol> epsilon;
  Path path;
  std::int64_t tau1 = 0;
  double psi_product = 0.0;  ///< prod_{j <= tau1} psi_j times 1{on_ray}
  bool on_ray = false;
};

/// Draws one block: letters up to tau_1, the conditional path, and the
/// ray-restricted psi product. Quenched mode reads xi from env; annealed mode
/// replaces each factor by its environment expectation (i.i.d. laws, where
/// distinct ray sites factorize). Ray sites must be inside env's region.
BlockSample sample_ray_block(const TiltParams& tp, const EpsilonLaw& eps, const StoppingConfig& cfg,
                             const Environment& env, Mode mode, Engine& g, std::int64_t horizon_cap = kTauHorizonCap);

/// E over one ray site of the free-letter factor psi along ell:
/// E[xi] + kbar/(u(ell)-kbar) (E[xi] - 1). Exactly 1 for exact means.
double annealed_free_factor(const TiltParams& tp, const EpsilonLaw& eps, const EnvironmentLaw& law, Direction ell);

}  // namespace rwre
