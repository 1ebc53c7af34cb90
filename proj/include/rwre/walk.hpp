#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include "rwre/environment.hpp"
#include "rwre/lattice.hpp"

namespace rwre {

/// Hard cap on (2d)^n for every exact path enumeration.
inline constexpr std::int64_t kEnumerationBudget = 10'000'000;

/// Nearest-neighbour path; positions are derived from the start and steps.
struct Path {
  Site start;
  std::vector<Direction> steps;

  std::size_t length() const { return steps.size(); }
  /// Z^j, with Z^0 = start.
  Site position(std::size_t j) const;
  std::vector<Site> positions() const;
  Site end() const { return position(steps.size()); }
};

/// Number of paths of length n in dimension d; throws BudgetError when it
/// exceeds `budget`.
std::int64_t path_count(int n, int dimension, std::int64_t budget = kEnumerationBudget);

std::vector<Path> enumerate_paths(int n, int dimension);

/// Depth-first visit of all (2d)^n step sequences from the origin without
/// materializing them. visit(steps, endpoint).
template <class Visit>
void for_each_path(int n, int dimension, Visit&& visit) {
  (void)path_count(n, dimension);
  std::vector<Direction> steps(static_cast<std::size_t>(n));
  Site x = origin(dimension);
  const int nd = num_directions(dimension);
  auto rec = [&](auto&& self, int j) -> void {
    if (j == n) {
      visit(std::span<const Direction>(steps), static_cast<const Site&>(x));
      return;
    }
    for (int k = 0; k < nd; ++k) {
      const Direction e(k);
      steps[static_cast<std::size_t>(j)] = e;
      advance(x, e);
      self(self, j + 1);
      advance(x, e, -1);
    }
  };
  rec(rec, 0);
}

/// Samples n steps of P_{start, omega}; reproducible for a given rng_seed.
Path simulate_quenched(const Environment& env, const Site& start, int n, std::uint64_t rng_seed);

/// prod_j omega(X_{j-1}, Delta_j) along the given steps from the origin.
double quenched_path_weight(const Environment& env, std::span<const Direction> steps);

/// E[prod_j omega(X_{j-1}, Delta_j)] for an i.i.d. law. Steps are grouped by
/// the site they leave so repeated visits use joint moments of one site.
double annealed_path_weight(const EnvironmentLaw& law, std::span<const Direction> steps);
double log_annealed_path_weight(const EnvironmentLaw& law, std::span<const Direction> steps);

/// Visit counts per (site, direction) for a path leaving the origin.
std::map<Site, std::vector<int>> visit_counts(int dimension, std::span<const Direction> steps);

/// Sum over length-n paths ending at target of the annealed path weight.
/// i.i.d. laws use exact per-site moments; Markov fields enumerate every
/// field configuration on the reachable box. Accumulates in log space when
/// n > 20.
double annealed_point_probability(const LawPtr& law, int n, const Site& target);

/// P_0(X_n = .) for every endpoint, by enumeration (i.i.d. moments or Markov
/// configuration enumeration as above).
std::map<Site, double> annealed_endpoint_distribution(const LawPtr& law, int n);

/// Sum over length-n paths ending at target of prod omega, by enumeration.
double quenched_point_probability(const Environment& env, int n, const Site& target);

/// All endpoint probabilities of P_{0,omega}(X_n = .) by enumeration.
std::map<Site, double> quenched_endpoint_distribution(const Environment& env, int n);

/// log P_{0,omega}(X_n = target) by forward recursion over the radius-n box
/// (no path budget). A target at l1 distance n along an axis is the single
/// straight path and is evaluated directly.
double log_quenched_point_probability(const Environment& env, int n, const Site& target);

}  // namespace rwre
