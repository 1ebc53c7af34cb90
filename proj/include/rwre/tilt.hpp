#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "rwre/environment.hpp"
#include "rwre/lattice.hpp"

namespace rwre {

/// Parameters of the auxiliary homogeneous walk with drift z obtained by
/// exponentially tilting the mean environment.
///
/// u(e) solves u(e) u(-e) = C m(e) m(-e) with sum_e u(e) e = z, where m are
/// the marginal means and C is the root of
///   f(C) = 1/2 sum_e sqrt(<z,e>^2 + 4 C m(e) m(-e)) = 1.
/// The step law then factorizes as u(e) = D exp(<theta,e>) m(e) with D = sqrt(C).
struct TiltParams {
  int dimension = 1;
  std::vector<double> z;
  double C = 0.0;
  std::vector<double> u;      ///< indexed by Direction::index()
  std::vector<double> theta;  ///< one entry per axis
  double D = 0.0;
  double c_z = 0.0;           ///< min_e u(e)
  double residual = 0.0;      ///< |f(C) - 1|
  std::vector<double> means;  ///< m(e) the tilt was built from

  double step(Direction e) const { return u[static_cast<std::size_t>(e.index())]; }
  double mean(Direction e) const { return means[static_cast<std::size_t>(e.index())]; }
  double log_D() const { return 0.5 * std::log(C); }
  /// <theta, e>
  double theta_dot(Direction e) const { return dot(theta, e); }
};

/// f(C) for the given means and drift.
double tilt_equation(std::span<const double> means, const std::vector<double>& z, double C);

/// Bisection on [0, C_hi] (C_hi doubled until f(C_hi) > 1). Throws
/// std::domain_error unless 0 < |z|_1 < 1.
TiltParams solve_tilt(std::span<const double> means, const std::vector<double>& z);
TiltParams solve_tilt(const EnvironmentLaw& law, const std::vector<double>& z);

struct InvariantCheck {
  std::string name;
  double residual = 0.0;
  double tolerance = 0.0;
  bool ok() const { return residual <= tolerance; }
};

/// The six structural invariants of a tilt: normalization, the defining
/// quadratic, the product rule, the drift, the exponential factorization and
/// the positive floor c_z.
std::vector<InvariantCheck> check_tilt(const TiltParams& tp, double tolerance = 1e-12,
                                       double factorization_tolerance = 1e-10);

/// u as a step law for the homogeneous walk.
std::vector<double> qwalk_step_distribution(const TiltParams& tp);

struct IdentitySides {
  double lhs = 0.0;
  double rhs = 0.0;
  double relative_error() const { return std::abs(lhs - rhs) / std::abs(rhs); }
};

/// Change-of-measure identity, annealed form, by two independent exact
/// enumerations:
///   lhs = E^Q[ e^{<theta,Z_n>} E prod_j xi(Z_{j-1}, Delta_j) ]   (Q-paths, xi-moments)
///   rhs = D^n E_0[ e^{<theta + theta_z, X_n>} ]                  (endpoints, omega-moments)
IdentitySides verify_identity_annealed(const LawPtr& law, const TiltParams& tp, const std::vector<double>& theta, int n);

/// Quenched form in a fixed environment.
IdentitySides verify_identity_quenched(const Environment& env, const TiltParams& tp, const std::vector<double>& theta,
                                       int n);

/// log sum_e e^{<theta,e>} u(e)
double zero_disorder_free_energy(const TiltParams& tp, const std::vector<double>& theta);

}  // namespace rwre
