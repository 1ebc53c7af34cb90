#include "rwre/tilt.hpp"

#include <algorithm>
#include <stdexcept>

#include "rwre/log_sum.hpp"
#include "rwre/walk.hpp"

namespace rwre {

namespace {

constexpr int kMaxBisection = 200;

double tilted_weight(const std::vector<double>& theta, const Site& x) {
  double s = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) s += theta[k] * static_cast<double>(x[k]);
  return std::exp(s);
}

// u(e) from C, computed without cancellation for <z,e> < 0.
double step_probability(double ze, double product_term) {
  const double s = std::sqrt(ze * ze + product_term);
  return ze >= 0.0 ? 0.5 * (ze + s) : 0.5 * product_term / (s - ze);
}

// E^Q[ e^{<theta,Z_n>} prod xi ] summed over paths, with xi supplied per step.
template <class XiProduct>
double tilted_path_sum(const TiltParams& tp, const std::vector<double>& theta, int n, XiProduct&& xi_product) {
  double total = 0.0;
  for_each_path(n, tp.dimension, [&](std::span<const Direction> steps, const Site& end) {
    double w = tilted_weight(theta, end) * xi_product(steps);
    for (auto e : steps) w *= tp.step(e);
    total += w;
  });
  return total;
}

double endpoint_sum(const std::map<Site, double>& dist, const std::vector<double>& shift, double D, int n) {
  double total = 0.0;
  for (const auto& [site, p] : dist) total += tilted_weight(shift, site) * p;
  return std::pow(D, n) * total;
}

}  // namespace

double tilt_equation(std::span<const double> means, const std::vector<double>& z, double C) {
  const int d = static_cast<int>(z.size());
  double f = 0.0;
  for (auto e : all_directions(d)) {
    const double ze = dot(z, e);
    f += std::sqrt(ze * ze + 4.0 * C * means[static_cast<std::size_t>(e.index())] *
                                 means[static_cast<std::size_t>((-e).index())]);
  }
  return 0.5 * f;
}

TiltParams solve_tilt(std::span<const double> means, const std::vector<double>& z) {
  const int d = static_cast<int>(z.size());
  check_dimension(d);
  if (static_cast<int>(means.size()) != num_directions(d)) throw std::invalid_argument("need 2d marginal means");
  for (double m : means) {
    if (!(m > 0.0)) throw std::invalid_argument("marginal means must be positive");
  }
  const double norm = l1_norm(z);
  if (!(norm > 0.0)) throw std::domain_error("drift z = 0 is excluded; the tilt needs z in int(D) minus the origin");
  if (!(norm < 1.0)) throw std::domain_error("drift must satisfy |z|_1 < 1 so that f(0) < 1");

  double lo = 0.0;
  double hi = 1.0;
  while (tilt_equation(means, z, hi) <= 1.0) hi *= 2.0;
  for (int it = 0; it < kMaxBisection && hi - lo > 1e-14 * std::max(1.0, hi); ++it) {
    const double mid = 0.5 * (lo + hi);
    if (tilt_equation(means, z, mid) > 1.0) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  const double r_lo = std::abs(tilt_equation(means, z, lo) - 1.0);
  const double r_hi = std::abs(tilt_equation(means, z, hi) - 1.0);

  TiltParams tp;
  tp.dimension = d;
  tp.z = z;
  tp.C = r_lo <= r_hi ? lo : hi;
  tp.residual = std::min(r_lo, r_hi);
  tp.D = std::sqrt(tp.C);
  tp.means.assign(means.begin(), means.end());
  tp.u.resize(static_cast<std::size_t>(num_directions(d)));
  for (auto e : all_directions(d)) {
    tp.u[static_cast<std::size_t>(e.index())] = step_probability(dot(z, e), 4.0 * tp.C * tp.mean(e) * tp.mean(-e));
  }
  tp.theta.resize(static_cast<std::size_t>(d));
  for (int k = 0; k < d; ++k) {
    const auto e = Direction::positive(k);
    tp.theta[static_cast<std::size_t>(k)] = std::log(tp.step(e) / (tp.D * tp.mean(e)));
  }
  tp.c_z = *std::min_element(tp.u.begin(), tp.u.end());
  return tp;
}

TiltParams solve_tilt(const EnvironmentLaw& law, const std::vector<double>& z) {
  if (static_cast<int>(z.size()) != law.dimension()) throw std::invalid_argument("drift dimension mismatch");
  const auto m = law.means();
  return solve_tilt(m, z);
}

std::vector<InvariantCheck> check_tilt(const TiltParams& tp, double tolerance, double factorization_tolerance) {
  const auto dirs = all_directions(tp.dimension);
  double sum = 0.0;
  double quadratic = 0.0;
  double product = 0.0;
  double factor = 0.0;
  double min_u = 1.0;
  std::vector<double> drift(static_cast<std::size_t>(tp.dimension), 0.0);
  for (auto e : dirs) {
    const double u = tp.step(e);
    const double ze = dot(tp.z, e);
    const double mm = tp.mean(e) * tp.mean(-e);
    sum += u;
    quadratic = std::max(quadratic, std::abs(2.0 * u - (ze + std::sqrt(ze * ze + 4.0 * tp.C * mm))));
    product = std::max(product, std::abs(u * tp.step(-e) - tp.C * mm));
    factor = std::max(factor, std::abs(u - tp.D * std::exp(tp.theta_dot(e)) * tp.mean(e)));
    drift[static_cast<std::size_t>(e.axis())] += e.sign() * u;
    min_u = std::min(min_u, u);
  }
  double drift_err = 0.0;
  for (int k = 0; k < tp.dimension; ++k) {
    drift_err = std::max(drift_err, std::abs(drift[static_cast<std::size_t>(k)] - tp.z[static_cast<std::size_t>(k)]));
  }
  const double floor_err = tp.c_z > 0.0 ? std::max(0.0, tp.c_z - min_u) : 1.0;
  return {
      {"sum-to-one", std::abs(sum - 1.0), tolerance},
      {"defining-quadratic", quadratic, tolerance},
      {"product-rule", product, tolerance},
      {"mean-drift", drift_err, tolerance},
      {"exponential-factorization", factor, factorization_tolerance},
      {"positive-floor", floor_err, 0.0},
  };
}

std::vector<double> qwalk_step_distribution(const TiltParams& tp) { return tp.u; }

IdentitySides verify_identity_annealed(const LawPtr& law, const TiltParams& tp, const std::vector<double>& theta,
                                       int n) {
  const int d = tp.dimension;
  std::vector<double> shifted(theta);
  for (int k = 0; k < d; ++k) shifted[static_cast<std::size_t>(k)] += tp.theta[static_cast<std::size_t>(k)];

  IdentitySides out;
  if (law->is_iid()) {
    out.lhs = tilted_path_sum(tp, theta, n, [&](std::span<const Direction> steps) {
      double w = 1.0;
      for (const auto& [site, counts] : visit_counts(d, steps)) {
        w *= law->expect_site([&](const SiteVector& v) {
          double p = 1.0;
          for (auto e : all_directions(d)) {
            const double ratio = v[e] / law->mean(e);
            for (int c = 0; c < counts[static_cast<std::size_t>(e.index())]; ++c) p *= ratio;
          }
          return p;
        });
      }
      return w;
    });
  } else {
    (void)path_count(n, d);
    for_each_field_configuration(law, Box::centered(d, std::max(n - 1, 0)), [&](double weight, const Environment& env) {
      out.lhs += weight * tilted_path_sum(tp, theta, n, [&](std::span<const Direction> steps) {
                   Site x = origin(d);
                   double w = 1.0;
                   for (auto e : steps) {
                     w *= xi(env, x, e);
                     advance(x, e);
                   }
                   return w;
                 });
    });
  }
  out.rhs = endpoint_sum(annealed_endpoint_distribution(law, n), shifted, tp.D, n);
  return out;
}

IdentitySides verify_identity_quenched(const Environment& env, const TiltParams& tp, const std::vector<double>& theta,
                                       int n) {
  const int d = tp.dimension;
  std::vector<double> shifted(theta);
  for (int k = 0; k < d; ++k) shifted[static_cast<std::size_t>(k)] += tp.theta[static_cast<std::size_t>(k)];
  IdentitySides out;
  out.lhs = tilted_path_sum(tp, theta, n, [&](std::span<const Direction> steps) {
    Site x = origin(d);
    double w = 1.0;
    for (auto e : steps) {
      w *= xi(env, x, e);
      advance(x, e);
    }
    return w;
  });
  out.rhs = endpoint_sum(quenched_endpoint_distribution(env, n), shifted, tp.D, n);
  return out;
}

double zero_disorder_free_energy(const TiltParams& tp, const std::vector<double>& theta) {
  std::vector<double> terms;
  for (auto e : all_directions(tp.dimension)) terms.push_back(dot(theta, e) + std::log(tp.step(e)));
  return log_sum_exp(terms);
}

}  // namespace rwre
