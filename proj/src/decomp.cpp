#include "rwre/decomp.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace rwre {

namespace {

double tilted_weight(const std::vector<double>& theta, const Site& x) {
  double s = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) s += theta[k] * static_cast<double>(x[k]);
  return std::exp(s);
}

// Depth-first walk over (letter, step) sequences of length n. visit(weight,
// letters, steps, endpoint) is called for every sequence of positive weight,
// where weight = prod U(letter) Qbar(step | letter) * factor(letter, step, x).
template <class Factor, class Visit>
void for_each_decomposed_path(const TiltParams& tp, const EpsilonLaw& eps, int n, Factor&& factor, Visit&& visit) {
  const int d = tp.dimension;
  const int nd = num_directions(d);
  const double total = std::pow(static_cast<double>(nd + 1) * nd, n);
  if (total > 1e8) throw BudgetError("(letter, step) enumeration exceeds the budget of 1e8 sequences");

  std::vector<std::vector<double>> step_law(static_cast<std::size_t>(nd + 1));
  for (int s = 0; s <= nd; ++s) step_law[static_cast<std::size_t>(s)] = conditional_step_distribution(tp, eps, Symbol(s));

  std::vector<Symbol> letters(static_cast<std::size_t>(n));
  std::vector<Direction> steps(static_cast<std::size_t>(n));
  Site x = origin(d);
  auto rec = [&](auto&& self, int j, double weight) -> void {
    if (j == n) {
      visit(weight, letters, steps, static_cast<const Site&>(x));
      return;
    }
    for (int s = 0; s <= nd; ++s) {
      const Symbol letter(s);
      for (int k = 0; k < nd; ++k) {
        const Direction e(k);
        const double q = step_law[static_cast<std::size_t>(s)][static_cast<std::size_t>(k)];
        if (q == 0.0) continue;
        const double w = weight * eps.probability(letter) * q * factor(letter, e, x);
        letters[static_cast<std::size_t>(j)] = letter;
        steps[static_cast<std::size_t>(j)] = e;
        advance(x, e);
        self(self, j + 1, w);
        advance(x, e, -1);
      }
    }
  };
  rec(rec, 0, 1.0);
}

}  // namespace

EpsilonLaw::EpsilonLaw(const TiltParams& tp, double kbar) : dimension_(tp.dimension), kbar_(kbar) {
  if (!(kbar_ > 0.0)) throw std::invalid_argument("kbar must be positive");
  if (!(kbar_ < tp.c_z)) throw std::invalid_argument("kbar must be strictly below min_e u(e)");
  if (!(num_directions(dimension_) * kbar_ < 1.0)) throw std::invalid_argument("2d kbar must be below 1");
}

EpsilonLaw::EpsilonLaw(int dimension, double kbar) : dimension_(dimension), kbar_(kbar) {
  check_dimension(dimension_);
  if (!(kbar_ > 0.0)) throw std::invalid_argument("kbar must be positive");
  if (!(num_directions(dimension_) * kbar_ < 1.0)) throw std::invalid_argument("2d kbar must be below 1");
}

EpsilonLaw EpsilonLaw::alphabet_only(int dimension, double kbar) { return EpsilonLaw(dimension, kbar); }

double EpsilonLaw::default_kbar(const TiltParams& tp) {
  return std::min(1.0 / (4.0 * tp.dimension), 0.5 * tp.c_z);
}

EpsilonLaw EpsilonLaw::with_default(const TiltParams& tp) { return EpsilonLaw(tp, default_kbar(tp)); }

Symbol EpsilonLaw::sample(Engine& g) const {
  const double u = uniform01(g);
  const int nd = num_directions(dimension_);
  if (u < nd * kbar_) {
    return Symbol(std::min(static_cast<int>(u / kbar_), nd - 1));
  }
  return Symbol::free(dimension_);
}

void StoppingConfig::validate(const TiltParams& tp) const {
  if (L < 1) throw std::invalid_argument("block length L must be >= 1");
  if (ell.axis() >= tp.dimension) throw std::invalid_argument("ray direction outside the lattice dimension");
  if (!(dot(tp.z, ell) > 0.0)) throw std::invalid_argument("ray direction must satisfy <z, ell> > 0");
}

std::vector<double> conditional_step_distribution(const TiltParams& tp, const EpsilonLaw& eps, Symbol letter) {
  const int nd = num_directions(tp.dimension);
  std::vector<double> out(static_cast<std::size_t>(nd), 0.0);
  if (letter.is_free(tp.dimension)) {
    for (int k = 0; k < nd; ++k) {
      out[static_cast<std::size_t>(k)] = (tp.u[static_cast<std::size_t>(k)] - eps.kbar()) / eps.free_mass();
    }
  } else {
    out[static_cast<std::size_t>(letter.value())] = 1.0;
  }
  return out;
}

Direction conditional_step(const TiltParams& tp, const EpsilonLaw& eps, Symbol letter, Engine& g) {
  if (!letter.is_free(tp.dimension)) return letter.direction();
  const int nd = num_directions(tp.dimension);
  // Cumulative of u(e) - kbar, drawn against its exact total.
  const double target = uniform01(g) * eps.free_mass();
  double c = 0.0;
  for (int k = 0; k + 1 < nd; ++k) {
    c += tp.u[static_cast<std::size_t>(k)] - eps.kbar();
    if (target < c) return Direction(k);
  }
  return Direction(nd - 1);
}

std::int64_t sample_tau(const EpsilonLaw& eps, const StoppingConfig& cfg, Engine& g, std::int64_t horizon_cap) {
  const Symbol target = Symbol::forcing(cfg.ell);
  int run = 0;
  for (std::int64_t j = 1; j <= horizon_cap; ++j) {
    if (eps.sample(g) == target) {
      if (++run == cfg.L) return j;
    } else {
      run = 0;
    }
  }
  throw BudgetError("no run of " + std::to_string(cfg.L) + " forcing letters within " + std::to_string(horizon_cap) +
                    " letters; kbar^L is too small for this horizon");
}

std::vector<std::int64_t> sample_stopping_times(const EpsilonLaw& eps, const StoppingConfig& cfg, Engine& g, int count,
                                                std::int64_t horizon_cap) {
  std::vector<std::int64_t> out;
  std::int64_t t = 0;
  for (int i = 0; i < count; ++i) {
    t += sample_tau(eps, cfg, g, horizon_cap);
    out.push_back(t);
  }
  return out;
}

double expected_tau(double kbar, int L) {
  if (!(kbar > 0.0 && kbar < 1.0)) throw std::invalid_argument("kbar must lie in (0, 1)");
  if (L < 1) throw std::invalid_argument("L must be at least 1");
  return (std::pow(kbar, -L) - 1.0) / (1.0 - kbar);
}

double expected_tau(const EpsilonLaw& eps, const StoppingConfig& cfg) { return expected_tau(eps.kbar(), cfg.L); }

double psi_factor(const TiltParams& tp, const EpsilonLaw& eps, Symbol letter, Direction step, double xi_value) {
  const double denom = tp.step(step) - eps.kbar();
  if (!(denom > 0.0)) throw std::domain_error("u(step) - kbar must be positive");
  if (letter.is_free(tp.dimension)) return xi_value + eps.kbar() / denom * (xi_value - 1.0);
  return letter.direction() == step ? 1.0 : 0.0;
}

double psi_factor(const TiltParams& tp, const EpsilonLaw& eps, const Environment& env, Symbol letter,
                  const Site& position, Direction step) {
  return psi_factor(tp, eps, letter, step, xi(env, position, step));
}

IdentitySides verify_psi_identity(const TiltParams& tp, const EpsilonLaw& eps, const Environment& env,
                                  const std::vector<double>& theta, int n) {
  const int d = tp.dimension;
  IdentitySides out;
  for_each_decomposed_path(
      tp, eps, n,
      [&](Symbol letter, Direction e, const Site& x) { return psi_factor(tp, eps, env, letter, x, e); },
      [&](double w, const auto&, const auto&, const Site& end) { out.lhs += w * tilted_weight(theta, end); });

  for_each_path(n, d, [&](std::span<const Direction> steps, const Site& end) {
    Site x = origin(d);
    double w = tilted_weight(theta, end);
    for (auto e : steps) {
      w *= tp.step(e) * xi(env, x, e);
      advance(x, e);
    }
    out.rhs += w;
  });
  return out;
}

std::map<Site, double> decomposed_endpoint_distribution(const TiltParams& tp, const EpsilonLaw& eps, int n) {
  std::map<Site, double> out;
  for_each_decomposed_path(
      tp, eps, n, [](Symbol, Direction, const Site&) { return 1.0; },
      [&](double w, const auto&, const auto&, const Site& end) { out[end] += w; });
  return out;
}

std::map<Site, double> qwalk_endpoint_distribution(const TiltParams& tp, int n) {
  std::map<Site, double> out;
  for_each_path(n, tp.dimension, [&](std::span<const Direction> steps, const Site& end) {
    double w = 1.0;
    for (auto e : steps) w *= tp.step(e);
    out[end] += w;
  });
  return out;
}

double annealed_free_factor(const TiltParams& tp, const EpsilonLaw& eps, const EnvironmentLaw& law, Direction ell) {
  const double mean_xi = law.expect_site([&](const SiteVector& v) { return v[ell] / law.mean(ell); });
  return psi_factor(tp, eps, Symbol::free(tp.dimension), ell, mean_xi);
}

BlockSample sample_ray_block(const TiltParams& tp, const EpsilonLaw& eps, const StoppingConfig& cfg,
                             const Environment& env, Mode mode, Engine& g, std::int64_t horizon_cap) {
  cfg.validate(tp);
  const int d = tp.dimension;
  double free_factor = 0.0;
  if (mode == Mode::Annealed) {
    if (!env.law().is_iid()) {
      throw std::logic_error("exact annealed ray factors need an i.i.d. law; average quenched blocks over environments");
    }
    free_factor = annealed_free_factor(tp, eps, env.law(), cfg.ell);
  }
  const Symbol target = Symbol::forcing(cfg.ell);
  BlockSample block;
  block.path.start = origin(d);
  block.on_ray = true;
  double product = 1.0;
  Site x = origin(d);
  int run = 0;
  for (std::int64_t j = 1; j <= horizon_cap; ++j) {
    const Symbol letter = eps.sample(g);
    const Direction step = conditional_step(tp, eps, letter, g);
    block.epsilon.push_back(letter);
    block.path.steps.push_back(step);
    if (block.on_ray) {
      if (step != cfg.ell) {
        block.on_ray = false;
      } else if (mode == Mode::Quenched) {
        product *= psi_factor(tp, eps, env, letter, x, step);
      } else if (letter.is_free(d)) {
        product *= free_factor;
      }
    }
    advance(x, step);
    run = letter == target ? run + 1 : 0;
    if (run == cfg.L) {
      block.tau1 = j;
      block.psi_product = block.on_ray ? product : 0.0;
      return block;
    }
  }
  throw BudgetError("ray block exceeded the horizon of " + std::to_string(horizon_cap) + " letters");
}

}  // namespace rwre
