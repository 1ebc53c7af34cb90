#include "rwre/ldp.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <numeric>
#include <optional>
#include <tuple>
#include <stdexcept>

#include "rwre/log_sum.hpp"
#include "rwre/parallel.hpp"
#include "rwre/walk.hpp"

namespace rwre {

namespace {

constexpr double kGolden = 0.6180339887498949;
constexpr std::uint64_t kEnvStreams = 0xE7A1'0000'0000'0000ULL;

// ---------------------------------------------------------------------------
// Tilted path samples shared by every theta (common random numbers).

struct TiltedSample {
  Site end;
  double log_xi = 0.0;  // log of E prod xi (annealed) or prod xi (quenched)
};

std::vector<double> step_cumulative(const TiltParams& tp) {
  std::vector<double> c(tp.u.size());
  std::partial_sum(tp.u.begin(), tp.u.end(), c.begin());
  return c;
}

std::vector<Direction> sample_qwalk(const std::vector<double>& cumulative, int n, Engine& g) {
  std::vector<Direction> steps(static_cast<std::size_t>(n));
  for (auto& s : steps) s = Direction(pick(cumulative, uniform01(g)));
  return steps;
}

Site endpoint(int d, std::span<const Direction> steps) {
  Site x = origin(d);
  for (auto e : steps) advance(x, e);
  return x;
}

double log_xi_product(const Environment& env, std::span<const Direction> steps) {
  Site x = origin(env.dimension());
  double s = 0.0;
  for (auto e : steps) {
    s += std::log(xi(env, x, e));
    advance(x, e);
  }
  return s;
}

// log E prod xi for an i.i.d. law: steps grouped by site via packed keys.
class IidXiMoments {
 public:
  IidXiMoments(const EnvironmentLaw& law) : law_(law), d_(law.dimension()) {
    const auto& atoms = law.iid().atoms;
    for (const auto& a : atoms) {
      std::vector<double> lr;
      for (auto e : all_directions(d_)) lr.push_back(std::log(a[e]) - std::log(law.mean(e)));
      log_ratio_.push_back(std::move(lr));
    }
  }

  double log_moment(std::span<const Direction> steps) const {
    const auto n = static_cast<std::int64_t>(steps.size());
    const int nd = num_directions(d_);
    const double width = 2.0 * static_cast<double>(n) + 1.0;
    if (std::pow(width, d_) * nd > 9e18) return log_annealed_path_weight_xi(steps);
    std::vector<std::uint64_t> keys;
    keys.reserve(steps.size());
    Site x = origin(d_);
    for (auto e : steps) {
      std::uint64_t key = 0;
      for (int k = d_ - 1; k >= 0; --k) {
        key = key * static_cast<std::uint64_t>(2 * n + 1) + static_cast<std::uint64_t>(x[static_cast<std::size_t>(k)] + n);
      }
      keys.push_back(key * static_cast<std::uint64_t>(nd) + static_cast<std::uint64_t>(e.index()));
      advance(x, e);
    }
    std::sort(keys.begin(), keys.end());
    double total = 0.0;
    std::vector<int> counts(static_cast<std::size_t>(nd), 0);
    std::size_t i = 0;
    while (i < keys.size()) {
      const std::uint64_t site = keys[i] / static_cast<std::uint64_t>(nd);
      std::fill(counts.begin(), counts.end(), 0);
      while (i < keys.size() && keys[i] / static_cast<std::uint64_t>(nd) == site) {
        ++counts[static_cast<std::size_t>(keys[i] % static_cast<std::uint64_t>(nd))];
        ++i;
      }
      total += log_site(counts);
    }
    return total;
  }

 private:
  double log_site(const std::vector<int>& counts) const {
    const auto& w = law_.iid().weights;
    double m = 0.0;
    for (std::size_t a = 0; a < w.size(); ++a) {
      if (w[a] == 0.0) continue;
      double s = 0.0;
      for (std::size_t k = 0; k < counts.size(); ++k) s += counts[k] * log_ratio_[a][k];
      m += w[a] * std::exp(s);
    }
    return std::log(m);
  }

  double log_annealed_path_weight_xi(std::span<const Direction> steps) const {
    double s = log_annealed_path_weight(law_, steps);
    for (auto e : steps) s -= std::log(law_.mean(e));
    return s;
  }

  const EnvironmentLaw& law_;
  int d_;
  std::vector<std::vector<double>> log_ratio_;
};

std::vector<TiltedSample> tilted_samples_annealed(const LawPtr& law, const TiltParams& tp, int n,
                                                  std::int64_t replicas, std::uint64_t seed, int threads) {
  const int d = tp.dimension;
  const auto cumulative = step_cumulative(tp);
  std::vector<TiltedSample> out(static_cast<std::size_t>(replicas));
  if (law->is_iid()) {
    const IidXiMoments moments(*law);
    parallel_for(out.size(), threads, [&](std::size_t r) {
      Engine g = make_engine(seed, r);
      const auto steps = sample_qwalk(cumulative, n, g);
      out[r] = {endpoint(d, steps), moments.log_moment(steps)};
    });
  } else {
    const Box region = Box::centered(d, n);
    parallel_for(out.size(), threads, [&](std::size_t r) {
      Engine g = make_engine(seed, r);
      const auto steps = sample_qwalk(cumulative, n, g);
      const auto env = sample_environment(law, stream_seed(seed, kEnvStreams + r), region);
      out[r] = {endpoint(d, steps), log_xi_product(env, steps)};
    });
  }
  return out;
}

std::vector<TiltedSample> tilted_samples_quenched(const Environment& env, const TiltParams& tp, int n,
                                                  std::int64_t replicas, std::uint64_t seed, int threads) {
  const int d = tp.dimension;
  const auto cumulative = step_cumulative(tp);
  std::vector<TiltedSample> out(static_cast<std::size_t>(replicas));
  parallel_for(out.size(), threads, [&](std::size_t r) {
    Engine g = make_engine(seed, r);
    const auto steps = sample_qwalk(cumulative, n, g);
    out[r] = {endpoint(d, steps), log_xi_product(env, steps)};
  });
  return out;
}

double site_dot(const std::vector<double>& theta, const Site& x) {
  double s = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) s += theta[k] * static_cast<double>(x[k]);
  return s;
}

FreeEnergyEstimate evaluate_samples(const std::vector<TiltedSample>& samples, const std::vector<double>& theta, int n,
                                    Mode mode) {
  std::vector<double> lw(samples.size());
  for (std::size_t r = 0; r < samples.size(); ++r) lw[r] = site_dot(theta, samples[r].end) + samples[r].log_xi;
  FreeEnergyEstimate est;
  est.theta = theta;
  est.horizon = n;
  est.mode = mode;
  est.replicas = static_cast<std::int64_t>(samples.size());
  const double total = log_sum_exp(lw);
  est.value = (total - std::log(static_cast<double>(samples.size()))) / n;
  est.std_error = jackknife_log_mean_error(lw) / n;
  std::vector<double> doubled(lw.size());
  std::transform(lw.begin(), lw.end(), doubled.begin(), [](double v) { return 2.0 * v; });
  est.ess = std::exp(2.0 * total - log_sum_exp(doubled));
  est.degenerate = est.ess < 10.0;
  return est;
}

void check_free_energy_inputs(const TiltParams& tp, const std::vector<double>& theta, const FreeEnergyOptions& o) {
  if (o.horizon < 1) throw std::invalid_argument("horizon must be >= 1");
  if (o.replicas < 2) throw std::invalid_argument("need at least 2 replicas");
  if (static_cast<int>(theta.size()) != tp.dimension) throw std::invalid_argument("theta dimension mismatch");
}

// ---------------------------------------------------------------------------
// Legendre helpers

double golden_section_max(const std::function<double(double)>& f, double a, double b, double tol = 1e-10) {
  double c = b - kGolden * (b - a);
  double d = a + kGolden * (b - a);
  double fc = f(c);
  double fd = f(d);
  while (b - a > tol) {
    if (fc > fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - kGolden * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + kGolden * (b - a);
      fd = f(d);
    }
  }
  return 0.5 * (a + b);
}

double inner(const std::vector<double>& a, const std::vector<double>& b) {
  return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

LegendreResult finish_legendre(double value, std::vector<double> argmax, double tolerance) {
  LegendreResult r;
  r.unclipped = value;
  r.argmax = std::move(argmax);
  if (value < 0.0) {
    if (value < -tolerance) {
      r.clipped = true;
      std::cerr << "warning: convex conjugate " << value << " is below zero; clipped\n";
    }
    value = 0.0;
  }
  r.value = value;
  return r;
}

// ---------------------------------------------------------------------------
// Ray machinery

struct GroupEval {
  double annealed = 0.0;
  double quenched = 0.0;
  std::int64_t on_ray = 0;
};

struct GroupState {
  Engine engine;
  RayBlockSet blocks;
  GroupEval previous;
  GroupEval current;
};

// Corrected log of the mean of values[0..K) (only nonzero entries are given).
double corrected_log_mean(double sum, double sum_sq, std::int64_t k) {
  if (!(sum > 0.0)) {
    throw std::runtime_error("inner ray expectation underflowed to zero; increase block replicas");
  }
  const double kk = static_cast<double>(k);
  const double mean = sum / kk;
  const double var = k > 1 ? std::max(0.0, (sum_sq - kk * mean * mean) / (kk - 1.0)) : 0.0;
  return std::log(mean) + var / (2.0 * kk * mean * mean);
}

std::vector<double> ray_free_factors(const TiltParams& tp, const EpsilonLaw& eps, const StoppingConfig& cfg,
                                     const Environment& env, std::int64_t length) {
  std::vector<double> f(static_cast<std::size_t>(length) + 1, 0.0);
  const Symbol free = Symbol::free(tp.dimension);
  Site x = origin(tp.dimension);
  for (std::int64_t j = 1; j <= length; ++j) {
    f[static_cast<std::size_t>(j)] = psi_factor(tp, eps, env, free, x, cfg.ell);
    advance(x, cfg.ell);
  }
  return f;
}

class RayExperiment {
 public:
  RayExperiment(const TiltParams& tp, const EpsilonLaw& eps, const StoppingConfig& cfg, const LawPtr& law,
                const RayOptions& options)
      : tp_(tp), eps_(eps), cfg_(cfg), law_(law), options_(options) {
    cfg_.validate(tp_);
    if (options_.block_replicas < 2) throw std::invalid_argument("need at least 2 block replicas");
    if (options_.groups < 2) throw std::invalid_argument("need at least 2 groups");
    horizon_ = options_.horizon > 0 ? options_.horizon : default_ray_horizon(eps_, cfg_);
    envs_per_group_ = std::max<std::int64_t>(1, (options_.env_replicas + options_.groups - 1) / options_.groups);
    if (law_->is_iid()) annealed_factor_ = annealed_free_factor(tp_, eps_, *law_, cfg_.ell);
  }

  std::int64_t horizon() const { return horizon_; }
  std::int64_t envs_per_group() const { return envs_per_group_; }
  std::int64_t blocks_per_group() const { return options_.block_replicas << level_; }
  int level() const { return level_; }
  const std::vector<GroupState>& groups() const { return groups_; }

  /// Brings the experiment to `count` groups at the current level.
  void grow_to(int count) {
    const auto first = groups_.size();
    for (auto g = first; g < static_cast<std::size_t>(count); ++g) {
      groups_.push_back({make_engine(options_.seed, 2 * g), {}, {}, {}});
    }
    parallel_for(groups_.size() - first, options_.threads, [&](std::size_t i) {
      const auto g = first + i;
      auto& s = groups_[g];
      const std::int64_t k = blocks_per_group();
      extend(s, k);
      s.previous = level_ > 0 ? evaluate(g, s, k / 2) : GroupEval{};
      s.current = evaluate(g, s, k);
    });
  }

  /// Doubles the number of blocks in every group.
  void double_blocks() {
    ++level_;
    const std::int64_t k = blocks_per_group();
    parallel_for(groups_.size(), options_.threads, [&](std::size_t g) {
      auto& s = groups_[g];
      extend(s, k);
      s.previous = s.current;
      s.current = evaluate(g, s, k);
    });
  }

  // Per-group gap values (in log units, not yet divided by E tau).
  static std::pair<double, double> mean_and_error(const std::vector<double>& v) {
    const double n = static_cast<double>(v.size());
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= n;
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    return {mean, std::sqrt(ss / (n - 1.0) / n)};
  }

 private:
  void extend(GroupState& s, std::int64_t k) {
    if (s.blocks.blocks >= k) return;
    auto more = sample_ray_blocks(tp_, eps_, cfg_, k - s.blocks.blocks, horizon_, s.engine);
    for (auto& b : more.on_ray) {
      b.index += s.blocks.blocks;
      s.blocks.on_ray.push_back(std::move(b));
    }
    s.blocks.blocks = k;
  }

  GroupEval evaluate(std::size_t group, const GroupState& s, std::int64_t k) const {
    std::vector<const OnRayBlock*> used;
    std::int64_t max_tau = 0;
    for (const auto& b : s.blocks.on_ray) {
      if (b.index < k) {
        used.push_back(&b);
        max_tau = std::max(max_tau, b.tau);
      }
    }
    GroupEval out;
    out.on_ray = static_cast<std::int64_t>(used.size());

    const auto m = envs_per_group_;
    std::vector<std::vector<double>> factors;
    factors.reserve(static_cast<std::size_t>(m));
    const Box region = Box::ray(tp_.dimension, cfg_.ell, std::max<std::int64_t>(max_tau, 1));
    for (std::int64_t i = 0; i < m; ++i) {
      const auto seed = stream_seed(options_.seed, kEnvStreams + static_cast<std::uint64_t>(group) * 1'000'003ULL +
                                                        static_cast<std::uint64_t>(i));
      const auto env = sample_environment(law_, seed, region);
      factors.push_back(ray_free_factors(tp_, eps_, cfg_, env, max_tau));
    }

    // Per block: quenched value in every environment, annealed value.
    std::vector<double> q_sum(static_cast<std::size_t>(m), 0.0);
    std::vector<double> q_sq(static_cast<std::size_t>(m), 0.0);
    double a_sum = 0.0;
    double a_sq = 0.0;
    for (const auto* b : used) {
      double a = 0.0;
      for (std::int64_t i = 0; i < m; ++i) {
        const auto& f = factors[static_cast<std::size_t>(i)];
        double v = 1.0;
        for (auto j : b->free_steps) v *= f[static_cast<std::size_t>(j)];
        q_sum[static_cast<std::size_t>(i)] += v;
        q_sq[static_cast<std::size_t>(i)] += v * v;
        a += v;
      }
      if (law_->is_iid()) {
        a = 1.0;
        for (std::size_t c = 0; c < b->free_steps.size(); ++c) a *= annealed_factor_;
      } else {
        a /= static_cast<double>(m);
      }
      a_sum += a;
      a_sq += a * a;
    }
    out.annealed = corrected_log_mean(a_sum, a_sq, k);
    // Shifted mean: identical environments average to their common value exactly.
    const double q0 = corrected_log_mean(q_sum[0], q_sq[0], k);
    double dq = 0.0;
    for (std::int64_t i = 1; i < m; ++i) {
      dq += corrected_log_mean(q_sum[static_cast<std::size_t>(i)], q_sq[static_cast<std::size_t>(i)], k) - q0;
    }
    out.quenched = q0 + dq / static_cast<double>(m);
    return out;
  }

  TiltParams tp_;
  EpsilonLaw eps_;
  StoppingConfig cfg_;
  LawPtr law_;
  RayOptions options_;
  std::int64_t horizon_ = 0;
  std::int64_t envs_per_group_ = 0;
  double annealed_factor_ = 1.0;
  int level_ = 0;
  std::vector<GroupState> groups_;
};

struct Aggregate {
  double annealed = 0.0, annealed_se = 0.0;
  double quenched = 0.0, quenched_se = 0.0;
  double gap = 0.0, gap_se = 0.0;
  double previous_gap = 0.0;
};

Aggregate aggregate(const RayExperiment& ex, double tau) {
  std::vector<double> a, q, gap, prev;
  for (const auto& s : ex.groups()) {
    a.push_back(s.current.annealed / tau);
    q.push_back(s.current.quenched / tau);
    gap.push_back((s.current.annealed - s.current.quenched) / tau);
    prev.push_back((s.previous.annealed - s.previous.quenched) / tau);
  }
  Aggregate out;
  std::tie(out.annealed, out.annealed_se) = RayExperiment::mean_and_error(a);
  std::tie(out.quenched, out.quenched_se) = RayExperiment::mean_and_error(q);
  std::tie(out.gap, out.gap_se) = RayExperiment::mean_and_error(gap);
  out.previous_gap = RayExperiment::mean_and_error(prev).first;
  return out;
}

// Doubles the inner replicas until the gap moves by less than half a standard
// error (or the doubling budget is spent); returns the final aggregate.
Aggregate converge_inner(RayExperiment& ex, double tau, int max_doublings) {
  if (ex.level() == 0) ex.double_blocks();
  auto agg = aggregate(ex, tau);
  while (std::abs(agg.gap - agg.previous_gap) >= 0.5 * agg.gap_se && ex.level() < max_doublings &&
         !(agg.gap_se == 0.0 && agg.gap == agg.previous_gap)) {
    ex.double_blocks();
    agg = aggregate(ex, tau);
  }
  return agg;
}

// Lattice point nearest to n x with the parity of n, when n x is (within
// 1e-9) already such a point.
std::optional<Site> exact_target(const std::vector<double>& x, int n) {
  Site t(x.size());
  std::int64_t l1 = 0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double v = x[k] * n;
    const double r = std::round(v);
    if (std::abs(v - r) > 1e-9) return std::nullopt;
    t[k] = static_cast<std::int64_t>(r);
    l1 += std::abs(t[k]);
  }
  if (l1 > n || (n - l1) % 2 != 0) return std::nullopt;
  return t;
}

// Two admissible horizons n1 > n2 (n2 <= n1/2 when possible) at most `cap`.
std::pair<int, int> richardson_horizons(const std::vector<double>& x, int cap) {
  int n1 = 0;
  for (int n = cap; n >= 1; --n) {
    if (exact_target(x, n)) {
      n1 = n;
      break;
    }
  }
  if (n1 == 0) {
    throw std::domain_error("x * N is not a reachable lattice point for any N <= " + std::to_string(cap));
  }
  int n2 = 0;
  for (int n = n1 / 2; n >= 1; --n) {
    if (exact_target(x, n)) {
      n2 = n;
      break;
    }
  }
  return {n1, n2};
}

// First-order extrapolation in 1/N of rates I(n1), I(n2).
double richardson(int n1, double i1, int n2, double i2) {
  if (n2 == 0) return i1;
  return (n1 * i1 - n2 * i2) / static_cast<double>(n1 - n2);
}

bool is_lattice_direction(const std::vector<double>& x, Direction& out) {
  for (int k = 0; k < static_cast<int>(x.size()); ++k) {
    const double v = x[static_cast<std::size_t>(k)];
    if (std::abs(std::abs(v) - 1.0) <= 1e-12) {
      out = v > 0 ? Direction::positive(k) : Direction::negative(k);
      return true;
    }
  }
  return false;
}

std::pair<double, double> mean_and_error(const std::vector<double>& v) {
  const double n = static_cast<double>(v.size());
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
  if (v.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / (n - 1.0) / n)};
}

}  // namespace

// ---------------------------------------------------------------------------

double jackknife_log_mean_error(std::span<const double> log_weights) {
  const std::size_t r = log_weights.size();
  if (r < 2) return 0.0;
  const double shift = *std::max_element(log_weights.begin(), log_weights.end());
  std::vector<double> w(r);
  for (std::size_t i = 0; i < r; ++i) w[i] = std::exp(log_weights[i] - shift);
  std::vector<double> prefix(r + 1, 0.0);
  std::vector<double> suffix(r + 1, 0.0);
  for (std::size_t i = 0; i < r; ++i) prefix[i + 1] = prefix[i] + w[i];
  for (std::size_t i = r; i-- > 0;) suffix[i] = suffix[i + 1] + w[i];
  std::vector<double> loo(r);
  double mean = 0.0;
  for (std::size_t i = 0; i < r; ++i) {
    const double rest = prefix[i] + suffix[i + 1];
    loo[i] = rest > 0.0 ? std::log(rest / static_cast<double>(r - 1)) : kNegInf;
    mean += loo[i];
  }
  mean /= static_cast<double>(r);
  if (!std::isfinite(mean)) return std::numeric_limits<double>::infinity();
  double ss = 0.0;
  for (double v : loo) ss += (v - mean) * (v - mean);
  return std::sqrt(ss * static_cast<double>(r - 1) / static_cast<double>(r));
}

FreeEnergyEstimate estimate_free_energy(const LawPtr& law, const TiltParams& tp, const std::vector<double>& theta,
                                        const FreeEnergyOptions& options) {
  check_free_energy_inputs(tp, theta, options);
  const auto samples = tilted_samples_annealed(law, tp, options.horizon, options.replicas, options.seed, options.threads);
  return evaluate_samples(samples, theta, options.horizon, Mode::Annealed);
}

FreeEnergyEstimate estimate_free_energy(const Environment& env, const TiltParams& tp, const std::vector<double>& theta,
                                        const FreeEnergyOptions& options) {
  check_free_energy_inputs(tp, theta, options);
  const auto samples = tilted_samples_quenched(env, tp, options.horizon, options.replicas, options.seed, options.threads);
  return evaluate_samples(samples, theta, options.horizon, Mode::Quenched);
}

double exact_free_energy(const LawPtr& law, const TiltParams& tp, const std::vector<double>& theta, int n) {
  if (n < 1) throw std::invalid_argument("horizon must be >= 1");
  return std::log(verify_identity_annealed(law, tp, theta, n).lhs) / n;
}

double exact_free_energy(const Environment& env, const TiltParams& tp, const std::vector<double>& theta, int n) {
  if (n < 1) throw std::invalid_argument("horizon must be >= 1");
  return std::log(verify_identity_quenched(env, tp, theta, n).lhs) / n;
}

// ---------------------------------------------------------------------------

std::vector<std::vector<double>> ThetaGrid::points() const {
  std::vector<std::vector<double>> out{{}};
  for (int k = 0; k < dimension; ++k) {
    std::vector<std::vector<double>> next;
    for (const auto& p : out) {
      for (double v : nodes) {
        auto q = p;
        q.push_back(v);
        next.push_back(std::move(q));
      }
    }
    out = std::move(next);
  }
  return out;
}

ThetaGrid ThetaGrid::uniform(int dimension, double half_width, double step) {
  if (!(step > 0.0) || !(half_width > 0.0)) throw std::invalid_argument("grid width and step must be positive");
  const int half = static_cast<int>(std::llround(half_width / step));
  if (half < 1) throw std::invalid_argument("grid needs at least three nodes per axis");
  ThetaGrid g;
  g.dimension = dimension;
  for (int i = -half; i <= half; ++i) g.nodes.push_back(i * step);
  return g;
}

LegendreResult legendre_transform(const std::function<double(const std::vector<double>&)>& lambda,
                                  const ThetaGrid& grid, const std::vector<double>& x, double tolerance) {
  if (static_cast<int>(x.size()) != grid.dimension) throw std::invalid_argument("x dimension mismatch");
  if (grid.nodes.size() < 3) throw std::invalid_argument("grid needs at least three nodes per axis");
  const auto objective = [&](const std::vector<double>& t) { return inner(t, x) - lambda(t); };

  double best = -std::numeric_limits<double>::infinity();
  std::vector<double> arg;
  for (const auto& p : grid.points()) {
    const double v = objective(p);
    if (v > best) {
      best = v;
      arg = p;
    }
  }
  for (double v : arg) {
    if (v == grid.nodes.front() || v == grid.nodes.back()) {
      throw std::domain_error("Legendre maximizer lies on the grid boundary; widen the theta grid");
    }
  }
  const double h = grid.nodes[1] - grid.nodes[0];
  for (int sweep = 0; sweep < 4; ++sweep) {
    for (int k = 0; k < grid.dimension; ++k) {
      auto t = arg;
      const double c = arg[static_cast<std::size_t>(k)];
      const auto along = [&](double s) {
        t[static_cast<std::size_t>(k)] = s;
        return objective(t);
      };
      const double s = golden_section_max(along, c - h, c + h);
      const double v = along(s);
      if (v > best) {
        best = v;
        arg[static_cast<std::size_t>(k)] = s;
      }
    }
  }
  return finish_legendre(best, std::move(arg), tolerance);
}

LegendreResult legendre_transform(const std::map<std::vector<double>, double>& samples, const std::vector<double>& x,
                                  double tolerance) {
  if (samples.empty()) throw std::invalid_argument("no free-energy samples");
  const auto d = x.size();
  std::vector<std::vector<double>> axes(d);
  for (const auto& [t, v] : samples) {
    if (t.size() != d) throw std::invalid_argument("sample dimension mismatch");
    for (std::size_t k = 0; k < d; ++k) axes[k].push_back(t[k]);
  }
  for (auto& a : axes) {
    std::sort(a.begin(), a.end());
    a.erase(std::unique(a.begin(), a.end()), a.end());
    if (a.size() < 3) throw std::invalid_argument("grid needs at least three nodes per axis");
  }

  double best = -std::numeric_limits<double>::infinity();
  std::vector<double> arg;
  for (const auto& [t, v] : samples) {
    const double g = inner(t, x) - v;
    if (g > best) {
      best = g;
      arg = t;
    }
  }
  for (std::size_t k = 0; k < d; ++k) {
    if (arg[k] == axes[k].front() || arg[k] == axes[k].back()) {
      throw std::domain_error("Legendre maximizer lies on the grid boundary; widen the theta grid");
    }
  }

  // Quadratic interpolant through the best node and its neighbours on each
  // axis; keep the axis with the largest improvement.
  double refined = best;
  std::vector<double> refined_arg = arg;
  for (std::size_t k = 0; k < d; ++k) {
    const auto& a = axes[k];
    const auto pos = static_cast<std::size_t>(std::lower_bound(a.begin(), a.end(), arg[k]) - a.begin());
    auto lo = arg;
    auto hi = arg;
    lo[k] = a[pos - 1];
    hi[k] = a[pos + 1];
    const auto it_lo = samples.find(lo);
    const auto it_hi = samples.find(hi);
    if (it_lo == samples.end() || it_hi == samples.end()) throw std::invalid_argument("samples do not form a regular grid");
    const double t0 = lo[k], t1 = arg[k], t2 = hi[k];
    const double g0 = inner(lo, x) - it_lo->second;
    const double g1 = best;
    const double g2 = inner(hi, x) - it_hi->second;
    const auto quad = [&](double t) {
      return g0 * (t - t1) * (t - t2) / ((t0 - t1) * (t0 - t2)) + g1 * (t - t0) * (t - t2) / ((t1 - t0) * (t1 - t2)) +
             g2 * (t - t0) * (t - t1) / ((t2 - t0) * (t2 - t1));
    };
    const double s = golden_section_max(quad, t0, t2);
    const double v = quad(s);
    if (v > refined) {
      refined = v;
      refined_arg = arg;
      refined_arg[k] = s;
    }
  }
  return finish_legendre(refined, std::move(refined_arg), tolerance);
}

// ---------------------------------------------------------------------------

double ray_tilt_constant(const TiltParams& tp, Direction ell) { return std::log(tp.D) + tp.theta_dot(ell); }

std::int64_t default_ray_horizon(const EpsilonLaw& eps, const StoppingConfig& cfg) {
  return static_cast<std::int64_t>(std::ceil(expected_tau(eps, cfg) / 1e-4));
}

std::int64_t RayBlockSet::max_tau() const {
  std::int64_t m = 0;
  for (const auto& b : on_ray) m = std::max(m, b.tau);
  return m;
}

RayBlockSet sample_ray_blocks(const TiltParams& tp, const EpsilonLaw& eps, const StoppingConfig& cfg,
                              std::int64_t count, std::int64_t horizon, Engine& g) {
  cfg.validate(tp);
  if (horizon < 1) throw std::invalid_argument("ray horizon must be >= 1");
  const int d = tp.dimension;
  const Symbol target = Symbol::forcing(cfg.ell);
  RayBlockSet out;
  out.blocks = count;
  for (std::int64_t b = 0; b < count; ++b) {
    OnRayBlock block;
    block.index = b;
    int run = 0;
    for (std::int64_t j = 1;; ++j) {
      if (j > horizon) break;
      const Symbol letter = eps.sample(g);
      if (letter.is_free(d)) {
        if (conditional_step(tp, eps, letter, g) != cfg.ell) break;
        block.free_steps.push_back(static_cast<std::int32_t>(j));
        run = 0;
      } else if (letter == target) {
        if (++run == cfg.L) {
          block.tau = j;
          out.on_ray.push_back(std::move(block));
          break;
        }
      } else {
        break;
      }
    }
  }
  return out;
}

double ray_block_expectation(const TiltParams& tp, const EpsilonLaw& eps, const StoppingConfig& cfg,
                             std::span<const double> free_factors) {
  cfg.validate(tp);
  const double k = eps.kbar();
  const double free_weight = tp.step(cfg.ell) - k;
  std::vector<double> mass(static_cast<std::size_t>(cfg.L), 0.0);
  std::vector<double> next(mass.size());
  mass[0] = 1.0;
  double total = 0.0;
  for (double f : free_factors) {
    std::fill(next.begin(), next.end(), 0.0);
    double reset = 0.0;
    for (int r = 0; r < cfg.L; ++r) {
      const double p = mass[static_cast<std::size_t>(r)];
      if (p == 0.0) continue;
      if (r + 1 == cfg.L) {
        total += p * k;
      } else {
        next[static_cast<std::size_t>(r + 1)] += p * k;
      }
      reset += p;
    }
    next[0] += reset * free_weight * f;
    mass.swap(next);
  }
  return total;
}

namespace {

// Both bounds come from one experiment so that they share blocks, horizon and
// bias correction with certify_gap.
BoundEstimate ray_bound(const TiltParams& tp, const EpsilonLaw& eps, const StoppingConfig& cfg, const LawPtr& law,
                        const RayOptions& options, bool quenched) {
  RayExperiment ex(tp, eps, cfg, law, options);
  const double tau = expected_tau(eps, cfg);
  ex.grow_to(options.groups);
  const auto agg = converge_inner(ex, tau, options.max_doublings);
  BoundEstimate out;
  out.W = ray_tilt_constant(tp, cfg.ell);
  out.expected_tau = tau;
  out.horizon = ex.horizon();
  out.blocks = ex.blocks_per_group() * options.groups;
  for (const auto& s : ex.groups()) out.on_ray_blocks += s.current.on_ray;
  if (out.on_ray_blocks == 0) throw std::runtime_error("every sampled block left the ray; increase block replicas");
  out.side = quenched ? agg.quenched : agg.annealed;
  out.std_error = quenched ? agg.quenched_se : agg.annealed_se;
  if (!std::isfinite(out.side)) {
    throw std::runtime_error("a group has no on-ray block, so its inner mean is zero; increase block replicas");
  }
  out.value = out.W - out.side;
  return out;
}

}  // namespace

BoundEstimate bound_Ia(const TiltParams& tp, const EpsilonLaw& eps, const StoppingConfig& cfg, const LawPtr& law,
                       const RayOptions& options) {
  return ray_bound(tp, eps, cfg, law, options, false);
}

BoundEstimate bound_Iq(const TiltParams& tp, const EpsilonLaw& eps, const StoppingConfig& cfg, const LawPtr& law,
                       const RayOptions& options) {
  return ray_bound(tp, eps, cfg, law, options, true);
}

std::string to_string(GapVerdict v) {
  switch (v) {
    case GapVerdict::Certified:
      return "certified";
    case GapVerdict::Refuted:
      return "refuted";
    case GapVerdict::Inconclusive:
      break;
  }
  return "inconclusive";
}

GapReport certify_gap(const TiltParams& tp, const EpsilonLaw& eps, const StoppingConfig& cfg, const LawPtr& law,
                      const GapBudget& budget) {
  if (cfg.L < 2) throw std::invalid_argument("gap certification needs block length L >= 2");
  RayExperiment ex(tp, eps, cfg, law, budget.ray);
  const double tau = expected_tau(eps, cfg);

  GapReport rep;
  rep.ell = cfg.ell;
  rep.L = cfg.L;
  rep.kbar = eps.kbar();
  rep.horizon = ex.horizon();
  rep.expected_tau = tau;
  rep.W = ray_tilt_constant(tp, cfg.ell);
  rep.disorder = disorder(*law);
  rep.envs_per_group = ex.envs_per_group();

  int groups = budget.ray.groups;
  ex.grow_to(groups);
  Aggregate agg = converge_inner(ex, tau, budget.ray.max_doublings);
  for (;;) {
    const double bias = std::abs(agg.gap - agg.previous_gap);
    const double se = agg.gap_se;
    double significance = 0.0;
    double upper = 0.0;
    if (se > 0.0) {
      significance = (agg.gap - bias) / se;
      upper = (agg.gap + bias) / se;
    } else if (agg.gap - bias != 0.0) {
      significance = agg.gap - bias > 0.0 ? std::numeric_limits<double>::max() : std::numeric_limits<double>::lowest();
      upper = agg.gap + bias > 0.0 ? std::numeric_limits<double>::max() : std::numeric_limits<double>::lowest();
    }
    rep.bias_bound = bias;
    rep.significance = significance;
    if (significance > budget.certify_threshold) {
      rep.verdict = GapVerdict::Certified;
      break;
    }
    if (upper < -budget.refute_threshold) {
      rep.verdict = GapVerdict::Refuted;
      break;
    }
    const bool exact_tie = se == 0.0 && agg.gap == 0.0;
    if (exact_tie || 2 * groups > budget.max_groups) {
      rep.verdict = GapVerdict::Inconclusive;
      break;
    }
    groups *= 2;
    ex.grow_to(groups);
    agg = aggregate(ex, tau);
  }

  rep.quenched_side = agg.quenched;
  rep.quenched_std_error = agg.quenched_se;
  rep.annealed_side = agg.annealed;
  rep.annealed_std_error = agg.annealed_se;
  rep.gap = agg.gap;
  rep.std_error = agg.gap_se;
  rep.bound_Ia = rep.W - rep.annealed_side;
  rep.bound_Iq = rep.W - rep.quenched_side;
  rep.ratio = rep.annealed_side != 0.0 ? rep.quenched_side / rep.annealed_side : 1.0;
  rep.groups = groups;
  rep.blocks_per_group = ex.blocks_per_group();
  for (const auto& s : ex.groups()) rep.trace.push_back({s.current.on_ray, s.current.annealed, s.current.quenched});
  return rep;
}

ExactRayGap exact_ray_gap(const TiltParams& tp, const EpsilonLaw& eps, const StoppingConfig& cfg,
                          const EnvironmentLaw& law, std::int64_t horizon) {
  if (!law.is_iid()) throw std::invalid_argument("exact ray enumeration needs an i.i.d. law");
  if (horizon < 1) throw std::invalid_argument("ray horizon must be >= 1");
  const auto& atoms = law.iid().atoms;
  const auto& weights = law.iid().weights;
  const auto q = atoms.size();
  const double configs = std::pow(static_cast<double>(q), static_cast<double>(horizon));
  if (configs > static_cast<double>(std::int64_t{1} << 22)) {
    throw BudgetError("ray configuration enumeration exceeds 2^22 configurations");
  }
  const Symbol free = Symbol::free(tp.dimension);
  std::vector<double> atom_factor(q);
  for (std::size_t a = 0; a < q; ++a) {
    atom_factor[a] = psi_factor(tp, eps, free, cfg.ell, atoms[a][cfg.ell] / law.mean(cfg.ell));
  }
  const double tau = expected_tau(eps, cfg);

  ExactRayGap out;
  out.configurations = static_cast<std::int64_t>(configs);
  std::vector<std::size_t> digits(static_cast<std::size_t>(horizon), 0);
  std::vector<double> factors(static_cast<std::size_t>(horizon));
  double e_log = 0.0;
  for (std::int64_t c = 0; c < out.configurations; ++c) {
    double w = 1.0;
    for (std::size_t j = 0; j < digits.size(); ++j) {
      w *= weights[digits[j]];
      factors[j] = atom_factor[digits[j]];
    }
    if (w > 0.0) e_log += w * std::log(ray_block_expectation(tp, eps, cfg, factors));
    for (std::size_t j = 0; j < digits.size(); ++j) {
      if (++digits[j] < q) break;
      digits[j] = 0;
    }
  }
  const double mean_factor = annealed_free_factor(tp, eps, law, cfg.ell);
  const std::vector<double> mean_factors(static_cast<std::size_t>(horizon), mean_factor);
  out.annealed_side = std::log(ray_block_expectation(tp, eps, cfg, mean_factors)) / tau;
  out.quenched_side = e_log / tau;
  out.gap = out.annealed_side - out.quenched_side;
  return out;
}

// ---------------------------------------------------------------------------

std::string to_string(RateMethod m) { return m == RateMethod::Enumeration ? "enumeration" : "tilted-mc"; }

void check_velocity(const std::vector<double>& x) {
  const double norm = l1_norm(x);
  if (!std::isfinite(norm) || norm > 1.0 + 1e-12) throw std::domain_error("velocity outside D (|x|_1 > 1)");
  Direction e;
  if (norm >= 1.0 - 1e-12 && !is_lattice_direction(x, e)) {
    throw std::domain_error("boundary velocity must be a lattice direction");
  }
}

RatePointEstimate rate_point(const LawPtr& law, const std::vector<double>& x, const RateOptions& options) {
  const int d = law->dimension();
  if (static_cast<int>(x.size()) != d) throw std::invalid_argument("velocity dimension mismatch");
  check_velocity(x);
  if (options.env_replicas < 1) throw std::invalid_argument("need at least one environment replica");

  RatePointEstimate out;
  out.x = x;
  out.method = options.method;
  const auto env_seed = [&](int i) { return stream_seed(options.seed, kEnvStreams + static_cast<std::uint64_t>(i)); };
  Direction ell;
  const bool boundary = l1_norm(x) >= 1.0 - 1e-12 && is_lattice_direction(x, ell);

  if (options.method == RateMethod::TiltedMC) {
    if (boundary) throw std::domain_error("tilted-MC needs an interior velocity; use enumeration on the boundary");
    const auto tp = solve_tilt(*law, x);
    const auto grid = ThetaGrid::uniform(d, options.grid_half_width, options.grid_step);
    const auto points = grid.points();
    const int n = options.mc_horizon;
    out.horizon = n;

    // Lambda(theta + theta_z) = Lambda-bar(theta) - log D on the shifted grid.
    const auto conjugate = [&](const std::vector<TiltedSample>& samples, double& se) {
      std::map<std::vector<double>, double> lambda;
      std::map<std::vector<double>, double> errors;
      for (const auto& t : points) {
        const auto est = evaluate_samples(samples, t, n, Mode::Annealed);
        std::vector<double> shifted(t);
        for (int k = 0; k < d; ++k) shifted[static_cast<std::size_t>(k)] += tp.theta[static_cast<std::size_t>(k)];
        lambda[shifted] = est.value - tp.log_D();
        errors[shifted] = est.std_error;
      }
      const auto r = legendre_transform(lambda, x);
      auto nearest = errors.begin();
      double dist = std::numeric_limits<double>::infinity();
      for (auto it = errors.begin(); it != errors.end(); ++it) {
        double s = 0.0;
        for (std::size_t k = 0; k < it->first.size(); ++k) s += std::abs(it->first[k] - r.argmax[k]);
        if (s < dist) {
          dist = s;
          nearest = it;
        }
      }
      se = nearest->second;
      return r.value;
    };

    const auto annealed = tilted_samples_annealed(law, tp, n, options.path_replicas, options.seed, options.threads);
    out.I_a = conjugate(annealed, out.std_error_a);

    std::vector<double> iq(static_cast<std::size_t>(options.env_replicas));
    std::vector<double> iq_se(iq.size());
    for (int i = 0; i < options.env_replicas; ++i) {
      const auto env = sample_environment(law, env_seed(i), Box::centered(d, n));
      const auto samples = tilted_samples_quenched(env, tp, n, options.path_replicas,
                                                   stream_seed(options.seed, static_cast<std::uint64_t>(i) + 1),
                                                   options.threads);
      iq[static_cast<std::size_t>(i)] = conjugate(samples, iq_se[static_cast<std::size_t>(i)]);
    }
    double spread = 0.0;
    std::tie(out.I_q, spread) = mean_and_error(iq);
    double mc = 0.0;
    for (double s : iq_se) mc += s * s;
    out.std_error_q = std::sqrt(spread * spread + mc / (static_cast<double>(iq.size()) * iq.size()));
    return out;
  }

  constexpr int kMatchedEnvReplicas = 4096;

  // Enumeration route: -(1/N) log of point probabilities, extrapolated in 1/N.
  // Interior annealed values under disorder need path enumeration, so both
  // rates then share its small horizons (where Jensen orders them exactly).
  const double dis = disorder(*law);
  const bool matched = !boundary && dis > 0.0;
  int cap = options.horizon;
  if (matched) {
    const int budget_cap = static_cast<int>(std::log(static_cast<double>(kEnumerationBudget)) / std::log(2.0 * d));
    cap = std::min(options.annealed_enumeration_horizon, budget_cap);
  }
  const auto [n1, n2] = richardson_horizons(x, cap);
  out.horizon = n1;
  const auto t1 = *exact_target(x, n1);
  const auto t2 = n2 > 0 ? exact_target(x, n2) : std::nullopt;

  const auto quenched_rate = [&](const Environment& env) {
    const double i1 = -log_quenched_point_probability(env, n1, t1) / n1;
    const double i2 = t2 ? -log_quenched_point_probability(env, n2, *t2) / n2 : 0.0;
    return richardson(n1, i1, n2, i2);
  };
  const Box region = boundary ? Box::ray(d, ell, n1) : Box::centered(d, n1);
  if (dis == 0.0) {
    SiteVector mean_vector(law->means());
    out.I_a = std::max(0.0, quenched_rate(Environment::constant(law, region, mean_vector)));
    out.I_q = out.I_a;
    return out;
  }
  // Small matched horizons make each quenched DP cheap; average over many more
  // environments than the long boundary runs can afford.
  const int replicas = matched ? std::max(options.env_replicas, kMatchedEnvReplicas) : options.env_replicas;
  std::vector<double> iq(static_cast<std::size_t>(replicas));
  parallel_for(iq.size(), options.threads, [&](std::size_t i) {
    iq[i] = quenched_rate(sample_environment(law, env_seed(static_cast<int>(i)), region));
  });
  std::tie(out.I_q, out.std_error_q) = mean_and_error(iq);

  if (boundary && law->is_iid()) {
    out.I_a = -std::log(law->mean(ell));
  } else if (boundary) {
    // Straight ray under a Markov field: log-mean over paired environments.
    std::vector<double> lp(static_cast<std::size_t>(options.env_replicas));
    parallel_for(lp.size(), options.threads, [&](std::size_t i) {
      lp[i] = log_quenched_point_probability(sample_environment(law, env_seed(static_cast<int>(i)), region), n1, t1);
    });
    const double total = log_sum_exp(lp) - std::log(static_cast<double>(lp.size()));
    out.I_a = -total / n1;
    out.std_error_a = jackknife_log_mean_error(lp) / n1;
  } else {
    const double i1 = -std::log(annealed_point_probability(law, n1, t1)) / n1;
    const double i2 = t2 ? -std::log(annealed_point_probability(law, n2, *t2)) / n2 : 0.0;
    out.I_a = richardson(n1, i1, n2, i2);
  }
  out.I_a = std::max(0.0, out.I_a);
  out.I_q = std::max(0.0, out.I_q);
  return out;
}

}  // namespace rwre
