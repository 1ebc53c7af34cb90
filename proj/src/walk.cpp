#include "rwre/walk.hpp"

#include <algorithm>
#include <cmath>

#include "rwre/log_sum.hpp"
#include "rwre/random.hpp"
#include "rwre/tilt.hpp"

namespace rwre {

namespace {

// Visits every site of the sub-box [lo, hi] of `box` with its linear index.
template <class Fn>
void for_each_in(const Box& box, const Site& lo, const Site& hi, Fn&& fn) {
  const int d = box.dimension();
  for (int k = 0; k < d; ++k) {
    if (lo[static_cast<std::size_t>(k)] > hi[static_cast<std::size_t>(k)]) return;
  }
  Site y = lo;
  for (;;) {
    fn(box.linear_index(y), static_cast<const Site&>(y));
    int k = 0;
    while (k < d && y[static_cast<std::size_t>(k)] == hi[static_cast<std::size_t>(k)]) {
      y[static_cast<std::size_t>(k)] = lo[static_cast<std::size_t>(k)];
      ++k;
    }
    if (k == d) return;
    ++y[static_cast<std::size_t>(k)];
  }
}

// Exponential tilt of the mean environment whose drift is target/n (pulled
// slightly inside the simplex when the target is on its boundary).
std::vector<double> target_tilt(const EnvironmentLaw& law, int n, const Site& target) {
  const int d = law.dimension();
  std::vector<double> z(static_cast<std::size_t>(d));
  for (int k = 0; k < d; ++k) z[static_cast<std::size_t>(k)] = static_cast<double>(target[static_cast<std::size_t>(k)]) / n;
  const double norm = l1_norm(z);
  if (norm == 0.0) return std::vector<double>(static_cast<std::size_t>(d), 0.0);
  if (norm > 0.999) {
    for (auto& c : z) c *= 0.999 / norm;
  }
  const auto m = law.means();
  return solve_tilt(m, z).theta;
}

constexpr int kLogSpaceThreshold = 20;

bool reachable(int n, const Site& target) {
  const auto dist = l1_norm(target);
  return dist <= n && (n - dist) % 2 == 0;
}

// Sum over length-n paths ending at target of exp(log_weight(steps)).
template <class LogWeight>
double sum_over_paths_to(int n, int dimension, const Site& target, LogWeight&& log_weight) {
  if (static_cast<int>(target.size()) != dimension) throw std::invalid_argument("target dimension mismatch");
  (void)path_count(n, dimension);
  if (!reachable(n, target)) return 0.0;
  if (n > kLogSpaceThreshold) {
    LogAccumulator acc;
    for_each_path(n, dimension, [&](std::span<const Direction> steps, const Site& end) {
      if (end == target) acc.add_log(log_weight(steps));
    });
    return acc.value();
  }
  double total = 0.0;
  for_each_path(n, dimension, [&](std::span<const Direction> steps, const Site& end) {
    if (end == target) total += std::exp(log_weight(steps));
  });
  return total;
}

double log_quenched_weight(const Environment& env, std::span<const Direction> steps) {
  Site x = origin(env.dimension());
  double lw = 0.0;
  for (auto e : steps) {
    lw += std::log(env.prob(x, e));
    advance(x, e);
  }
  return lw;
}

}  // namespace

Site Path::position(std::size_t j) const {
  Site x = start;
  for (std::size_t i = 0; i < j; ++i) advance(x, steps[i]);
  return x;
}

std::vector<Site> Path::positions() const {
  std::vector<Site> out;
  out.reserve(steps.size() + 1);
  Site x = start;
  out.push_back(x);
  for (auto e : steps) {
    advance(x, e);
    out.push_back(x);
  }
  return out;
}

std::int64_t path_count(int n, int dimension, std::int64_t budget) {
  check_dimension(dimension);
  if (n < 0) throw std::invalid_argument("path length must be non-negative");
  std::int64_t count = 1;
  for (int j = 0; j < n; ++j) {
    if (count > budget / num_directions(dimension)) {
      throw BudgetError("enumerating (" + std::to_string(num_directions(dimension)) + ")^" + std::to_string(n) +
                        " paths exceeds the budget of " + std::to_string(budget));
    }
    count *= num_directions(dimension);
  }
  return count;
}

std::vector<Path> enumerate_paths(int n, int dimension) {
  std::vector<Path> out;
  out.reserve(static_cast<std::size_t>(path_count(n, dimension)));
  for_each_path(n, dimension, [&](std::span<const Direction> steps, const Site&) {
    out.push_back(Path{origin(dimension), std::vector<Direction>(steps.begin(), steps.end())});
  });
  return out;
}

Path simulate_quenched(const Environment& env, const Site& start, int n, std::uint64_t rng_seed) {
  if (n < 0) throw std::invalid_argument("walk length must be non-negative");
  Engine g = make_engine(rng_seed, 0);
  Path path{start, {}};
  path.steps.reserve(static_cast<std::size_t>(n));
  Site x = start;
  const int nd = num_directions(env.dimension());
  std::vector<double> cumulative(static_cast<std::size_t>(nd));
  for (int j = 0; j < n; ++j) {
    const auto& v = env.at(x);
    double c = 0.0;
    for (int k = 0; k < nd; ++k) {
      c += v.values()[static_cast<std::size_t>(k)];
      cumulative[static_cast<std::size_t>(k)] = c;
    }
    const Direction e(pick(cumulative, uniform01(g) * c));
    path.steps.push_back(e);
    advance(x, e);
  }
  (void)env.at(x);
  return path;
}

double quenched_path_weight(const Environment& env, std::span<const Direction> steps) {
  return std::exp(log_quenched_weight(env, steps));
}

std::map<Site, std::vector<int>> visit_counts(int dimension, std::span<const Direction> steps) {
  std::map<Site, std::vector<int>> counts;
  Site x = origin(dimension);
  for (auto e : steps) {
    auto [it, inserted] = counts.try_emplace(x);
    if (inserted) it->second.assign(static_cast<std::size_t>(num_directions(dimension)), 0);
    ++it->second[static_cast<std::size_t>(e.index())];
    advance(x, e);
  }
  return counts;
}

double log_annealed_path_weight(const EnvironmentLaw& law, std::span<const Direction> steps) {
  if (!law.is_iid()) throw std::logic_error("exact annealed path weights need an i.i.d. law");
  double lw = 0.0;
  for (const auto& [site, counts] : visit_counts(law.dimension(), steps)) {
    lw += std::log(law.site_moment(counts));
  }
  return lw;
}

double annealed_path_weight(const EnvironmentLaw& law, std::span<const Direction> steps) {
  return std::exp(log_annealed_path_weight(law, steps));
}

double annealed_point_probability(const LawPtr& law, int n, const Site& target) {
  const int d = law->dimension();
  if (law->is_iid()) {
    return sum_over_paths_to(n, d, target, [&](std::span<const Direction> s) { return log_annealed_path_weight(*law, s); });
  }
  const auto paths = path_count(n, d);
  const Box box = Box::centered(d, std::max(n - 1, 0));
  const double configs = std::pow(static_cast<double>(law->palette().size()), static_cast<double>(box.volume()));
  if (configs * static_cast<double>(paths) > 2e8) {
    throw BudgetError("annealed enumeration over Markov field configurations exceeds the budget");
  }
  double total = 0.0;
  for_each_field_configuration(law, box, [&](double w, const Environment& env) {
    total += w * quenched_point_probability(env, n, target);
  });
  return total;
}

std::map<Site, double> annealed_endpoint_distribution(const LawPtr& law, int n) {
  const int d = law->dimension();
  std::map<Site, double> out;
  if (law->is_iid()) {
    for_each_path(n, d, [&](std::span<const Direction> steps, const Site& end) {
      out[end] += annealed_path_weight(*law, steps);
    });
    return out;
  }
  const auto paths = path_count(n, d);
  const Box box = Box::centered(d, std::max(n - 1, 0));
  const double configs = std::pow(static_cast<double>(law->palette().size()), static_cast<double>(box.volume()));
  if (configs * static_cast<double>(paths) > 2e8) {
    throw BudgetError("annealed enumeration over Markov field configurations exceeds the budget");
  }
  for_each_field_configuration(law, box, [&](double w, const Environment& env) {
    for (const auto& [site, p] : quenched_endpoint_distribution(env, n)) out[site] += w * p;
  });
  return out;
}

double quenched_point_probability(const Environment& env, int n, const Site& target) {
  return sum_over_paths_to(n, env.dimension(), target,
                           [&](std::span<const Direction> s) { return log_quenched_weight(env, s); });
}

std::map<Site, double> quenched_endpoint_distribution(const Environment& env, int n) {
  std::map<Site, double> out;
  for_each_path(n, env.dimension(), [&](std::span<const Direction> steps, const Site& end) {
    out[end] += std::exp(log_quenched_weight(env, steps));
  });
  return out;
}

double log_quenched_point_probability(const Environment& env, int n, const Site& target) {
  const int d = env.dimension();
  if (static_cast<int>(target.size()) != d) throw std::invalid_argument("target dimension mismatch");
  if (n < 0) throw std::invalid_argument("walk length must be non-negative");
  if (!reachable(n, target)) return kNegInf;
  if (n == 0) return 0.0;

  int nonzero_axes = 0;
  for (auto c : target) nonzero_axes += c != 0 ? 1 : 0;
  if (l1_norm(target) == n && nonzero_axes == 1) {
    Direction e;
    for (int k = 0; k < d; ++k) {
      const auto c = target[static_cast<std::size_t>(k)];
      if (c != 0) e = c > 0 ? Direction::positive(k) : Direction::negative(k);
    }
    double lw = 0.0;
    Site x = origin(d);
    for (int j = 0; j < n; ++j) {
      lw += std::log(env.prob(x, e));
      advance(x, e);
    }
    return lw;
  }

  // Forward recursion, tilted toward the target drift so the bulk of the mass
  // stays near the paths that matter. Every path ending at the target carries
  // the same factor e^{<lambda,target>}, which is removed at the end.
  const Box box = Box::centered(d, n);
  const auto volume = box.volume();
  if (volume > 50'000'000) throw BudgetError("forward recursion box too large");
  const auto lambda = target_tilt(env.law(), n, target);
  const auto dirs = all_directions(d);
  const int nd = num_directions(d);
  std::vector<double> factor(static_cast<std::size_t>(nd));
  for (auto e : dirs) factor[static_cast<std::size_t>(e.index())] = std::exp(dot(lambda, e));

  std::vector<std::int64_t> stride(static_cast<std::size_t>(d), 1);
  for (int k = 1; k < d; ++k) stride[static_cast<std::size_t>(k)] = stride[static_cast<std::size_t>(k - 1)] * box.extent(k - 1);

  // Tilted step weights per site, cached when the box is small enough.
  const bool cached = volume * nd <= 20'000'000;
  std::vector<double> weights;
  Site x(static_cast<std::size_t>(d));
  if (cached) {
    weights.resize(static_cast<std::size_t>(volume * nd));
    for (std::int64_t i = 0; i < volume; ++i) {
      box.site_at(i, x);
      const auto& v = env.at(x);
      for (auto e : dirs) weights[static_cast<std::size_t>(i * nd + e.index())] = v[e] * factor[static_cast<std::size_t>(e.index())];
    }
  }

  std::vector<double> cur(static_cast<std::size_t>(volume), 0.0), next(cur.size(), 0.0);
  cur[static_cast<std::size_t>(box.linear_index(origin(d)))] = 1.0;
  Site lo = origin(d), hi = origin(d);          // support of cur
  Site next_lo = lo, next_hi = hi;              // region of next that may hold stale values
  double log_scale = 0.0;
  std::vector<double> w(static_cast<std::size_t>(nd));
  for (int j = 0; j < n; ++j) {
    for_each_in(box, next_lo, next_hi, [&](std::int64_t i, const Site&) { next[static_cast<std::size_t>(i)] = 0.0; });
    const int remaining = n - j - 1;
    for_each_in(box, lo, hi, [&](std::int64_t i, const Site& y) {
      const double p = cur[static_cast<std::size_t>(i)];
      if (p == 0.0) return;
      if (cached) {
        std::copy_n(weights.begin() + i * nd, nd, w.begin());
      } else {
        const auto& v = env.at(y);
        for (auto e : dirs) w[static_cast<std::size_t>(e.index())] = v[e] * factor[static_cast<std::size_t>(e.index())];
      }
      std::int64_t gap = 0;
      for (int k = 0; k < d; ++k) gap += std::abs(target[static_cast<std::size_t>(k)] - y[static_cast<std::size_t>(k)]);
      for (auto e : dirs) {
        // Moving along e changes the distance to the target by exactly one.
        const auto a = static_cast<std::size_t>(e.axis());
        const auto toward = (target[a] - y[a]) * e.sign() > 0;
        if ((toward ? gap - 1 : gap + 1) > remaining) continue;
        next[static_cast<std::size_t>(i + e.sign() * stride[a])] += p * w[static_cast<std::size_t>(e.index())];
      }
    });
    // The new support lies within the old one grown by a step.
    Site grown_lo = lo, grown_hi = hi;
    for (int k = 0; k < d; ++k) {
      grown_lo[static_cast<std::size_t>(k)] = std::max(lo[static_cast<std::size_t>(k)] - 1, box.lo[static_cast<std::size_t>(k)]);
      grown_hi[static_cast<std::size_t>(k)] = std::min(hi[static_cast<std::size_t>(k)] + 1, box.hi[static_cast<std::size_t>(k)]);
    }
    double m = 0.0;
    for_each_in(box, grown_lo, grown_hi, [&](std::int64_t i, const Site&) { m = std::max(m, next[static_cast<std::size_t>(i)]); });
    if (m == 0.0) return kNegInf;
    // Rescale, flush negligible mass, and shrink the support box.
    Site new_lo = grown_hi, new_hi = grown_lo;
    for_each_in(box, grown_lo, grown_hi, [&](std::int64_t i, const Site& y) {
      auto& q = next[static_cast<std::size_t>(i)];
      q /= m;
      if (q < 1e-300) {
        q = 0.0;
        return;
      }
      for (int k = 0; k < d; ++k) {
        new_lo[static_cast<std::size_t>(k)] = std::min(new_lo[static_cast<std::size_t>(k)], y[static_cast<std::size_t>(k)]);
        new_hi[static_cast<std::size_t>(k)] = std::max(new_hi[static_cast<std::size_t>(k)], y[static_cast<std::size_t>(k)]);
      }
    });
    log_scale += std::log(m);
    std::swap(cur, next);
    // `next` now holds the previous step's values on the old support.
    next_lo = lo;
    next_hi = hi;
    lo = new_lo;
    hi = new_hi;
  }
  const double p = cur[static_cast<std::size_t>(box.linear_index(target))];
  if (!(p > 0.0)) return kNegInf;
  double shift = 0.0;
  for (int k = 0; k < d; ++k) shift += lambda[static_cast<std::size_t>(k)] * static_cast<double>(target[static_cast<std::size_t>(k)]);
  return log_scale + std::log(p) - shift;
}

}  // namespace rwre
