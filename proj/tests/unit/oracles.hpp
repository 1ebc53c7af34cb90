#pragma once

// Reference computations used only by the tests. None of these call into the
// library's numerical routines; they rebuild each quantity from its definition.

#include <cmath>
#include <functional>
#include <map>
#include <vector>

namespace oracle {

/// Smallest grid point c in [lo, hi] (step h) where f changes sign, refined by
/// linear interpolation between the bracketing grid points.
inline double scan_root(const std::function<double(double)>& f, double lo, double hi, double h) {
  double a = lo;
  double fa = f(a);
  for (double b = lo + h; b <= hi + 0.5 * h; b += h) {
    const double fb = f(b);
    if ((fa <= 0.0) != (fb <= 0.0)) return a - fa * (b - a) / (fb - fa);
    a = b;
    fa = fb;
  }
  return NAN;
}

/// f(C) for the tilt: half the sum over directions of sqrt(<z,e>^2 + 4 C m(e) m(-e)).
/// `means` is ordered +e1, -e1, +e2, -e2, ...
inline double tilt_f(const std::vector<double>& means, const std::vector<double>& z, double C) {
  double s = 0.0;
  for (std::size_t a = 0; a < z.size(); ++a) {
    const double p = means[2 * a], q = means[2 * a + 1];
    s += 2.0 * std::sqrt(z[a] * z[a] + 4.0 * C * p * q);
  }
  return 0.5 * s;
}

/// Expected number of Bernoulli(p) trials until L consecutive successes,
/// from the first-passage equations on run-length states 0..L-1 solved by
/// Gaussian elimination.
inline double run_first_passage(double p, int L) {
  const int n = L;
  std::vector<std::vector<double>> a(n, std::vector<double>(n + 1, 0.0));
  // T_k = 1 + p T_{k+1} + (1-p) T_0, with T_L = 0.
  for (int k = 0; k < n; ++k) {
    a[k][k] += 1.0;
    if (k + 1 < n) a[k][k + 1] -= p;
    a[k][0] -= 1.0 - p;
    a[k][n] = 1.0;
  }
  for (int c = 0; c < n; ++c) {
    int piv = c;
    for (int r = c + 1; r < n; ++r) {
      if (std::abs(a[r][c]) > std::abs(a[piv][c])) piv = r;
    }
    std::swap(a[c], a[piv]);
    for (int r = 0; r < n; ++r) {
      if (r == c) continue;
      const double f = a[r][c] / a[c][c];
      for (int k = c; k <= n; ++k) a[r][k] -= f * a[c][k];
    }
  }
  return a[0][n] / a[0][0];
}

/// Cramer rate of the d = 1 simple symmetric walk.
inline double cramer_ssrw(double x) {
  auto h = [](double t) { return t > 0.0 ? t * std::log(t) : 0.0; };
  return 0.5 * (h(1.0 + x) + h(1.0 - x));
}

/// 1-d path enumeration over an environment given as a function of (site, sign).
/// Returns the endpoint distribution after n steps from 0.
inline std::map<long, double> endpoint_1d(int n, const std::function<double(long, int)>& prob) {
  std::map<long, double> out;
  std::function<void(int, long, double)> rec = [&](int j, long x, double w) {
    if (w == 0.0) return;
    if (j == n) {
      out[x] += w;
      return;
    }
    rec(j + 1, x + 1, w * prob(x, +1));
    rec(j + 1, x - 1, w * prob(x, -1));
  };
  rec(0, 0, 1.0);
  return out;
}

/// 1-d annealed endpoint distribution for an i.i.d. law with atoms given by
/// their +e1 probabilities: every path weight is the product over visited
/// sites of E[w^a (1-w)^b], a/b the numbers of right/left exits.
inline std::map<long, double> annealed_endpoint_1d(int n, const std::vector<double>& right, const std::vector<double>& weights) {
  std::map<long, double> out;
  std::vector<int> steps(static_cast<std::size_t>(n));
  std::function<void(int)> rec = [&](int j) {
    if (j == n) {
      std::map<long, std::pair<int, int>> exits;
      long x = 0;
      for (int s : steps) {
        (s > 0 ? exits[x].first : exits[x].second)++;
        x += s;
      }
      double w = 1.0;
      for (const auto& [site, ab] : exits) {
        double m = 0.0;
        for (std::size_t k = 0; k < right.size(); ++k) {
          m += weights[k] * std::pow(right[k], ab.first) * std::pow(1.0 - right[k], ab.second);
        }
        w *= m;
      }
      out[x] += w;
      return;
    }
    for (int s : {+1, -1}) {
      steps[static_cast<std::size_t>(j)] = s;
      rec(j + 1);
    }
  };
  rec(0);
  return out;
}

/// Truncated ray functional by explicit enumeration of letter sequences over
/// {forcing ell, free}: each forcing letter weighs kbar, each free letter at
/// step j weighs (u_ell - kbar) * factor[j-1]; sequences stop at the first run
/// of L forcing letters and must do so by step H.
inline double ray_sum(double kbar, double u_ell, int L, const std::vector<double>& factor) {
  const int H = static_cast<int>(factor.size());
  double total = 0.0;
  std::function<void(int, int, double)> rec = [&](int j, int run, double w) {
    if (run == L) {
      total += w;
      return;
    }
    if (j == H) return;
    rec(j + 1, run + 1, w * kbar);
    rec(j + 1, 0, w * (u_ell - kbar) * factor[static_cast<std::size_t>(j)]);
  };
  rec(0, 0, 1.0);
  return total;
}

/// Same functional with a constant free-letter factor, as a power of the
/// transfer matrix on run-length states 0..L (state L absorbing).
inline double ray_sum_transfer(double kbar, double u_ell, int L, double factor, int H) {
  std::vector<std::vector<double>> m(L + 1, std::vector<double>(L + 1, 0.0));
  for (int r = 0; r < L; ++r) {
    m[r][r + 1] = kbar;
    m[r][0] = (u_ell - kbar) * factor;
  }
  std::vector<double> v(L + 1, 0.0);
  v[0] = 1.0;
  for (int j = 0; j < H; ++j) {
    std::vector<double> next(L + 1, 0.0);
    for (int r = 0; r < L; ++r) {
      for (int c = 0; c <= L; ++c) next[c] += v[r] * m[r][c];
    }
    next[L] += v[L];
    v = next;
  }
  return v[L];
}

}  // namespace oracle
