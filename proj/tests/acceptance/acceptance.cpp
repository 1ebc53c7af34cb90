// Acceptance run: one PASS/FAIL line per criterion, each with its own time limit.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>

#include "rwre/commands.hpp"
#include "rwre/ldp.hpp"
#include "rwre/parallel.hpp"

using namespace rwre;

namespace {

const Direction kRight = Direction::positive(0);

struct Outcome {
  bool ok = true;
  std::string detail;
};

LawPtr iid_law(int d, double kappa, std::vector<std::vector<double>> atoms, std::vector<double> weights) {
  IidProduct p;
  for (auto& a : atoms) p.atoms.emplace_back(std::move(a));
  p.weights = std::move(weights);
  return std::make_shared<const EnvironmentLaw>(d, kappa, std::move(p));
}

LawPtr two_atom() { return iid_law(1, 0.1, {{0.4, 0.6}, {0.6, 0.4}}, {0.5, 0.5}); }

LawPtr random_law(Engine& g, int d, int atoms) {
  const double kappa = 0.04;
  std::vector<std::vector<double>> a;
  std::vector<double> w;
  double ws = 0.0;
  for (int k = 0; k < atoms; ++k) {
    std::vector<double> p(static_cast<std::size_t>(2 * d));
    double s = 0.0;
    for (auto& v : p) s += (v = -std::log(1.0 - uniform01(g)));
    double total = 0.0;
    for (auto& v : p) total += (v = kappa + 0.01 + (1.0 - 2 * d * (kappa + 0.01)) * v / s);
    p[0] += 1.0 - total;
    a.push_back(p);
    w.push_back(0.3 + uniform01(g));
    ws += w.back();
  }
  for (auto& v : w) v /= ws;
  return iid_law(d, kappa, std::move(a), std::move(w));
}

std::vector<double> random_drift(Engine& g, int d, double max_l1) {
  std::vector<double> z(static_cast<std::size_t>(d));
  double l1 = 0.0;
  for (auto& v : z) l1 += std::abs(v = 2.0 * uniform01(g) - 1.0);
  const double r = 0.05 + (max_l1 - 0.05) * uniform01(g);
  for (auto& v : z) v *= r / l1;
  return z;
}

std::vector<double> random_theta(Engine& g, int d) {
  std::vector<double> t(static_cast<std::size_t>(d));
  for (auto& v : t) v = 4.0 * uniform01(g) - 2.0;
  return t;
}

StoppingConfig stopping(int L, Direction ell = kRight) {
  StoppingConfig c;
  c.L = L;
  c.ell = ell;
  return c;
}

std::string num(double v) {
  std::ostringstream s;
  s.precision(4);
  s << v;
  return s.str();
}

Outcome tilt_construction() {
  Outcome o;
  Engine g(101);
  double worst = 0.0;
  for (int k = 0; k < 50; ++k) {
    const int d = 1 + k % 3;
    const auto law = random_law(g, d, 1 + k % 4);
    const auto tp = solve_tilt(*law, random_drift(g, d, 0.95));
    for (const auto& c : check_tilt(tp, 1e-10, 1e-10)) {
      worst = std::max(worst, c.residual);
      if (!c.ok()) o.ok = false;
    }
  }
  const auto tp = solve_tilt(std::vector<double>{0.5, 0.5}, {0.5});
  const double closed = std::max({std::abs(tp.C - 0.75), std::abs(tp.u[0] - 0.75), std::abs(tp.u[1] - 0.25),
                                  std::abs(tp.D - std::sqrt(3.0) / 2.0), std::abs(tp.theta[0] - std::log(std::sqrt(3.0)))});
  o.ok = o.ok && closed <= 1e-12;
  o.detail = "50 random tilts, worst invariant residual " + num(worst) + "; closed-form case error " + num(closed);
  return o;
}

Outcome identities() {
  Outcome o;
  Engine g(202);
  double worst = 0.0;
  auto run = [&](const LawPtr& law, int n_max) {
    const int d = law->dimension();
    const auto tp = solve_tilt(*law, random_drift(g, d, 0.8));
    const auto env = sample_environment(law, 7, Box::centered(d, n_max));
    for (int n = 1; n <= n_max; ++n) {
      for (int s = 0; s < 20; ++s) {
        const auto th = random_theta(g, d);
        worst = std::max(worst, verify_identity_annealed(law, tp, th, n).relative_error());
        worst = std::max(worst, verify_identity_quenched(env, tp, th, n).relative_error());
      }
    }
  };
  run(two_atom(), 10);
  run(random_law(g, 2, 2), 6);
  o.ok = worst <= 1e-10;
  o.detail = "d=1 n<=10 and d=2 n<=6, 20 theta each, worst relative error " + num(worst);
  return o;
}

Outcome decomposition() {
  Outcome o;
  Engine g(303);
  double coincide = 0.0, psi = 0.0, one_step = 0.0;
  for (const auto& law : {two_atom(), random_law(g, 2, 2)}) {
    const int d = law->dimension();
    const auto tp = solve_tilt(*law, random_drift(g, d, 0.8));
    const auto eps = EpsilonLaw::with_default(tp);
    const auto env = sample_environment(law, 3, Box::centered(d, 5));
    for (int n = 1; n <= 5; ++n) {
      const auto a = decomposed_endpoint_distribution(tp, eps, n);
      for (const auto& [x, p] : qwalk_endpoint_distribution(tp, n)) coincide = std::max(coincide, std::abs(a.at(x) - p));
      for (int s = 0; s < 4; ++s) psi = std::max(psi, verify_psi_identity(tp, eps, env, random_theta(g, d), n).relative_error());
    }
    for (int s = 0; s < 2000; ++s) {
      for (auto e : all_directions(d)) {
        const double xv = 0.5 + uniform01(g);
        double lhs = 0.0;
        for (int w = 0; w <= 2 * d; ++w) {
          const Symbol letter(w);
          lhs += eps.probability(letter) * conditional_step_distribution(tp, eps, letter)[static_cast<std::size_t>(e.index())] *
                 psi_factor(tp, eps, letter, e, xv);
        }
        one_step = std::max(one_step, std::abs(lhs - tp.step(e) * xv));
      }
    }
  }
  o.ok = coincide <= 1e-10 && psi <= 1e-10 && one_step <= 1e-12;
  o.detail = "coincidence " + num(coincide) + ", psi identity " + num(psi) + ", one-step " + num(one_step);
  return o;
}

Outcome tau_statistics() {
  Outcome o;
  ExperimentConfig cfg;
  cfg.tau_stats.draws = 1'000'000;
  cfg.tau_stats.kbars = {0.125, 0.25};
  cfg.tau_stats.block_lengths = {1, 2, 3};
  std::ostringstream out, err;
  const int code = cmd_tau_stats(cfg, {}, out, err);
  std::istringstream in(out.str());
  std::string line;
  double worst = 0.0;
  int rows = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#' || line[0] == 'k') continue;
    worst = std::max(worst, std::abs(std::stod(line.substr(line.rfind(',') + 1))));
    ++rows;
  }
  o.ok = code == kExitOk && rows == 6 && worst <= 4.0;
  o.detail = "6 (kbar, L) pairs x 1e6 draws, worst |z| " + num(worst);
  return o;
}

Outcome zero_disorder() {
  Outcome o;
  const auto law = iid_law(1, 0.1, {{0.5, 0.5}}, {1.0});
  const auto tp = solve_tilt(*law, {0.5});
  const auto eps = EpsilonLaw::with_default(tp);
  const auto r = certify_gap(tp, eps, stopping(2), law, GapBudget{});
  const auto rate = rate_point(law, {0.5}, RateOptions{});
  const double cramer = 0.5 * (1.5 * std::log(1.5) + 0.5 * std::log(0.5));
  o.ok = std::abs(r.gap) <= 3.0 * r.std_error && std::abs(rate.I_a - cramer) <= 0.01 &&
         std::abs(rate.I_q - cramer) <= 0.01;
  o.detail = "gap " + num(r.gap) + " +- " + num(r.std_error) + ", I(1/2) = " + num(rate.I_a) + " vs " + num(cramer);
  return o;
}

Outcome desk_scale_gap() {
  Outcome o;
  const auto law = two_atom();
  const auto tp = solve_tilt(*law, {0.5});
  const auto eps = EpsilonLaw::with_default(tp);
  const auto cfg = stopping(2);
  GapBudget budget;
  budget.ray.env_replicas = 16000;
  const auto r = certify_gap(tp, eps, cfg, law, budget);

  const int H = 12;
  const auto exact = exact_ray_gap(tp, eps, cfg, *law, H);
  auto small = budget;
  small.ray.horizon = H;
  small.max_groups = budget.ray.groups;
  const auto mc = certify_gap(tp, eps, cfg, law, small);
  const double dev = std::abs(mc.gap - exact.gap) / mc.std_error;

  const auto boundary = rate_point(law, {1.0}, RateOptions{});
  const double ia = -std::log(0.5), iq = -0.5 * (std::log(0.4) + std::log(0.6));
  o.ok = r.gap > 0.0 && r.significance > 5.0 && r.verdict == GapVerdict::Certified && dev <= 3.0 &&
         std::abs(boundary.I_a - ia) <= 0.01 && std::abs(boundary.I_q - iq) <= 0.01 && boundary.I_a < boundary.I_q;
  o.detail = "gap " + num(r.gap) + " +- " + num(r.std_error) + " (significance " + num(r.significance) + "); H=12 exact " +
             num(exact.gap) + " vs MC " + num(mc.gap) + " +- " + num(mc.std_error) + "; I_a(e1) " + num(boundary.I_a) +
             " < I_q(e1) " + num(boundary.I_q);
  return o;
}

Outcome jensen_matrix() {
  Outcome o;
  Engine g(707);
  int runs = 0, refuted = 0, certified = 0;
  double worst = 1e300;
  for (int k = 0; k < 16; ++k) {
    const int d = 1 + k % 2;
    const auto law = random_law(g, d, 2 + k % 3);
    auto z = random_drift(g, d, 0.7);
    // Put the ray direction along the largest drift component.
    int axis = 0;
    for (int a = 1; a < d; ++a) {
      if (std::abs(z[static_cast<std::size_t>(a)]) > std::abs(z[static_cast<std::size_t>(axis)])) axis = a;
    }
    const Direction ell = z[static_cast<std::size_t>(axis)] > 0 ? Direction::positive(axis) : Direction::negative(axis);
    const auto tp = solve_tilt(*law, z);
    const auto eps = EpsilonLaw::with_default(tp);
    const int L = 2 + k % 2;
    if (expected_tau(eps, stopping(L, ell)) > 2000.0) continue;
    GapBudget budget;
    budget.ray.seed = 1 + static_cast<std::uint64_t>(k);
    budget.ray.env_replicas = 4000;
    budget.max_groups = 32;
    budget.ray.horizon = std::min<std::int64_t>(default_ray_horizon(eps, stopping(L, ell)), 200000);
    const auto r = certify_gap(tp, eps, stopping(L, ell), law, budget);
    ++runs;
    refuted += r.verdict == GapVerdict::Refuted ? 1 : 0;
    certified += r.verdict == GapVerdict::Certified ? 1 : 0;
    if (r.std_error > 0.0) worst = std::min(worst, r.gap / r.std_error);
    if (r.annealed_side < r.quenched_side - 3.0 * r.std_error) o.ok = false;
  }
  o.ok = o.ok && refuted == 0 && runs >= 8;
  o.detail = std::to_string(runs) + " randomized runs, " + std::to_string(certified) + " certified, " +
             std::to_string(refuted) + " refuted, most negative gap/stderr " + num(worst);
  return o;
}

Outcome determinism() {
  Outcome o;
  ExperimentConfig cfg;
  cfg.L = 2;
  const auto base = std::filesystem::temp_directory_path() / "rwre_acceptance_determinism";
  std::filesystem::remove_all(base);
  auto run = [&](const std::string& tag, int threads) {
    std::ostringstream out, err;
    cmd_gap(cfg, {threads, (base / tag).string()}, out, err);
    std::ifstream a(base / tag / "gap_report.json", std::ios::binary), b(base / tag / "gap_trace.csv", std::ios::binary);
    std::ostringstream s;
    s << a.rdbuf() << b.rdbuf();
    return s.str();
  };
  const auto first = run("t1a", 1), second = run("t1b", 1), eight = run("t8", 8);
  o.ok = !first.empty() && first == second && first == eight;
  o.detail = std::string("report+trace ") + (first == second ? "identical" : "differ") + " across runs, " +
             (first == eight ? "identical" : "differ") + " at 1 vs 8 threads (" + std::to_string(first.size()) + " bytes)";
  std::filesystem::remove_all(base);
  return o;
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    double limit_seconds;
    std::function<Outcome()> run;
  };
  const Criterion criteria[] = {
      {1, "tilt construction", 1.0, tilt_construction},
      {2, "change-of-measure identities", 120.0, identities},
      {3, "decomposition and psi identities", 120.0, decomposition},
      {4, "stopping-time statistics", 60.0, tau_statistics},
      {5, "zero-disorder collapse", 300.0, zero_disorder},
      {6, "strict gap at desk scale", 600.0, desk_scale_gap},
      {7, "Jensen ordering never violated", 600.0, jensen_matrix},
      {8, "determinism", 120.0, determinism},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool ok = o.ok && secs <= c.limit_seconds;
    failed += ok ? 0 : 1;
    std::printf("%s criterion %d (%s): %s [%.2fs, limit %.0fs]\n", ok ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str(),
                secs, c.limit_seconds);
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
