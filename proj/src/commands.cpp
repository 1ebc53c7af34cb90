#include "rwre/commands.hpp"

#include <cmath>
#include <filesystem>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "rwre/parallel.hpp"
#include "rwre/report.hpp"
#include "rwre/walk.hpp"

namespace rwre {

namespace {

constexpr std::uint64_t kThetaStream = 0x7E7A'0000ULL;
constexpr std::uint64_t kOneStepStream = 0x05E5'0000ULL;
constexpr std::uint64_t kTauStream = 0x7A00'0000ULL;
constexpr std::int64_t kTauChunks = 64;

template <class Body>
int with_exit_codes(std::ostream& err, Body&& body) {
  try {
    return body();
  } catch (const ConfigError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const BudgetError& e) {
    err << "budget exceeded: " << e.what() << '\n';
    return kExitBudget;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFalsified;
  }
}

std::string artifact(const RunSettings& run, const std::string& name) {
  return (std::filesystem::path(run.out_dir) / name).string();
}

std::vector<double> random_theta(Engine& g, int d, double bound) {
  std::vector<double> t(static_cast<std::size_t>(d));
  for (auto& v : t) v = bound * (2.0 * uniform01(g) - 1.0);
  return t;
}

TiltParams config_tilt(const ExperimentConfig& cfg, const EnvironmentLaw& law) {
  if (static_cast<int>(cfg.z.size()) != cfg.law.dimension) throw ConfigError("z must have one entry per axis");
  try {
    return solve_tilt(law, cfg.z);
  } catch (const std::domain_error& e) {
    throw ConfigError(std::string("z: ") + e.what());
  }
}

void note(FamilyResult& f, double residual, const std::string& what) {
  ++f.checks;
  if (residual > f.worst || f.worst_case.empty()) {
    if (residual >= f.worst) {
      f.worst = residual;
      f.worst_case = what;
    }
  }
}

std::string theta_label(int n, const std::vector<double>& theta) {
  std::ostringstream s;
  s << "n=" << n << " theta=(";
  for (std::size_t k = 0; k < theta.size(); ++k) s << (k ? "," : "") << format_double(theta[k]);
  s << ')';
  return s.str();
}

std::string fixed(double v, int digits = 6) {
  std::ostringstream s;
  s << std::setprecision(digits) << v;
  return s.str();
}

}  // namespace

std::vector<FamilyResult> run_verification(const ExperimentConfig& cfg, const RunSettings& run) {
  const auto law = build_law(cfg.law);
  const int d = law->dimension();
  auto tp = config_tilt(cfg, *law);
  if (cfg.verify.corrupt_theta) tp.theta[0] += 0.05;
  const auto& v = cfg.verify;
  for (int n : {v.n_max, v.decomposition_n, v.psi_n}) (void)path_count(n, d);
  std::vector<FamilyResult> out;

  // The six tilt invariants form one family; it reports the first invariant
  // that fails, or else the one with the largest residual.
  {
    const auto checks = check_tilt(tp, v.tilt_tolerance, v.factorization_tolerance);
    const InvariantCheck* shown = &checks.front();
    for (const auto& c : checks) {
      if (!shown->ok()) break;
      if (!c.ok() || c.residual > shown->residual) shown = &c;
    }
    out.push_back({"tilt-invariants", static_cast<int>(checks.size()), shown->residual, shown->tolerance, shown->name});
  }

  Engine g = make_engine(cfg.seed, kThetaStream);
  std::vector<std::vector<std::vector<double>>> thetas(static_cast<std::size_t>(v.n_max) + 1);
  for (int n = 1; n <= v.n_max; ++n) {
    for (int s = 0; s < v.theta_samples; ++s) thetas[static_cast<std::size_t>(n)].push_back(random_theta(g, d, v.theta_bound));
  }

  FamilyResult annealed{"identity-annealed", 0, 0.0, v.identity_tolerance, ""};
  FamilyResult quenched{"identity-quenched", 0, 0.0, v.identity_tolerance, ""};
  const auto env = sample_environment(law, cfg.seed, Box::centered(d, std::max(v.n_max, std::max(v.psi_n, 1))));
  for (int n = 1; n <= v.n_max; ++n) {
    const auto& ts = thetas[static_cast<std::size_t>(n)];
    std::vector<double> ra(ts.size()), rq(ts.size());
    parallel_for(ts.size(), run.threads, [&](std::size_t i) {
      ra[i] = verify_identity_annealed(law, tp, ts[i], n).relative_error();
      rq[i] = verify_identity_quenched(env, tp, ts[i], n).relative_error();
    });
    for (std::size_t i = 0; i < ts.size(); ++i) {
      note(annealed, ra[i], theta_label(n, ts[i]));
      note(quenched, rq[i], theta_label(n, ts[i]));
    }
  }
  out.push_back(annealed);
  out.push_back(quenched);

  const auto eps = build_epsilon(cfg, tp);
  FamilyResult coincide{"decomposition-coincidence", 0, 0.0, v.identity_tolerance, ""};
  for (int n = 1; n <= v.decomposition_n; ++n) {
    const auto a = decomposed_endpoint_distribution(tp, eps, n);
    const auto b = qwalk_endpoint_distribution(tp, n);
    double worst = a.size() == b.size() ? 0.0 : 1.0;
    for (const auto& [x, p] : b) {
      const auto it = a.find(x);
      worst = std::max(worst, std::abs((it == a.end() ? 0.0 : it->second) - p));
    }
    note(coincide, worst, "n=" + std::to_string(n));
  }
  out.push_back(coincide);

  FamilyResult one_step{"psi-one-step", 0, 0.0, v.one_step_tolerance, ""};
  Engine h = make_engine(cfg.seed, kOneStepStream);
  const auto dirs = all_directions(d);
  for (int s = 0; s < v.one_step_samples; ++s) {
    for (auto e : dirs) {
      const double xi_value = 0.5 + uniform01(h);
      double lhs = 0.0;
      for (int w = 0; w <= num_directions(d); ++w) {
        const Symbol letter(w);
        const double q = conditional_step_distribution(tp, eps, letter)[static_cast<std::size_t>(e.index())];
        lhs += eps.probability(letter) * q * psi_factor(tp, eps, letter, e, xi_value);
      }
      note(one_step, std::abs(lhs - tp.step(e) * xi_value), "e=" + to_string(e) + " xi=" + format_double(xi_value));
    }
  }
  out.push_back(one_step);

  FamilyResult psi{"psi-identity", 0, 0.0, v.identity_tolerance, ""};
  for (int n = 1; n <= v.psi_n; ++n) {
    const auto count = static_cast<std::size_t>(std::min(v.psi_theta_samples, v.theta_samples));
    std::vector<std::vector<double>> ts;
    for (std::size_t i = 0; i < count; ++i) ts.push_back(random_theta(g, d, v.theta_bound));
    std::vector<double> r(ts.size());
    parallel_for(ts.size(), run.threads,
                 [&](std::size_t i) { r[i] = verify_psi_identity(tp, eps, env, ts[i], n).relative_error(); });
    for (std::size_t i = 0; i < ts.size(); ++i) note(psi, r[i], theta_label(n, ts[i]));
  }
  out.push_back(psi);
  return out;
}

int cmd_verify(const ExperimentConfig& cfg, const RunSettings& run, std::ostream& out, std::ostream& err) {
  return with_exit_codes(err, [&] {
    const auto results = run_verification(cfg, run);
    out << std::left << std::setw(34) << "check" << std::setw(8) << "count" << std::setw(14) << "worst"
        << std::setw(12) << "tolerance" << "status\n";
    bool all_ok = true;
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& f : results) {
      all_ok = all_ok && f.ok();
      out << std::left << std::setw(34) << f.family << std::setw(8) << f.checks << std::setw(14) << fixed(f.worst, 4)
          << std::setw(12) << fixed(f.tolerance, 3) << (f.ok() ? "PASS" : "FAIL") << '\n';
      if (!f.ok()) err << "FAIL " << f.family << ": residual " << f.worst << " at " << f.worst_case << '\n';
      rows.push_back({{"family", f.family},
                      {"checks", f.checks},
                      {"worst", f.worst},
                      {"tolerance", f.tolerance},
                      {"worst_case", f.worst_case},
                      {"ok", f.ok()}});
    }
    if (!run.out_dir.empty()) {
      write_text_file(artifact(run, "verify.json"), envelope(cfg, "verify", rows).dump(2) + "\n");
    }
    return all_ok ? kExitOk : kExitFalsified;
  });
}

std::string gap_report_document(const ExperimentConfig& cfg, const RunSettings& run, int* exit_code) {
  const auto law = build_law(cfg.law);
  const auto tp = config_tilt(cfg, *law);
  const auto stop = build_stopping(cfg);
  if (!(dot(tp.z, stop.ell) > 0.0)) throw ConfigError("ell must satisfy <z, ell> > 0");
  const auto eps = build_epsilon(cfg, tp);
  const auto budget = build_gap_budget(cfg, run);
  const auto rep = certify_gap(tp, eps, stop, law, budget);

  auto payload = to_json(rep);
  payload["tilt"] = to_json(tp);
  if (cfg.gap.exact_check_horizon > 0 && law->is_iid()) {
    const auto exact = exact_ray_gap(tp, eps, stop, *law, cfg.gap.exact_check_horizon);
    auto small = budget;
    small.ray.horizon = cfg.gap.exact_check_horizon;
    small.max_groups = budget.ray.groups;
    const auto mc = certify_gap(tp, eps, stop, law, small);
    payload["exact_check"] = {{"horizon", cfg.gap.exact_check_horizon},
                              {"configurations", exact.configurations},
                              {"exact_annealed_side", exact.annealed_side},
                              {"exact_quenched_side", exact.quenched_side},
                              {"exact_gap", exact.gap},
                              {"mc_gap", mc.gap},
                              {"mc_std_error", mc.std_error},
                              {"deviation_in_std_errors", mc.std_error > 0.0 ? (mc.gap - exact.gap) / mc.std_error : 0.0}};
  }
  if (exit_code) {
    switch (rep.verdict) {
      case GapVerdict::Certified:
        *exit_code = kExitOk;
        break;
      case GapVerdict::Refuted:
        *exit_code = kExitFalsified;
        break;
      case GapVerdict::Inconclusive:
        *exit_code = kExitInconclusive;
        break;
    }
  }
  return envelope(cfg, "gap_report", payload).dump(2) + "\n";
}

int cmd_gap(const ExperimentConfig& cfg, const RunSettings& run, std::ostream& out, std::ostream& err) {
  return with_exit_codes(err, [&] {
    int code = kExitInconclusive;
    const auto doc = gap_report_document(cfg, run, &code);
    const auto j = nlohmann::json::parse(doc);
    const auto& r = j["gap_report"];
    out << "ell " << r["ell"].get<std::string>() << "  L " << r["L"] << "  kbar " << r["kbar"] << "  E[tau] "
        << r["expected_tau"] << "  horizon " << r["horizon"] << '\n';
    out << "W                " << r["W"] << '\n';
    out << "annealed side    " << r["annealed_side"] << " +- " << r["annealed_std_error"] << '\n';
    out << "quenched side    " << r["quenched_side"] << " +- " << r["quenched_std_error"] << '\n';
    out << "gap              " << r["gap"] << " +- " << r["std_error"] << "  (bias bound " << r["bias_bound"] << ")\n";
    out << "significance     " << r["significance"] << '\n';
    out << "bound_Ia/bound_Iq " << r["bound_Ia"] << " / " << r["bound_Iq"] << '\n';
    if (r.contains("exact_check")) {
      const auto& c = r["exact_check"];
      out << "exact check H=" << c["horizon"] << ": exact gap " << c["exact_gap"] << ", MC gap " << c["mc_gap"]
          << " +- " << c["mc_std_error"] << '\n';
    }
    out << "verdict          " << r["verdict"].get<std::string>() << "  (config " << j["config_hash"].get<std::string>()
        << ")\n";
    if (!run.out_dir.empty()) {
      write_text_file(artifact(run, "gap_report.json"), doc);
      GapReport rep;
      rep.expected_tau = r["expected_tau"].get<double>();
      for (const auto& g : r["groups_trace"]) {
        rep.trace.push_back({g["on_ray_blocks"].get<std::int64_t>(), g["annealed_log"].get<double>(),
                             g["quenched_log"].get<double>()});
      }
      std::ostringstream csv;
      write_gap_trace_csv(csv, rep, j["config_hash"].get<std::string>(), cfg.seed);
      write_text_file(artifact(run, "gap_trace.csv"), csv.str());
    }
    return code;
  });
}

void validate_rate_grid(const ExperimentConfig& cfg) {
  if (cfg.rate.grid.empty()) throw ConfigError("rate.grid is empty");
  for (const auto& x : cfg.rate.grid) {
    if (static_cast<int>(x.size()) != cfg.law.dimension) throw ConfigError("rate.grid point has the wrong dimension");
    try {
      check_velocity(x);
    } catch (const std::domain_error& e) {
      throw ConfigError(std::string("rate.grid: ") + e.what());
    }
  }
}

int cmd_rate(const ExperimentConfig& cfg, const RunSettings& run, std::ostream& out, std::ostream& err) {
  return with_exit_codes(err, [&] {
    validate_rate_grid(cfg);
    const auto law = build_law(cfg.law);
    const auto options = build_rate_options(cfg, run);
    std::vector<RatePointEstimate> rows;
    for (const auto& x : cfg.rate.grid) rows.push_back(rate_point(law, x, options));
    const auto hash = config_hash(cfg);
    std::ostringstream csv;
    write_rate_csv(csv, rows, hash, cfg.seed);
    out << csv.str();
    if (!run.out_dir.empty()) {
      write_text_file(artifact(run, "rate_grid.csv"), csv.str());
      nlohmann::json pts = nlohmann::json::array();
      for (const auto& r : rows) pts.push_back(to_json(r));
      write_text_file(artifact(run, "rate_grid.json"), envelope(cfg, "rate_points", pts).dump(2) + "\n");
    }
    return kExitOk;
  });
}

int cmd_env_sample(const ExperimentConfig& cfg, const RunSettings& run, std::ostream& out, std::ostream& err) {
  return with_exit_codes(err, [&] {
    if (cfg.env_sample.radius < 0) throw ConfigError("env_sample.radius must be >= 0");
    const auto law = build_law(cfg.law);
    const auto env = sample_environment(law, cfg.seed, Box::centered(law->dimension(), cfg.env_sample.radius));
    out << "law " << cfg.law.kind << "  d " << law->dimension() << "  disorder " << disorder(*law) << "  means";
    for (double m : law->means()) out << ' ' << m;
    out << (law->means_exact() ? " (exact)" : " (Monte Carlo)") << '\n';
    std::ostringstream csv;
    csv << "# config_hash=" << config_hash(cfg) << " seed=" << cfg.seed << "\n";
    write_environment_csv(csv, env);
    if (run.out_dir.empty()) {
      out << csv.str();
    } else {
      write_text_file(artifact(run, "environment.csv"), csv.str());
      out << "wrote " << env.region().volume() << " sites\n";
    }
    return kExitOk;
  });
}

int cmd_tau_stats(const ExperimentConfig& cfg, const RunSettings& run, std::ostream& out, std::ostream& err) {
  return with_exit_codes(err, [&] {
    const int d = cfg.law.dimension;
    std::vector<double> kbars = cfg.tau_stats.kbars;
    if (kbars.empty()) {
      const auto law = build_law(cfg.law);
      kbars.push_back(build_epsilon(cfg, config_tilt(cfg, *law)).kbar());
    }
    std::vector<int> lengths = cfg.tau_stats.block_lengths;
    if (lengths.empty()) lengths.push_back(cfg.L);
    if (cfg.tau_stats.draws < 2) throw ConfigError("tau_stats.draws must be >= 2");

    std::ostringstream csv;
    csv << "# config_hash=" << config_hash(cfg) << " seed=" << cfg.seed << "\n";
    csv << "kbar,L,draws,mean,stderr,expected,z\n";
    bool ok = true;
    std::uint64_t combo = 0;
    for (double kbar : kbars) {
      for (int L : lengths) {
        if (L < 1) throw ConfigError("tau_stats.block_lengths must be >= 1");
        EpsilonLaw eps = [&] {
          try {
            return EpsilonLaw::alphabet_only(d, kbar);
          } catch (const std::invalid_argument& e) {
            throw ConfigError(std::string("tau_stats.kbars: ") + e.what());
          }
        }();
        StoppingConfig sc;
        sc.L = L;
        sc.ell = config_direction(cfg);
        const auto draws = cfg.tau_stats.draws;
        std::vector<double> sums(kTauChunks, 0.0), squares(kTauChunks, 0.0);
        const std::uint64_t base = kTauStream + (combo++ << 8);
        parallel_for(kTauChunks, run.threads, [&](std::size_t c) {
          Engine g = make_engine(cfg.seed, base + c);
          const auto begin = draws * static_cast<std::int64_t>(c) / kTauChunks;
          const auto end = draws * static_cast<std::int64_t>(c + 1) / kTauChunks;
          for (auto i = begin; i < end; ++i) {
            const auto t = static_cast<double>(sample_tau(eps, sc, g));
            sums[c] += t;
            squares[c] += t * t;
          }
        });
        double s = 0.0, ss = 0.0;
        for (std::int64_t c = 0; c < kTauChunks; ++c) {
          s += sums[static_cast<std::size_t>(c)];
          ss += squares[static_cast<std::size_t>(c)];
        }
        const double n = static_cast<double>(draws);
        const double mean = s / n;
        const double se = std::sqrt(std::max(0.0, (ss - n * mean * mean) / (n - 1.0)) / n);
        const double expected = expected_tau(eps, sc);
        const double z = (mean - expected) / se;
        ok = ok && std::abs(z) <= 4.0;
        csv << format_double(kbar) << ',' << L << ',' << draws << ',' << format_double(mean) << ','
            << format_double(se) << ',' << format_double(expected) << ',' << format_double(z) << '\n';
      }
    }
    out << csv.str();
    if (!run.out_dir.empty()) write_text_file(artifact(run, "tau_stats.csv"), csv.str());
    return ok ? kExitOk : kExitFalsified;
  });
}

}  // namespace rwre
