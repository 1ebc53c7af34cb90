#include "rwre/config.hpp"

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace rwre {

namespace {

using nlohmann::json;

// Reads the keys of one JSON object, rejecting any it does not know.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw ConfigError(where_ + " must be a JSON object");
  }

  ~ObjectReader() noexcept(false) {
    if (std::uncaught_exceptions() > 0) return;
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.count(key)) throw ConfigError("unknown key '" + key + "' in " + where_);
    }
  }

  template <class T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    const auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      out = it->template get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(where_ + "." + key + ": " + e.what());
    }
  }

  template <class T>
  void get(const char* key, std::optional<T>& out) {
    seen_.insert(key);
    const auto it = j_.find(key);
    if (it == j_.end() || it->is_null()) return;
    try {
      out = it->template get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(where_ + "." + key + ": " + e.what());
    }
  }

  const json* child(const char* key) {
    seen_.insert(key);
    const auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

 private:
  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

template <class T>
json optional_json(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

json law_json(const LawConfig& c) {
  json j{{"dimension", c.dimension}, {"kappa", c.kappa}, {"kind", c.kind}};
  if (c.kind == "iid") {
    j["atoms"] = c.atoms;
    j["weights"] = c.weights;
  } else {
    j["range"] = c.range;
    j["beta"] = c.beta;
    j["states"] = c.states;
    j["sweeps"] = c.sweeps;
    j["mean_mode"] = c.mean_mode;
    j["mixing"] = {{"C", optional_json(c.mixing_C)}, {"g", optional_json(c.mixing_g)}, {"L0", optional_json(c.mixing_L0)}};
  }
  return j;
}

LawConfig law_from(const json& j) {
  LawConfig c;
  ObjectReader r(j, "law");
  r.get("dimension", c.dimension);
  r.get("kappa", c.kappa);
  r.get("kind", c.kind);
  if (c.kind != "iid" && c.kind != "markov") throw ConfigError("law.kind must be 'iid' or 'markov'");
  if (c.kind == "markov") {
    c.atoms.clear();
    c.weights.clear();
  }
  r.get("atoms", c.atoms);
  r.get("weights", c.weights);
  r.get("range", c.range);
  r.get("beta", c.beta);
  r.get("states", c.states);
  r.get("sweeps", c.sweeps);
  r.get("mean_mode", c.mean_mode);
  if (const auto* m = r.child("mixing")) {
    ObjectReader mr(*m, "law.mixing");
    mr.get("C", c.mixing_C);
    mr.get("g", c.mixing_g);
    mr.get("L0", c.mixing_L0);
  }
  if (c.kind == "iid") {
    c.range = 1;
    c.beta = 0.0;
    c.states.clear();
    c.sweeps = 64;
    c.mean_mode = "auto";
    c.mixing_C.reset();
    c.mixing_g.reset();
    c.mixing_L0.reset();
  } else {
    c.atoms.clear();
    c.weights.clear();
  }
  return c;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace

json to_json(const ExperimentConfig& c) {
  json j;
  j["law"] = law_json(c.law);
  j["z"] = c.z;
  j["ell"] = c.ell;
  j["L"] = c.L;
  j["L0"] = optional_json(c.L0);
  j["kbar"] = optional_json(c.kbar);
  j["seed"] = c.seed;
  const auto& v = c.verify;
  j["verify"] = {{"n_max", v.n_max},
                 {"theta_samples", v.theta_samples},
                 {"theta_bound", v.theta_bound},
                 {"decomposition_n", v.decomposition_n},
                 {"psi_n", v.psi_n},
                 {"psi_theta_samples", v.psi_theta_samples},
                 {"one_step_samples", v.one_step_samples},
                 {"identity_tolerance", v.identity_tolerance},
                 {"one_step_tolerance", v.one_step_tolerance},
                 {"tilt_tolerance", v.tilt_tolerance},
                 {"factorization_tolerance", v.factorization_tolerance},
                 {"corrupt_theta", v.corrupt_theta}};
  const auto& g = c.gap;
  j["gap"] = {{"env_replicas", g.env_replicas},
              {"block_replicas", g.block_replicas},
              {"groups", g.groups},
              {"max_groups", g.max_groups},
              {"horizon", g.horizon},
              {"max_doublings", g.max_doublings},
              {"certify_threshold", g.certify_threshold},
              {"refute_threshold", g.refute_threshold},
              {"exact_check_horizon", g.exact_check_horizon}};
  const auto& r = c.rate;
  j["rate"] = {{"method", r.method},
               {"grid", r.grid},
               {"horizon", r.horizon},
               {"annealed_enumeration_horizon", r.annealed_enumeration_horizon},
               {"env_replicas", r.env_replicas},
               {"path_replicas", r.path_replicas},
               {"mc_horizon", r.mc_horizon},
               {"grid_half_width", r.grid_half_width},
               {"grid_step", r.grid_step}};
  j["env_sample"] = {{"radius", c.env_sample.radius}};
  j["tau_stats"] = {{"draws", c.tau_stats.draws},
                    {"kbars", c.tau_stats.kbars},
                    {"block_lengths", c.tau_stats.block_lengths}};
  return j;
}

ExperimentConfig config_from_json(const json& j) {
  ExperimentConfig c;
  ObjectReader r(j, "config");
  if (const auto* law = r.child("law")) c.law = law_from(*law);
  r.get("z", c.z);
  r.get("ell", c.ell);
  r.get("L", c.L);
  r.get("L0", c.L0);
  r.get("kbar", c.kbar);
  r.get("seed", c.seed);
  if (const auto* v = r.child("verify")) {
    ObjectReader vr(*v, "verify");
    vr.get("n_max", c.verify.n_max);
    vr.get("theta_samples", c.verify.theta_samples);
    vr.get("theta_bound", c.verify.theta_bound);
    vr.get("decomposition_n", c.verify.decomposition_n);
    vr.get("psi_n", c.verify.psi_n);
    vr.get("psi_theta_samples", c.verify.psi_theta_samples);
    vr.get("one_step_samples", c.verify.one_step_samples);
    vr.get("identity_tolerance", c.verify.identity_tolerance);
    vr.get("one_step_tolerance", c.verify.one_step_tolerance);
    vr.get("tilt_tolerance", c.verify.tilt_tolerance);
    vr.get("factorization_tolerance", c.verify.factorization_tolerance);
    vr.get("corrupt_theta", c.verify.corrupt_theta);
  }
  if (const auto* g = r.child("gap")) {
    ObjectReader gr(*g, "gap");
    gr.get("env_replicas", c.gap.env_replicas);
    gr.get("block_replicas", c.gap.block_replicas);
    gr.get("groups", c.gap.groups);
    gr.get("max_groups", c.gap.max_groups);
    gr.get("horizon", c.gap.horizon);
    gr.get("max_doublings", c.gap.max_doublings);
    gr.get("certify_threshold", c.gap.certify_threshold);
    gr.get("refute_threshold", c.gap.refute_threshold);
    gr.get("exact_check_horizon", c.gap.exact_check_horizon);
  }
  if (const auto* rt = r.child("rate")) {
    ObjectReader rr(*rt, "rate");
    rr.get("method", c.rate.method);
    rr.get("grid", c.rate.grid);
    rr.get("horizon", c.rate.horizon);
    rr.get("annealed_enumeration_horizon", c.rate.annealed_enumeration_horizon);
    rr.get("env_replicas", c.rate.env_replicas);
    rr.get("path_replicas", c.rate.path_replicas);
    rr.get("mc_horizon", c.rate.mc_horizon);
    rr.get("grid_half_width", c.rate.grid_half_width);
    rr.get("grid_step", c.rate.grid_step);
  }
  if (const auto* es = r.child("env_sample")) {
    ObjectReader er(*es, "env_sample");
    er.get("radius", c.env_sample.radius);
  }
  if (const auto* ts = r.child("tau_stats")) {
    ObjectReader tr(*ts, "tau_stats");
    tr.get("draws", c.tau_stats.draws);
    tr.get("kbars", c.tau_stats.kbars);
    tr.get("block_lengths", c.tau_stats.block_lengths);
  }
  if (c.rate.method != "enumeration" && c.rate.method != "tilted-mc") {
    throw ConfigError("rate.method must be 'enumeration' or 'tilted-mc'");
  }
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("config " + path + " is not valid JSON: " + e.what());
  }
  return config_from_json(j);
}

std::string canonical_dump(const ExperimentConfig& cfg) { return to_json(cfg).dump(); }

std::string config_hash(const ExperimentConfig& cfg) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : canonical_dump(cfg)) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return hex64(h);
}

LawPtr build_law(const LawConfig& c) {
  try {
    check_dimension(c.dimension);
    const auto to_vectors = [&](const std::vector<std::vector<double>>& rows, const char* what) {
      std::vector<SiteVector> out;
      for (const auto& row : rows) {
        if (static_cast<int>(row.size()) != num_directions(c.dimension)) {
          throw ConfigError(std::string("every entry of law.") + what + " needs 2d = " +
                            std::to_string(num_directions(c.dimension)) + " probabilities");
        }
        out.emplace_back(row);
      }
      return out;
    };
    if (c.kind == "iid") {
      return std::make_shared<const EnvironmentLaw>(c.dimension, c.kappa,
                                                    IidProduct{to_vectors(c.atoms, "atoms"), c.weights});
    }
    MarkovField f;
    f.range = c.range;
    f.beta = c.beta;
    f.states = to_vectors(c.states, "states");
    f.sweeps = c.sweeps;
    f.mixing = {c.mixing_C, c.mixing_g, c.mixing_L0};
    MeanMode mode = MeanMode::Auto;
    if (c.mean_mode == "exact") {
      mode = MeanMode::Exact;
    } else if (c.mean_mode == "monte-carlo") {
      mode = MeanMode::MonteCarlo;
    } else if (c.mean_mode != "auto") {
      throw ConfigError("law.mean_mode must be 'auto', 'exact' or 'monte-carlo'");
    }
    return std::make_shared<const EnvironmentLaw>(c.dimension, c.kappa, std::move(f), mode);
  } catch (const ConfigError&) {
    throw;
  } catch (const BudgetError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("invalid law: ") + e.what());
  }
}

Direction config_direction(const ExperimentConfig& cfg) {
  try {
    return parse_direction(cfg.ell, cfg.law.dimension);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("ell: ") + e.what());
  }
}

StoppingConfig build_stopping(const ExperimentConfig& cfg) {
  StoppingConfig s;
  s.L = cfg.L;
  s.ell = config_direction(cfg);
  s.L0 = cfg.L0;
  if (s.L < 2) throw ConfigError("L must be >= 2");
  return s;
}

EpsilonLaw build_epsilon(const ExperimentConfig& cfg, const TiltParams& tp) {
  try {
    return cfg.kbar ? EpsilonLaw(tp, *cfg.kbar) : EpsilonLaw::with_default(tp);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("kbar: ") + e.what());
  }
}

GapBudget build_gap_budget(const ExperimentConfig& cfg, const RunSettings& run) {
  GapBudget b;
  b.ray.env_replicas = cfg.gap.env_replicas;
  b.ray.block_replicas = cfg.gap.block_replicas;
  b.ray.groups = cfg.gap.groups;
  b.ray.horizon = cfg.gap.horizon;
  b.ray.seed = cfg.seed;
  b.ray.threads = run.threads;
  b.ray.max_doublings = cfg.gap.max_doublings;
  b.max_groups = cfg.gap.max_groups;
  b.certify_threshold = cfg.gap.certify_threshold;
  b.refute_threshold = cfg.gap.refute_threshold;
  return b;
}

RateOptions build_rate_options(const ExperimentConfig& cfg, const RunSettings& run) {
  RateOptions o;
  o.method = cfg.rate.method == "tilted-mc" ? RateMethod::TiltedMC : RateMethod::Enumeration;
  o.horizon = cfg.rate.horizon;
  o.annealed_enumeration_horizon = cfg.rate.annealed_enumeration_horizon;
  o.env_replicas = cfg.rate.env_replicas;
  o.path_replicas = cfg.rate.path_replicas;
  o.mc_horizon = cfg.rate.mc_horizon;
  o.grid_half_width = cfg.rate.grid_half_width;
  o.grid_step = cfg.rate.grid_step;
  o.seed = cfg.seed;
  o.threads = run.threads;
  return o;
}

}  // namespace rwre
