#include "rwre/environment.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>

#include "rwre/random.hpp"

namespace rwre {

namespace {

constexpr std::uint64_t kHashSalt = 0xA24BAED4963EE407ULL;
constexpr std::uint64_t kGibbsStream = 0x6162736B;
constexpr std::uint64_t kMeanSeed = 0x5EEDF1E1DULL;
constexpr std::int64_t kMaterializeCap = 50'000'000;

// Offsets 0 < |delta|_1 <= range.
std::vector<Site> interaction_offsets(int dimension, int range) {
  std::vector<Site> out;
  const Box cube = Box::centered(dimension, range);
  const auto n = cube.volume();
  for (std::int64_t i = 0; i < n; ++i) {
    Site delta = cube.site_at(i);
    const auto norm = l1_norm(delta);
    if (norm >= 1 && norm <= range) out.push_back(std::move(delta));
  }
  return out;
}

// Neighbour index lists inside `box` (free boundary).
std::vector<std::vector<std::int64_t>> neighbor_lists(const Box& box, int range) {
  const auto offsets = interaction_offsets(box.dimension(), range);
  const auto n = box.volume();
  std::vector<std::vector<std::int64_t>> out(static_cast<std::size_t>(n));
  Site y;
  for (std::int64_t i = 0; i < n; ++i) {
    const Site x = box.site_at(i);
    auto& list = out[static_cast<std::size_t>(i)];
    for (const auto& delta : offsets) {
      y = x;
      for (std::size_t k = 0; k < y.size(); ++k) y[k] += delta[k];
      if (box.contains(y)) list.push_back(box.linear_index(y));
    }
  }
  return out;
}

std::vector<std::uint32_t> run_heat_bath(const Box& box, const MarkovField& field, Engine& g) {
  const auto q = static_cast<std::uint32_t>(field.states.size());
  const auto n = box.volume();
  const auto neighbors = neighbor_lists(box, field.range);
  std::vector<std::uint32_t> states(static_cast<std::size_t>(n));
  for (auto& s : states) s = static_cast<std::uint32_t>(uniform01(g) * q) % q;

  std::size_t max_degree = 0;
  for (const auto& l : neighbors) max_degree = std::max(max_degree, l.size());
  std::vector<double> boltzmann(max_degree + 1);
  for (std::size_t c = 0; c <= max_degree; ++c) boltzmann[c] = std::exp(field.beta * static_cast<double>(c));

  std::vector<int> counts(q);
  std::vector<double> cumulative(q);
  for (int sweep = 0; sweep < field.sweeps; ++sweep) {
    for (std::size_t i = 0; i < states.size(); ++i) {
      std::fill(counts.begin(), counts.end(), 0);
      for (auto j : neighbors[i]) ++counts[states[static_cast<std::size_t>(j)]];
      double total = 0.0;
      for (std::uint32_t k = 0; k < q; ++k) {
        total += boltzmann[static_cast<std::size_t>(counts[k])];
        cumulative[k] = total;
      }
      for (auto& c : cumulative) c /= total;
      states[i] = static_cast<std::uint32_t>(pick(cumulative, uniform01(g)));
    }
  }
  return states;
}

// Visits all q^|box| configurations with unnormalized log-weights.
template <class Visit>
void enumerate_configurations(const Box& box, const MarkovField& field, std::int64_t cap, Visit&& visit) {
  const auto q = static_cast<std::int64_t>(field.states.size());
  const auto n = box.volume();
  std::int64_t total = 1;
  for (std::int64_t i = 0; i < n; ++i) {
    if (total > cap / q) {
      throw BudgetError("Markov field enumeration on " + std::to_string(n) + " sites with " + std::to_string(q) +
                        " states exceeds the configuration budget " + std::to_string(cap));
    }
    total *= q;
  }
  const auto neighbors = neighbor_lists(box, field.range);
  std::vector<std::uint32_t> states(static_cast<std::size_t>(n), 0);
  for (std::int64_t c = 0; c < total; ++c) {
    auto code = c;
    for (auto& s : states) {
      s = static_cast<std::uint32_t>(code % q);
      code /= q;
    }
    std::int64_t agree = 0;
    for (std::size_t i = 0; i < states.size(); ++i) {
      for (auto j : neighbors[i]) {
        if (static_cast<std::size_t>(j) > i && states[static_cast<std::size_t>(j)] == states[i]) ++agree;
      }
    }
    visit(field.beta * static_cast<double>(agree), states);
  }
}

// Largest cube with at most 16 sites and at most 2^20 configurations.
Box enumeration_box(int dimension, std::size_t states) {
  std::int64_t side = 1;
  for (std::int64_t s = 2;; ++s) {
    double sites = std::pow(static_cast<double>(s), dimension);
    if (sites > 16.0 || sites * std::log2(static_cast<double>(states)) > 20.0) break;
    side = s;
  }
  Box b{origin(dimension), Site(static_cast<std::size_t>(dimension), side - 1)};
  return b;
}

std::vector<double> enumerated_means(int dimension, const MarkovField& field) {
  if (field.states.size() > 8) {
    throw BudgetError("exact Markov marginals need at most 8 field states");
  }
  const Box box = enumeration_box(dimension, field.states.size());
  Site center(static_cast<std::size_t>(dimension));
  for (int k = 0; k < dimension; ++k) center[static_cast<std::size_t>(k)] = (box.extent(k) - 1) / 2;
  const auto c = static_cast<std::size_t>(box.linear_index(center));

  std::vector<double> log_w;
  std::vector<std::uint32_t> center_state;
  enumerate_configurations(box, field, std::int64_t{1} << 20, [&](double lw, const std::vector<std::uint32_t>& s) {
    log_w.push_back(lw);
    center_state.push_back(s[c]);
  });
  const double shift = *std::max_element(log_w.begin(), log_w.end());
  std::vector<double> state_prob(field.states.size(), 0.0);
  double z = 0.0;
  for (std::size_t i = 0; i < log_w.size(); ++i) {
    const double w = std::exp(log_w[i] - shift);
    state_prob[center_state[i]] += w;
    z += w;
  }
  std::vector<double> means(static_cast<std::size_t>(num_directions(dimension)), 0.0);
  for (std::size_t s = 0; s < state_prob.size(); ++s) {
    for (auto e : all_directions(dimension)) {
      means[static_cast<std::size_t>(e.index())] += state_prob[s] / z * field.states[s][e];
    }
  }
  return means;
}

std::vector<MeanEstimate> monte_carlo_means(int dimension, const MarkovField& field) {
  constexpr int kFields = 32;
  const std::int64_t side = dimension <= 3 ? 9 : 5;
  const Box box = Box::centered(dimension, side / 2);
  const int nd = num_directions(dimension);
  std::vector<std::vector<double>> per_field(static_cast<std::size_t>(kFields), std::vector<double>(nd, 0.0));
  for (int f = 0; f < kFields; ++f) {
    Engine g = make_engine(kMeanSeed, static_cast<std::uint64_t>(f));
    const auto states = run_heat_bath(box, field, g);
    auto& acc = per_field[static_cast<std::size_t>(f)];
    for (auto s : states) {
      for (int k = 0; k < nd; ++k) acc[static_cast<std::size_t>(k)] += field.states[s].values()[static_cast<std::size_t>(k)];
    }
    for (auto& a : acc) a /= static_cast<double>(states.size());
  }
  std::vector<MeanEstimate> out(static_cast<std::size_t>(nd));
  for (int k = 0; k < nd; ++k) {
    double m = 0.0;
    for (const auto& pf : per_field) m += pf[static_cast<std::size_t>(k)];
    m /= kFields;
    double v = 0.0;
    for (const auto& pf : per_field) v += (pf[static_cast<std::size_t>(k)] - m) * (pf[static_cast<std::size_t>(k)] - m);
    v /= (kFields - 1);
    out[static_cast<std::size_t>(k)] = MeanEstimate{m, std::sqrt(v / kFields), false};
  }
  return out;
}

}  // namespace

SiteVector::SiteVector(std::vector<double> prob) : prob_(std::move(prob)) {
  if (prob_.empty() || prob_.size() % 2 != 0) {
    throw std::invalid_argument("site vector needs 2d entries, got " + std::to_string(prob_.size()));
  }
}

void SiteVector::validate(double kappa) const {
  double s = 0.0;
  for (double p : prob_) {
    if (!(p >= kappa) || !(p < 1.0)) {
      std::ostringstream msg;
      msg << "site probability " << p << " violates ellipticity floor kappa = " << kappa;
      throw std::invalid_argument(msg.str());
    }
    s += p;
  }
  if (std::abs(s - 1.0) > kSumTolerance) {
    std::ostringstream msg;
    msg.precision(17);
    msg << "site probabilities sum to " << s << ", not 1";
    throw std::invalid_argument(msg.str());
  }
}

SiteVector SiteVector::mirrored() const {
  std::vector<double> p(prob_.size());
  for (std::size_t i = 0; i < p.size(); ++i) p[i] = prob_[i ^ 1U];
  return SiteVector(std::move(p));
}

EnvironmentLaw::EnvironmentLaw(int dimension, double kappa, IidProduct kind)
    : dimension_(dimension), kappa_(kappa), kind_(std::move(kind)) {
  check_dimension(dimension_);
  const auto& iid_kind = iid();
  if (iid_kind.atoms.empty() || iid_kind.atoms.size() != iid_kind.weights.size()) {
    throw std::invalid_argument("i.i.d. law needs one weight per atom and at least one atom");
  }
  double total = 0.0;
  for (double w : iid_kind.weights) {
    if (!(w >= 0.0)) throw std::invalid_argument("atom weights must be non-negative");
    total += w;
  }
  if (std::abs(total - 1.0) > kSumTolerance) throw std::invalid_argument("atom weights must sum to 1");
  validate_palette();

  const int nd = num_directions(dimension_);
  means_.assign(static_cast<std::size_t>(nd), MeanEstimate{});
  for (int k = 0; k < nd; ++k) {
    double m = 0.0;
    for (std::size_t a = 0; a < iid_kind.atoms.size(); ++a) {
      m += iid_kind.weights[a] * iid_kind.atoms[a].values()[static_cast<std::size_t>(k)];
    }
    means_[static_cast<std::size_t>(k)] = MeanEstimate{m, 0.0, true};
  }
  for (const auto& m : means_) {
    if (m.value < kappa_ - kSumTolerance || m.value > 1.0 - (nd - 1) * kappa_ + kSumTolerance) {
      throw std::invalid_argument("marginal mean outside [kappa, 1 - (2d-1) kappa]");
    }
  }
}

EnvironmentLaw::EnvironmentLaw(int dimension, double kappa, MarkovField kind, MeanMode mean_mode)
    : dimension_(dimension), kappa_(kappa), kind_(std::move(kind)) {
  check_dimension(dimension_);
  const auto& field = markov();
  if (field.states.empty()) throw std::invalid_argument("Markov field needs at least one state");
  if (field.range < 1) throw std::invalid_argument("Markov field range must be >= 1");
  if (!(field.beta >= 0.0)) throw std::invalid_argument("interaction strength beta must be >= 0");
  if (field.sweeps < 1) throw std::invalid_argument("Markov field needs sweeps >= 1");
  validate_palette();

  const bool small = field.states.size() <= 8;
  if (mean_mode == MeanMode::Exact || (mean_mode == MeanMode::Auto && small)) {
    const auto exact = enumerated_means(dimension_, field);
    for (double m : exact) means_.push_back(MeanEstimate{m, 0.0, true});
  } else {
    means_ = monte_carlo_means(dimension_, field);
  }
}

void EnvironmentLaw::validate_palette() const {
  if (!(kappa_ > 0.0) || !(kappa_ < 1.0 / num_directions(dimension_))) {
    throw std::invalid_argument("ellipticity kappa must lie in (0, 1/(2d))");
  }
  for (const auto& v : palette()) {
    if (v.dimension() != dimension_) throw std::invalid_argument("site vector dimension mismatch");
    v.validate(kappa_);
  }
}

const std::vector<SiteVector>& EnvironmentLaw::palette() const {
  return is_iid() ? iid().atoms : markov().states;
}

std::vector<double> EnvironmentLaw::means() const {
  std::vector<double> out;
  out.reserve(means_.size());
  for (const auto& m : means_) out.push_back(m.value);
  return out;
}

bool EnvironmentLaw::means_exact() const {
  return std::all_of(means_.begin(), means_.end(), [](const MeanEstimate& m) { return m.exact; });
}

double EnvironmentLaw::expect_site(const std::function<double(const SiteVector&)>& f) const {
  if (!is_iid()) throw std::logic_error("single-site expectations are only exact for i.i.d. laws");
  const auto& k = iid();
  double s = 0.0;
  for (std::size_t a = 0; a < k.atoms.size(); ++a) {
    if (k.weights[a] > 0.0) s += k.weights[a] * f(k.atoms[a]);
  }
  return s;
}

double EnvironmentLaw::site_moment(std::span<const int> counts) const {
  return expect_site([&](const SiteVector& v) {
    double p = 1.0;
    for (std::size_t i = 0; i < counts.size(); ++i) {
      for (int c = 0; c < counts[i]; ++c) p *= v.values()[i];
    }
    return p;
  });
}

EnvironmentLaw EnvironmentLaw::mirrored() const {
  if (is_iid()) {
    IidProduct k = iid();
    for (auto& a : k.atoms) a = a.mirrored();
    return EnvironmentLaw(dimension_, kappa_, std::move(k));
  }
  MarkovField f = markov();
  for (auto& s : f.states) s = s.mirrored();
  return EnvironmentLaw(dimension_, kappa_, std::move(f), means_exact() ? MeanMode::Exact : MeanMode::MonteCarlo);
}

MeanEstimate marginal_mean(const EnvironmentLaw& law, Direction e) { return law.mean_estimate(e); }

std::vector<double> markov_means_by_enumeration(const EnvironmentLaw& law) {
  return enumerated_means(law.dimension(), law.markov());
}

double disorder(const EnvironmentLaw& law) {
  double worst = 0.0;
  const auto& pal = law.palette();
  for (std::size_t a = 0; a < pal.size(); ++a) {
    if (law.is_iid() && law.iid().weights[a] == 0.0) continue;
    for (auto e : all_directions(law.dimension())) {
      worst = std::max(worst, std::abs(pal[a][e] / law.mean(e) - 1.0));
    }
  }
  return worst;
}

Environment::Environment(LawPtr law, std::uint64_t seed, Box region, Storage storage)
    : law_(std::move(law)), seed_(seed), region_(std::move(region)), storage_(storage) {
  if (!law_) throw std::invalid_argument("environment needs a law");
  if (region_.dimension() != law_->dimension()) throw std::invalid_argument("region dimension mismatch");
  (void)region_.volume();
}

Environment Environment::constant(LawPtr law, Box region, SiteVector value) {
  Environment env(std::move(law), 0, std::move(region), Storage::Constant);
  value.validate(env.law().kappa());
  env.constant_ = std::move(value);
  return env;
}

Environment Environment::from_states(LawPtr law, Box region, std::vector<std::uint32_t> states) {
  Environment env(std::move(law), 0, std::move(region), Storage::Materialized);
  if (static_cast<std::int64_t>(states.size()) != env.region_.volume()) {
    throw std::invalid_argument("state vector does not cover the region");
  }
  const auto q = env.law().palette().size();
  for (auto s : states) {
    if (s >= q) throw std::invalid_argument("palette index out of range");
  }
  env.storage_box_ = env.region_;
  env.states_ = std::move(states);
  return env;
}

std::uint32_t Environment::hashed_state(const Site& x) const {
  std::uint64_t h = splitmix64(seed_ ^ kHashSalt);
  for (auto c : x) h = splitmix64(h ^ static_cast<std::uint64_t>(c));
  return static_cast<std::uint32_t>(pick(cumulative_, to_unit(h)));
}

const SiteVector& Environment::at(const Site& x) const {
  if (!region_.contains(x)) {
    std::string where = "(";
    for (std::size_t i = 0; i < x.size(); ++i) where += (i ? "," : "") + std::to_string(x[i]);
    throw RegionError("site " + where + ") lies outside the realized region");
  }
  switch (storage_) {
    case Storage::Constant:
      return constant_;
    case Storage::Hashed:
      return law_->palette()[hashed_state(x)];
    case Storage::Materialized:
      break;
  }
  return law_->palette()[states_[static_cast<std::size_t>(storage_box_.linear_index(x))]];
}

std::int64_t markov_buffer(const MarkovField& field) { return std::max<std::int64_t>(field.range, 5); }

Environment sample_environment(LawPtr law, std::uint64_t seed, const Box& region) {
  if (!law) throw std::invalid_argument("sample_environment needs a law");
  if (law->is_iid()) {
    Environment env(law, seed, region, Environment::Storage::Hashed);
    const auto& w = law->iid().weights;
    double c = 0.0;
    for (double wi : w) {
      c += wi;
      env.cumulative_.push_back(c);
    }
    return env;
  }
  Environment env(law, seed, region, Environment::Storage::Materialized);
  env.storage_box_ = region.expanded(markov_buffer(law->markov()));
  if (env.storage_box_.volume() > kMaterializeCap) {
    throw RegionError("Markov field region of " + std::to_string(env.storage_box_.volume()) +
                      " sites exceeds the materialization cap");
  }
  Engine g = make_engine(seed, kGibbsStream);
  env.states_ = run_heat_bath(env.storage_box_, law->markov(), g);
  return env;
}

double xi(const Environment& env, const Site& x, Direction e) { return env.prob(x, e) / env.law().mean(e); }

void for_each_field_configuration(const LawPtr& law, const Box& box,
                                  const std::function<void(double, const Environment&)>& visit,
                                  std::int64_t max_configurations) {
  if (law->is_iid()) throw std::logic_error("configuration enumeration is for Markov fields");
  std::vector<double> log_w;
  std::vector<std::vector<std::uint32_t>> configs;
  enumerate_configurations(box, law->markov(), max_configurations,
                           [&](double lw, const std::vector<std::uint32_t>& s) {
                             log_w.push_back(lw);
                             configs.push_back(s);
                           });
  const double shift = *std::max_element(log_w.begin(), log_w.end());
  double z = 0.0;
  for (double lw : log_w) z += std::exp(lw - shift);
  for (std::size_t i = 0; i < configs.size(); ++i) {
    visit(std::exp(log_w[i] - shift) / z, Environment::from_states(law, box, std::move(configs[i])));
  }
}

void write_environment_csv(std::ostream& out, const Environment& env) {
  const int d = env.dimension();
  for (int k = 0; k < d; ++k) out << "x" << (k + 1) << ",";
  const auto dirs = all_directions(d);
  for (std::size_t i = 0; i < dirs.size(); ++i) out << "p" << to_string(dirs[i]) << (i + 1 < dirs.size() ? "," : "\n");
  const auto n = env.region().volume();
  if (n > 10'000'000) throw RegionError("environment export is limited to 1e7 sites");
  out.precision(17);
  for (std::int64_t i = 0; i < n; ++i) {
    const Site x = env.region().site_at(i);
    for (auto c : x) out << c << ",";
    const auto& v = env.at(x);
    for (std::size_t k = 0; k < dirs.size(); ++k) out << v[dirs[k]] << (k + 1 < dirs.size() ? "," : "\n");
  }
}

}  // namespace rwre
