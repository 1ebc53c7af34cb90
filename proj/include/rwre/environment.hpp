#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include "rwre/lattice.hpp"

namespace rwre {

inline constexpr double kSumTolerance = 1e-12;

/// Jump probabilities out of one site, indexed by Direction::index().
class SiteVector {
 public:
  SiteVector() = default;
  explicit SiteVector(std::vector<double> prob);

  int dimension() const { return static_cast<int>(prob_.size() / 2); }
  double operator[](Direction e) const { return prob_[static_cast<std::size_t>(e.index())]; }
  std::span<const double> values() const { return prob_; }

  /// Sum to one within 1e-12 and every entry at least kappa.
  void validate(double kappa) const;

  /// The same vector with +e_k and -e_k swapped on every axis.
  SiteVector mirrored() const;

  bool operator==(const SiteVector&) const = default;

 private:
  std::vector<double> prob_;
};

struct IidProduct {
  std::vector<SiteVector> atoms;
  std::vector<double> weights;
};

/// Constants of the strong-mixing condition. Carried as declared metadata;
/// nothing in the library checks them.
struct MixingMetadata {
  std::optional<double> C;
  std::optional<double> g;
  std::optional<int> L0;
};

/// Potts-type Gibbs field: state s_x in {0..q-1}, weight exp(beta * #{pairs
/// 0 < |x-y|_1 <= range with s_x == s_y}); site vectors are states[s_x].
struct MarkovField {
  int range = 1;
  double beta = 0.0;
  std::vector<SiteVector> states;
  int sweeps = 64;
  MixingMetadata mixing;
};

enum class MeanMode { Auto, Exact, MonteCarlo };

struct MeanEstimate {
  double value = 0.0;
  double std_error = 0.0;
  bool exact = true;
};

class EnvironmentLaw {
 public:
  EnvironmentLaw(int dimension, double kappa, IidProduct kind);
  EnvironmentLaw(int dimension, double kappa, MarkovField kind, MeanMode mean_mode = MeanMode::Auto);

  int dimension() const { return dimension_; }
  double kappa() const { return kappa_; }
  bool is_iid() const { return std::holds_alternative<IidProduct>(kind_); }
  const IidProduct& iid() const { return std::get<IidProduct>(kind_); }
  const MarkovField& markov() const { return std::get<MarkovField>(kind_); }

  /// Atoms (i.i.d.) or the state map (Markov field).
  const std::vector<SiteVector>& palette() const;

  /// E[omega(0, e)] used everywhere downstream.
  double mean(Direction e) const { return means_[static_cast<std::size_t>(e.index())].value; }
  const MeanEstimate& mean_estimate(Direction e) const { return means_[static_cast<std::size_t>(e.index())]; }
  std::vector<double> means() const;
  bool means_exact() const;

  /// E[f(omega_0)] under the single-site law. i.i.d. only.
  double expect_site(const std::function<double(const SiteVector&)>& f) const;

  /// E[prod_e omega(0,e)^counts[e]]. i.i.d. only.
  double site_moment(std::span<const int> counts) const;

  /// Mirror image under e_k <-> -e_k on every axis.
  EnvironmentLaw mirrored() const;

 private:
  void validate_palette() const;

  int dimension_;
  double kappa_;
  std::variant<IidProduct, MarkovField> kind_;
  std::vector<MeanEstimate> means_;
};

using LawPtr = std::shared_ptr<const EnvironmentLaw>;

MeanEstimate marginal_mean(const EnvironmentLaw& law, Direction e);

/// Exact site marginal of a Markov field by enumerating every configuration
/// of a box of at most 16 sites (returned per direction). Throws BudgetError
/// when q > 8.
std::vector<double> markov_means_by_enumeration(const EnvironmentLaw& law);

/// inf{eps : |omega(x,e)/E omega(x,e) - 1| <= eps a.s.}, over the support.
double disorder(const EnvironmentLaw& law);

/// A realized environment. Lookups are deterministic and read-only; values are
/// references into the law's palette (or an explicit constant vector).
class Environment {
 public:
  static Environment constant(LawPtr law, Box region, SiteVector value);
  /// Explicit palette indices for every site of `region` (linear order).
  static Environment from_states(LawPtr law, Box region, std::vector<std::uint32_t> states);

  const EnvironmentLaw& law() const { return *law_; }
  const LawPtr& law_ptr() const { return law_; }
  std::uint64_t seed() const { return seed_; }
  const Box& region() const { return region_; }
  int dimension() const { return law_->dimension(); }

  /// Throws RegionError outside the realized region.
  const SiteVector& at(const Site& x) const;
  double prob(const Site& x, Direction e) const { return at(x)[e]; }

 private:
  friend Environment sample_environment(LawPtr law, std::uint64_t seed, const Box& region);
  enum class Storage { Hashed, Materialized, Constant };

  Environment(LawPtr law, std::uint64_t seed, Box region, Storage storage);
  std::uint32_t hashed_state(const Site& x) const;

  LawPtr law_;
  std::uint64_t seed_ = 0;
  Box region_;
  Storage storage_;
  Box storage_box_;
  std::vector<std::uint32_t> states_;
  std::vector<double> cumulative_;
  SiteVector constant_;
};

/// Margin added around the requested region when a Markov field is
/// materialized: max(range, 5).
std::int64_t markov_buffer(const MarkovField& field);

/// Realizes `law` on `region`. i.i.d. sites come from a counter-based hash of
/// (seed, site) and are never materialized; Markov fields run `sweeps`
/// heat-bath sweeps with free boundary on region grown by markov_buffer().
Environment sample_environment(LawPtr law, std::uint64_t seed, const Box& region);

/// omega(x,e) / E[omega(0,e)].
double xi(const Environment& env, const Site& x, Direction e);

/// Visits every configuration of a Markov field on `box` with its normalized
/// Gibbs weight. Throws BudgetError beyond `max_configurations`.
void for_each_field_configuration(const LawPtr& law, const Box& box,
                                  const std::function<void(double, const Environment&)>& visit,
                                  std::int64_t max_configurations = std::int64_t{1} << 22);

/// One row per site: coordinates then the 2d probabilities.
void write_environment_csv(std::ostream& out, const Environment& env);

}  // namespace rwre
