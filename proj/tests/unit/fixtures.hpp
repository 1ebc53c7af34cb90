#pragma once

#include <memory>
#include <vector>

#include "rwre/environment.hpp"
#include "rwre/random.hpp"

namespace fixture {

inline rwre::LawPtr iid_1d(std::vector<double> right, std::vector<double> weights, double kappa = 0.1) {
  rwre::IidProduct p;
  for (double r : right) p.atoms.emplace_back(std::vector<double>{r, 1.0 - r});
  p.weights = std::move(weights);
  return std::make_shared<const rwre::EnvironmentLaw>(1, kappa, std::move(p));
}

/// atoms {0.4, 0.6} on +e1 with weights (1/2, 1/2)
inline rwre::LawPtr two_atom() { return iid_1d({0.4, 0.6}, {0.5, 0.5}); }

inline rwre::LawPtr single_atom(double right = 0.5) { return iid_1d({right}, {1.0}); }

/// Uniform random probability vector with every entry >= floor.
inline std::vector<double> random_site(rwre::Engine& g, int d, double floor) {
  const int n = 2 * d;
  std::vector<double> p(static_cast<std::size_t>(n));
  double s = 0.0;
  for (auto& v : p) {
    v = -std::log(1.0 - rwre::uniform01(g));
    s += v;
  }
  double total = 0.0;
  for (auto& v : p) {
    v = floor + (1.0 - n * floor) * v / s;
    total += v;
  }
  p[0] += 1.0 - total;
  return p;
}

inline rwre::LawPtr random_iid(rwre::Engine& g, int d, int atoms, double kappa = 0.05) {
  rwre::IidProduct p;
  double s = 0.0;
  for (int k = 0; k < atoms; ++k) {
    p.atoms.emplace_back(random_site(g, d, kappa + 0.01));
    p.weights.push_back(0.2 + rwre::uniform01(g));
    s += p.weights.back();
  }
  for (auto& w : p.weights) w /= s;
  return std::make_shared<const rwre::EnvironmentLaw>(d, kappa, std::move(p));
}

}  // namespace fixture
