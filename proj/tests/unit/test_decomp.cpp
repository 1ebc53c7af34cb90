#include <cmath>

#include "doctest.h"
#include "fixtures.hpp"
#include "oracles.hpp"
#include "rwre/decomp.hpp"
#include "rwre/ldp.hpp"

using namespace rwre;

namespace {

const Direction kRight = Direction::positive(0);
const Direction kLeft = Direction::negative(0);

TiltParams symmetric_tilt() { return solve_tilt(std::vector<double>{0.5, 0.5}, {0.5}); }

StoppingConfig stopping(int L, Direction ell = kRight) {
  StoppingConfig c;
  c.L = L;
  c.ell = ell;
  return c;
}

}  // namespace

TEST_CASE("epsilon law parameters") {
  const auto tp = symmetric_tilt();
  CHECK(EpsilonLaw::default_kbar(tp) == doctest::Approx(0.125));
  const auto eps = EpsilonLaw::with_default(tp);
  CHECK(eps.free_mass() == doctest::Approx(0.75));
  CHECK(eps.probability(Symbol::forcing(kLeft)) == 0.125);
  CHECK(eps.probability(Symbol::free(1)) == 0.75);
  CHECK_THROWS_AS(EpsilonLaw(tp, 0.25), std::invalid_argument);  // u(-e1) - kbar = 0
  CHECK_THROWS_AS(EpsilonLaw(tp, 0.0), std::invalid_argument);
  CHECK_NOTHROW(EpsilonLaw::alphabet_only(1, 0.25));
  CHECK_THROWS_AS(EpsilonLaw::alphabet_only(1, 0.5), std::invalid_argument);

  Engine g(1);
  int counts[3] = {0, 0, 0};
  const int n = 200000;
  for (int i = 0; i < n; ++i) counts[eps.sample(g).value()]++;
  const double p[3] = {0.125, 0.125, 0.75};
  for (int k = 0; k < 3; ++k) CHECK(std::abs(counts[k] / double(n) - p[k]) < 4.0 * std::sqrt(p[k] * (1 - p[k]) / n));
}

TEST_CASE("stopping configuration needs a direction along the drift") {
  const auto tp = symmetric_tilt();
  CHECK_NOTHROW(stopping(2).validate(tp));
  CHECK_THROWS(stopping(2, kLeft).validate(tp));
}

TEST_CASE("conditional step law") {
  const auto tp = symmetric_tilt();
  const auto eps = EpsilonLaw(tp, 0.125);
  const auto forced = conditional_step_distribution(tp, eps, Symbol::forcing(kRight));
  CHECK(forced[0] == 1.0);
  CHECK(forced[1] == 0.0);
  const auto loose = conditional_step_distribution(tp, eps, Symbol::free(1));
  CHECK(loose[0] == doctest::Approx(5.0 / 6.0).epsilon(1e-14));
  CHECK(loose[1] == doctest::Approx(1.0 / 6.0).epsilon(1e-14));

  Engine g(4);
  for (int i = 0; i < 100; ++i) CHECK(conditional_step(tp, eps, Symbol::forcing(kLeft), g) == kLeft);

  // Marginalizing the letter recovers u on random d = 3 tilts.
  Engine h(5);
  for (int k = 0; k < 10; ++k) {
    const auto law = fixture::random_iid(h, 3, 2);
    const auto t3 = solve_tilt(*law, {0.2 * uniform01(h), -0.1, 0.3 * uniform01(h)});
    const auto e3 = EpsilonLaw::with_default(t3);
    std::vector<double> marginal(6, 0.0);
    for (int w = 0; w <= 6; ++w) {
      const auto q = conditional_step_distribution(t3, e3, Symbol(w));
      for (int i = 0; i < 6; ++i) marginal[static_cast<std::size_t>(i)] += e3.probability(Symbol(w)) * q[static_cast<std::size_t>(i)];
    }
    for (int i = 0; i < 6; ++i) CHECK(std::abs(marginal[static_cast<std::size_t>(i)] - t3.u[static_cast<std::size_t>(i)]) < 1e-14);
  }
}

TEST_CASE("expected stopping time matches the first-passage solve") {
  CHECK(expected_tau(0.5, 1) == doctest::Approx(2.0));
  CHECK_THROWS_AS(expected_tau(0.5, 0), std::invalid_argument);
  CHECK(expected_tau(EpsilonLaw::alphabet_only(1, 0.125), stopping(2)) == doctest::Approx(72.0));
  for (double k : {0.125, 0.25, 0.1, 0.05}) {
    for (int L = 1; L <= 5; ++L) {
      const auto eps = EpsilonLaw::alphabet_only(1, k);
      CHECK(expected_tau(eps, stopping(L)) == doctest::Approx(oracle::run_first_passage(k, L)).epsilon(1e-8));
    }
  }
}

TEST_CASE("sampled stopping times") {
  const auto eps = EpsilonLaw::alphabet_only(1, 0.25);
  Engine g(8);
  SUBCASE("geometric at L = 1") {
    const int n = 100000;
    double s = 0, ss = 0;
    for (int i = 0; i < n; ++i) {
      const double t = static_cast<double>(sample_tau(eps, stopping(1), g));
      s += t;
      ss += t * t;
    }
    const double mean = s / n, var = ss / n - mean * mean;
    CHECK(std::abs(mean - 4.0) < 4.0 * std::sqrt(var / n));
    CHECK(var == doctest::Approx(0.75 / 0.0625).epsilon(0.05));
  }
  SUBCASE("successive times restart the run") {
    const auto times = sample_stopping_times(eps, stopping(3), g, 20000);
    std::int64_t prev = 0;
    double s = 0, ss = 0;
    for (auto t : times) {
      CHECK(t - prev >= 3);
      const double inc = static_cast<double>(t - prev);
      s += inc;
      ss += inc * inc;
      prev = t;
    }
    const double n = 20000, mean = s / n;
    CHECK(std::abs(mean - 84.0) < 4.0 * std::sqrt((ss / n - mean * mean) / n));
  }
  SUBCASE("horizon cap") {
    CHECK_THROWS_AS(sample_tau(EpsilonLaw::alphabet_only(1, 0.01), stopping(5), g, 100), BudgetError);
  }
}

TEST_CASE("psi factor") {
  const auto tp = symmetric_tilt();
  const auto eps = EpsilonLaw(tp, 0.125);
  CHECK(psi_factor(tp, eps, Symbol::forcing(kRight), kRight, 1.7) == 1.0);
  CHECK(psi_factor(tp, eps, Symbol::forcing(kLeft), kRight, 1.7) == 0.0);
  CHECK(psi_factor(tp, eps, Symbol::free(1), kRight, 1.0) == 1.0);
  CHECK(psi_factor(tp, eps, Symbol::free(1), kRight, 1.2) == doctest::Approx(1.24).epsilon(1e-14));

  // Averaged over an i.i.d. site the free-letter factor is neutral.
  const auto law = fixture::iid_1d({0.3, 0.55, 0.8}, {0.3, 0.3, 0.4});
  const auto t2 = solve_tilt(*law, {0.3});
  const auto e2 = EpsilonLaw::with_default(t2);
  for (auto e : all_directions(1)) {
    double avg = 0.0;
    const auto& atoms = law->iid().atoms;
    for (std::size_t k = 0; k < atoms.size(); ++k) {
      avg += law->iid().weights[k] * psi_factor(t2, e2, Symbol::free(1), e, atoms[k][e] / law->mean(e));
    }
    CHECK(avg == doctest::Approx(1.0).epsilon(1e-14));
  }
}

TEST_CASE("one-step psi identity") {
  Engine g(12);
  for (int d = 1; d <= 3; ++d) {
    const auto law = fixture::random_iid(g, d, 2);
    std::vector<double> z(static_cast<std::size_t>(d), 0.0);
    z[0] = 0.4;
    const auto tp = solve_tilt(*law, z);
    const auto eps = EpsilonLaw::with_default(tp);
    for (int s = 0; s < 200; ++s) {
      for (auto e : all_directions(d)) {
        const double x = 0.5 + uniform01(g);
        double lhs = 0.0;
        for (int w = 0; w <= 2 * d; ++w) {
          const Symbol letter(w);
          lhs += eps.probability(letter) * conditional_step_distribution(tp, eps, letter)[static_cast<std::size_t>(e.index())] *
                 psi_factor(tp, eps, letter, e, x);
        }
        CHECK(std::abs(lhs - tp.step(e) * x) <= 1e-12);
      }
    }
  }
}

TEST_CASE("decomposed walk coincides with the tilted walk") {
  Engine g(13);
  for (int d = 1; d <= 2; ++d) {
    const auto law = fixture::random_iid(g, d, 2);
    std::vector<double> z(static_cast<std::size_t>(d), 0.1);
    const auto tp = solve_tilt(*law, z);
    const auto eps = EpsilonLaw::with_default(tp);
    for (int n = 1; n <= 5; ++n) {
      const auto a = decomposed_endpoint_distribution(tp, eps, n);
      const auto b = qwalk_endpoint_distribution(tp, n);
      CHECK(a.size() == b.size());
      for (const auto& [x, p] : b) CHECK(std::abs(a.at(x) - p) <= 1e-10);
    }
  }
  // d = 1 tilted walk is a binomial.
  const auto tp = symmetric_tilt();
  const auto q = qwalk_endpoint_distribution(tp, 4);
  CHECK(q.at({4}) == doctest::Approx(std::pow(0.75, 4)).epsilon(1e-14));
  CHECK(q.at({0}) == doctest::Approx(6 * 0.75 * 0.75 * 0.25 * 0.25).epsilon(1e-14));
}

TEST_CASE("psi identity by enumeration") {
  SUBCASE("two-atom environment") {
    const auto law = fixture::two_atom();
    const auto tp = solve_tilt(*law, {0.5});
    const auto eps = EpsilonLaw::with_default(tp);
    const auto env = sample_environment(law, 3, Box::centered(1, 6));
    CHECK(verify_psi_identity(tp, eps, env, {0.2}, 4).relative_error() <= 1e-10);
    for (int n = 1; n <= 5; ++n) CHECK(verify_psi_identity(tp, eps, env, {-0.7}, n).relative_error() <= 1e-10);
  }
  SUBCASE("zero disorder") {
    const auto law = fixture::single_atom();
    const auto tp = solve_tilt(*law, {0.5});
    const auto eps = EpsilonLaw::with_default(tp);
    const auto env = sample_environment(law, 3, Box::centered(1, 4));
    const auto s = verify_psi_identity(tp, eps, env, {0.6}, 3);
    const double expected = std::exp(3 * zero_disorder_free_energy(tp, {0.6}));
    CHECK(s.lhs == doctest::Approx(expected).epsilon(1e-12));
    CHECK(s.rhs == doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("ray blocks") {
  const auto law = fixture::two_atom();
  const auto tp = solve_tilt(*law, {0.5});
  const auto eps = EpsilonLaw::with_default(tp);
  const auto cfg = stopping(2);
  const auto env = sample_environment(law, 5, Box::ray(1, kRight, 5000));
  Engine g(21);

  SUBCASE("postconditions") {
    for (int i = 0; i < 2000; ++i) {
      const auto b = sample_ray_block(tp, eps, cfg, env, Mode::Quenched, g);
      REQUIRE(b.tau1 >= 2);
      CHECK(static_cast<std::int64_t>(b.epsilon.size()) == b.tau1);
      CHECK(b.epsilon[b.epsilon.size() - 1] == Symbol::forcing(kRight));
      CHECK(b.epsilon[b.epsilon.size() - 2] == Symbol::forcing(kRight));
      if (!b.on_ray) CHECK(b.psi_product == 0.0);
      if (b.on_ray) {
        for (auto s : b.path.steps) CHECK(s == kRight);
      }
    }
  }

  SUBCASE("zero disorder has indicator products") {
    const auto flat = fixture::single_atom();
    const auto tf = solve_tilt(*flat, {0.5});
    const auto ef = EpsilonLaw::with_default(tf);
    const auto fenv = sample_environment(flat, 1, Box::ray(1, kRight, 5000));
    for (int i = 0; i < 500; ++i) {
      const auto b = sample_ray_block(tf, ef, cfg, fenv, Mode::Quenched, g);
      CHECK((b.psi_product == 0.0 || b.psi_product == doctest::Approx(1.0).epsilon(1e-12)));
    }
  }

  SUBCASE("on-ray probability given the letters") {
    // P(on ray | letters) = prod over free letters of (u(ell) - kbar) / (1 - 2 d kbar).
    const double pass = (tp.step(kRight) - eps.kbar()) / eps.free_mass();
    const int n = 40000;
    double hits = 0, predicted = 0;
    for (int i = 0; i < n; ++i) {
      const auto b = sample_ray_block(tp, eps, cfg, env, Mode::Quenched, g);
      hits += b.on_ray ? 1 : 0;
      double p = 1.0;
      for (auto s : b.epsilon) {
        if (s.is_free(1)) p *= pass;
        else if (s != Symbol::forcing(kRight)) p = 0.0;
      }
      predicted += p;
    }
    const double f = hits / n;
    CHECK(std::abs(f - predicted / n) < 4.0 * std::sqrt(f * (1 - f) / n));
  }

  SUBCASE("quenched and annealed agree in the mean environment") {
    const auto mean_env = Environment::constant(law, Box::ray(1, kRight, 5000), SiteVector(law->means()));
    Engine g1(77), g2(77);
    for (int i = 0; i < 300; ++i) {
      const auto a = sample_ray_block(tp, eps, cfg, mean_env, Mode::Quenched, g1);
      const auto b = sample_ray_block(tp, eps, cfg, mean_env, Mode::Annealed, g2);
      CHECK(a.tau1 == b.tau1);
      CHECK(a.psi_product == doctest::Approx(b.psi_product).epsilon(1e-12));
    }
  }
}

TEST_CASE("run-length ray functional matches letter enumeration") {
  const auto law = fixture::two_atom();
  const auto tp = solve_tilt(*law, {0.5});
  const auto eps = EpsilonLaw::with_default(tp);
  Engine g(31);
  for (int L = 2; L <= 3; ++L) {
    for (int H : {1, 2, 5, 9, 14}) {
      std::vector<double> f(static_cast<std::size_t>(H));
      for (auto& v : f) v = 0.6 + 0.8 * uniform01(g);
      const double a = ray_block_expectation(tp, eps, stopping(L), f);
      const double b = oracle::ray_sum(eps.kbar(), tp.step(kRight), L, f);
      CHECK(a == doctest::Approx(b).epsilon(1e-13));
    }
  }
  // Untruncated zero-disorder value: generating function of the run-length chain.
  std::vector<double> ones(4000, 1.0);
  const double k = eps.kbar(), a = tp.step(kRight) - k;
  CHECK(ray_block_expectation(tp, eps, stopping(2), ones) == doctest::Approx(k * k / (1 - a - a * k)).epsilon(1e-12));
  CHECK(k * k / (1 - a - a * k) == doctest::Approx(1.0 / 19.0).epsilon(1e-14));
}
