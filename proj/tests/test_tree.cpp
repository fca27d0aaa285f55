#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "dynrisk/tree.hpp"
#include "oracles.hpp"

using namespace dynrisk;

TEST_CASE("tree construction") {
  const auto t = build_tree(2, 0.5);
  CHECK(t.dt() == 0.25);
  CHECK(t.leaf_count() == 4);
  const auto t1 = build_tree(1, 1.0);
  CHECK(t1.leaf_count() == 2);
  CHECK(t1.dt() == 1.0);
  CHECK_THROWS_AS(build_tree(27, 1.0), CapacityError);
  CHECK_THROWS_AS(build_tree(0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(build_tree(3, -1.0), std::invalid_argument);

  const auto t7 = build_tree(7, 0.3);
  CHECK(std::abs(t7.dt() * 7 - 0.3) <= std::nextafter(0.3, 1.0) - 0.3);
  for (int k = 0; k <= 7; ++k) {
    double total = 0.0;
    for (std::size_t j = 0; j < ScenarioTree::width(k); ++j) total += ScenarioTree::probability(k);
    CHECK(total == 1.0);
  }
  CHECK(ScenarioTree::up(3) == 6);
  CHECK(ScenarioTree::down(3) == 7);
}

TEST_CASE("brownian paths") {
  const auto t = build_tree(2, 0.5);
  const auto b = brownian(t);
  CHECK(b(2, 0) == 1.0);
  CHECK(b(2, 1) == 0.0);
  CHECK(b(2, 2) == 0.0);
  CHECK(b(2, 3) == -1.0);
  CHECK(b(1, 0) == 0.5);

  const auto t1 = build_tree(1, 1.0);
  const auto b1 = brownian(t1);
  CHECK(b1(1, 0) == 1.0);
  CHECK(b1(1, 1) == -1.0);

  const auto t6 = build_tree(6, 0.7);
  const auto b6 = brownian(t6);
  const auto leaves = b6.level(6);
  CHECK(oracle::block_mean({leaves.begin(), leaves.end()}, 6, 0)[0] == doctest::Approx(0.0).epsilon(1e-15));
  // Increment variance dt on every node.
  for (int k = 0; k < 6; ++k)
    for (std::size_t j = 0; j < ScenarioTree::width(k); ++j) {
      const double du = b6(k + 1, ScenarioTree::up(j)) - b6(k, j);
      const double dd = b6(k + 1, ScenarioTree::down(j)) - b6(k, j);
      CHECK(0.5 * (du + dd) == doctest::Approx(0.0).epsilon(1e-15));
      CHECK(0.5 * (du * du + dd * dd) == doctest::Approx(t6.dt()).epsilon(1e-14));
    }
  for (std::size_t leaf = 0; leaf < t6.leaf_count(); ++leaf)
    CHECK(b6(6, leaf) == doctest::Approx(oracle::brownian_leaf(t6, leaf)).epsilon(1e-14));
}

TEST_CASE("conditional expectation") {
  const auto t = build_tree(2, 0.5);
  const auto b = brownian(t);
  const TerminalPayoff b2(t, {1.0, 0.0, 0.0, -1.0});
  const auto e1 = cond_expectation(t, b2, 1);
  CHECK(e1[0] == 0.5);
  CHECK(e1[1] == -0.5);
  const TerminalPayoff sq(t, {1.0, 0.0, 0.0, 1.0});
  CHECK(cond_expectation(t, sq, 0)[0] == 0.5);
  const TerminalPayoff c(t, {3.25, 3.25, 3.25, 3.25});
  for (int k = 0; k <= 2; ++k)
    for (double v : cond_expectation(t, c, k)) CHECK(v == 3.25);

  std::mt19937_64 rng(7);
  const auto t8 = build_tree(8, 1.3);
  for (int trial = 0; trial < 20; ++trial) {
    const auto v = oracle::gaussian_leaves(t8, rng, 3.0);
    const TerminalPayoff x(t8, v);
    for (int t2 = 0; t2 <= 8; ++t2) {
      const auto e2 = cond_expectation(t8, x, t2);
      const auto brute = oracle::block_mean(v, 8, t2);
      for (std::size_t j = 0; j < e2.size(); ++j) CHECK(e2[j] == doctest::Approx(brute[j]).epsilon(1e-12));
      for (int t1 = 0; t1 <= t2; ++t1) {
        // Tower property holds bit for bit.
        CHECK(cond_expectation(e2, t2, t1) == cond_expectation(t8, x, t1));
      }
    }
  }
  CHECK_THROWS(cond_expectation(t, b2, 3));
}

TEST_CASE("martingale representation") {
  const auto t = build_tree(2, 0.5);
  const auto rb = martingale_representation(t, TerminalPayoff(t, {1.0, 0.0, 0.0, -1.0}));
  CHECK(rb.martingale(0, 0) == 0.0);
  for (int k = 0; k < 2; ++k)
    for (std::size_t j = 0; j < ScenarioTree::width(k); ++j) CHECK(rb.integrand(k, j) == 1.0);

  const auto rs = martingale_representation(t, TerminalPayoff(t, {1.0, 0.0, 0.0, 1.0}));
  CHECK(rs.martingale(0, 0) == 0.5);
  CHECK(rs.integrand(0, 0) == 0.0);
  CHECK(rs.integrand(1, 0) == 1.0);
  CHECK(rs.integrand(1, 1) == -1.0);

  // F_2-measurable payoff on a 5-step tree: no integrand after level 2.
  const auto t5 = build_tree(5, 1.0);
  const auto lifted = TerminalPayoff::lift(t5, 2, std::vector<double>{1.0, -2.0, 0.5, 4.0});
  const auto rl = martingale_representation(t5, lifted);
  for (int k = 2; k < 5; ++k)
    for (std::size_t j = 0; j < ScenarioTree::width(k); ++j) CHECK(rl.integrand(k, j) == 0.0);

  // Path-wise reconstruction X = E[X] + sum sigma dB.
  std::mt19937_64 rng(11);
  const auto t7 = build_tree(7, 0.9);
  for (int trial = 0; trial < 10; ++trial) {
    const auto v = oracle::gaussian_leaves(t7, rng);
    const auto rep = martingale_representation(t7, TerminalPayoff(t7, v));
    for (std::size_t leaf = 0; leaf < v.size(); ++leaf) {
      double x = rep.martingale(0, 0);
      for (int k = 0; k < 7; ++k) {
        const std::size_t node = ScenarioTree::ancestor(leaf, 7, k);
        const double db = oracle::moved_down(leaf, 7, k) ? -t7.sqrt_dt() : t7.sqrt_dt();
        x += rep.integrand(k, node) * db;
      }
      CHECK(oracle::rel_err(x, v[leaf]) <= 1e-12);
    }
  }
}

TEST_CASE("doleans exponential") {
  const auto t = build_tree(2, 0.5);
  const auto one = doleans_exponential(t, PredictableProcess(t));
  for (int k = 0; k <= 2; ++k)
    for (double v : one.level(k)) CHECK(v == 1.0);

  const auto e = doleans_exponential(t, PredictableProcess(t, 1, 0.5));
  CHECK(e(2, 0) == 1.5625);
  CHECK(e(2, 1) == 0.9375);
  CHECK(e(2, 2) == 0.9375);
  CHECK(e(2, 3) == 0.5625);
  CHECK(cond_expectation(e, 2, 0)[0] == 1.0);

  CHECK_THROWS_AS(doleans_exponential(t, PredictableProcess(t, 1, 4.0)), PositivityError);
  try {
    doleans_exponential(t, PredictableProcess(t, 1, 4.0));
  } catch (const PositivityError& err) {
    CHECK(err.level() == 0);
    CHECK(err.bound() == 2.0);
  }

  // Started later: identically one before the start level.
  const auto t6 = build_tree(6, 1.0);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  PredictableProcess phi(t6);
  for (int k = 0; k < 6; ++k)
    for (std::size_t j = 0; j < ScenarioTree::width(k); ++j) phi(k, j) = u(rng);
  for (int start = 0; start <= 6; ++start) {
    const auto d = doleans_exponential(t6, phi, start);
    for (int k = 0; k <= start; ++k)
      for (double v : d.level(k)) CHECK(v == 1.0);
    for (int k = 0; k <= 6; ++k) {
      for (double v : d.level(k)) CHECK(v > 0.0);
      for (double m : cond_expectation(d, k, 0)) CHECK(std::abs(m - 1.0) <= 1e-12);
    }
    // Martingale on every node.
    for (int k = 0; k < 6; ++k)
      for (std::size_t j = 0; j < ScenarioTree::width(k); ++j)
        CHECK(std::abs(0.5 * (d(k + 1, 2 * j) + d(k + 1, 2 * j + 1)) - d(k, j)) <= 1e-12 * d(k, j));
  }
}

TEST_CASE("stochastic integral") {
  const auto t = build_tree(2, 0.5);
  const auto b = brownian(t);
  const auto ib = stochastic_integral(t, PredictableProcess(t, 1, 1.0), b);
  const auto i3 = stochastic_integral(t, PredictableProcess(t, 1, 3.0), b);
  for (int k = 0; k <= 2; ++k)
    for (std::size_t j = 0; j < ScenarioTree::width(k); ++j) {
      CHECK(ib(k, j) == b(k, j));
      CHECK(i3(k, j) == 3.0 * b(k, j));
    }
  // H = B lagged one step.
  PredictableProcess h(t);
  for (int k = 0; k < 2; ++k)
    for (std::size_t j = 0; j < ScenarioTree::width(k); ++j) h(k, j) = b(k, j);
  const auto ih = stochastic_integral(t, h, b);
  CHECK(ih(2, 0) == 0.25);   // uu: 0 * 0.5 + 0.5 * 0.5
  CHECK(ih(2, 1) == -0.25);  // ud: 0.5 * -0.5
  CHECK(ih(2, 2) == -0.25);  // du: -0.5 * 0.5
  CHECK(ih(2, 3) == 0.25);   // dd: -0.5 * -0.5
  CHECK_THROWS_AS(stochastic_integral(t, PredictableProcess(t, 2), b), std::invalid_argument);
}
