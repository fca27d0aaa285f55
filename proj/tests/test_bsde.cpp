#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "dynrisk/bsde.hpp"
#include "dynrisk/monte_carlo.hpp"
#include "oracles.hpp"

using namespace dynrisk;

namespace {

TerminalPayoff minus_brownian(const ScenarioTree& t) {
  const auto b = brownian(t);
  std::vector<double> v;
  for (double x : b.level(t.steps())) v.push_back(-x);
  return TerminalPayoff(t, v);
}

}  // namespace

TEST_CASE("tree bsde closed form") {
  const auto kappa = Driver::from_kernels(KernelSet::kappa(0.5));
  for (int n : {1, 2, 4, 8, 16}) {
    const auto t = build_tree(n, 0.5);
    const auto b = brownian(t);
    const auto sol = solve_tree(t, minus_brownian(t), kappa);
    CHECK(sol.value(0, 0) == doctest::Approx(0.25).epsilon(1e-13));
    for (int k = 0; k <= n; ++k)
      for (std::size_t j = 0; j < ScenarioTree::width(k); ++j) {
        CHECK(sol.value(k, j) == doctest::Approx(-b(k, j) + 0.5 * (0.5 - k * t.dt())).epsilon(1e-12));
        if (k < n) {
          CHECK(sol.integrand(k, j) == doctest::Approx(-1.0).epsilon(1e-13));
          CHECK(sol.kernel(k, j) == -0.5);
        }
      }
    const auto zero = solve_tree(t, minus_brownian(t), Driver::zero());
    CHECK(std::abs(zero.value(0, 0)) <= 1e-14);
  }

  const auto t = build_tree(4, 0.5);
  const auto c = solve_tree(t, TerminalPayoff(t, std::vector<double>(16, 2.5)), kappa);
  for (int k = 0; k <= 4; ++k)
    for (std::size_t j = 0; j < ScenarioTree::width(k); ++j) {
      CHECK(c.value(k, j) == 2.5);
      if (k < 4) CHECK(c.integrand(k, j) == 0.0);
    }
  const auto g = g_expectation(t, minus_brownian(t), kappa, 2);
  const auto b = brownian(t);
  for (std::size_t j = 0; j < g.size(); ++j) CHECK(g[j] == doctest::Approx(-b(2, j) + 0.125).epsilon(1e-13));
}

TEST_CASE("one-step identity against brute force") {
  std::mt19937_64 rng(4);
  const auto t = build_tree(6, 0.9);
  const auto kernels = KernelSet::interval(-0.3, 0.8);
  const auto d = Driver::from_kernels(kernels);
  for (int trial = 0; trial < 20; ++trial) {
    const auto v = oracle::gaussian_leaves(t, rng, 2.0);
    const auto sol = solve_tree(t, TerminalPayoff(t, v), d);
    for (int k = 0; k < 6; ++k)
      for (std::size_t j = 0; j < ScenarioTree::width(k); ++j) {
        const double yu = sol.value(k + 1, 2 * j), yd = sol.value(k + 1, 2 * j + 1);
        const double z = (yu - yd) / (2.0 * t.sqrt_dt());
        const double g = std::max(-0.3 * z, 0.8 * z);
        CHECK(sol.value(k, j) == doctest::Approx(0.5 * (yu + yd) + g * t.dt()).epsilon(1e-14));
        // Worst one-step density: max over the two endpoint measure changes.
        double best = -1e300;
        for (double phi : {-0.3, 0.8})
          best = std::max(best, 0.5 * (1 + phi * t.sqrt_dt()) * yu + 0.5 * (1 - phi * t.sqrt_dt()) * yd);
        CHECK(sol.value(k, j) == doctest::Approx(best).epsilon(1e-13));
      }
  }
}

TEST_CASE("g-expectation comparison and recursiveness") {
  std::mt19937_64 rng(8);
  std::exponential_distribution<double> e;
  const auto t = build_tree(7, 1.0);
  const auto d = Driver::from_kernels(KernelSet::kappa(0.6));
  for (int trial = 0; trial < 20; ++trial) {
    const auto v = oracle::gaussian_leaves(t, rng);
    auto w = v;
    for (double& x : w) x += e(rng);
    const TerminalPayoff x(t, v), y(t, w);
    for (int level = 0; level <= 7; ++level) {
      const auto gx = g_expectation(t, x, d, level);
      const auto gy = g_expectation(t, y, d, level);
      for (std::size_t j = 0; j < gx.size(); ++j) CHECK(gx[j] <= gy[j]);
      const auto inner = TerminalPayoff::lift(t, level, gx);
      for (int s = 0; s <= level; ++s) {
        const auto outer = g_expectation(t, inner, d, s);
        const auto direct = g_expectation(t, x, d, s);
        for (std::size_t j = 0; j < outer.size(); ++j) CHECK(std::abs(outer[j] - direct[j]) <= 1e-12);
      }
      // An F_level-measurable payoff is its own g-expectation at level.
      const auto self = g_expectation(t, inner, d, level);
      for (std::size_t j = 0; j < self.size(); ++j) CHECK(self[j] == gx[j]);
    }
    // Zero driver is the plain conditional expectation.
    for (int level = 0; level <= 7; ++level) {
      const auto a = g_expectation(t, x, Driver::zero(), level);
      const auto b = oracle::block_mean(v, 7, level);
      for (std::size_t j = 0; j < a.size(); ++j) CHECK(a[j] == doctest::Approx(b[j]).epsilon(1e-12));
    }
  }
}

TEST_CASE("path simulation") {
  const auto a = simulate_paths(42, 50, 20000, 0.5);
  const auto b = simulate_paths(42, 50, 20000, 0.5);
  CHECK(a.increments == b.increments);
  const auto c = simulate_paths(43, 50, 20000, 0.5);
  CHECK(a.increments != c.increments);
  double mean = 0.0, var = 0.0;
  for (double x : a.increments) {
    mean += x;
    var += x * x;
  }
  const double n = double(a.increments.size());
  mean /= n;
  var = var / n - mean * mean;
  CHECK(std::abs(mean) <= 5.0 * std::sqrt(a.dt / n));
  CHECK(var == doctest::Approx(a.dt).epsilon(0.01));
  const auto path = a.brownian_path(3);
  CHECK(path.size() == 51);
  CHECK(path[0] == 0.0);

  const auto tiny = simulate_paths(1, 1, 2, 1.0);
  CHECK(tiny.path_count == 2);
  CHECK(tiny.steps == 1);
  CHECK_THROWS_AS(simulate_paths(1, 1000, 100000, 1.0), CapacityError);
  CHECK_THROWS(simulate_paths(1, 0, 10, 1.0));
}

TEST_CASE("monte carlo backend") {
  const auto basis = RegressionBasis::polynomial(2);
  const auto kappa = Driver::from_kernels(KernelSet::kappa(0.5));
  const auto ens = simulate_paths(7, 20, 20000, 0.5);

  const auto c = solve_mc(ens, [](std::span<const double>) { return 1.75; }, kappa, basis);
  CHECK(std::abs(c.y0 - 1.75) <= 1e-12);

  const auto minus_b = [](std::span<const double> p) { return -p.back(); };
  const auto z = solve_mc(ens, minus_b, Driver::zero(), basis);
  CHECK(std::abs(z.y0) <= 4.0 * z.standard_error + 1e-12);

  const auto k = solve_mc(ens, minus_b, kappa, basis);
  CHECK(k.standard_error > 0.0);
  CHECK(std::abs(k.y0 - 0.25) <= 3.0 * k.standard_error + 0.0025);
  CHECK(k.batches == 20);
  // Regression recovers Z = -1 on average.
  double zsum = 0.0;
  for (std::size_t p = 0; p < ens.path_count; ++p) zsum += k.integrand_at(p, 5);
  CHECK(zsum / double(ens.path_count) == doctest::Approx(-1.0).epsilon(0.05));

  // A second run is bit-identical.
  const auto again = solve_mc(ens, minus_b, kappa, basis);
  CHECK(again.y0 == k.y0);
  CHECK(again.standard_error == k.standard_error);

  const Driver node_dependent([](int, std::size_t node, double z) { return double(node) * z; },
                              [](int, std::size_t node, double) { return double(node); }, false);
  CHECK_THROWS_AS(solve_mc(ens, minus_b, node_dependent, basis), std::invalid_argument);
}
