#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "dynrisk/market.hpp"
#include "oracles.hpp"

using namespace dynrisk;

TEST_CASE("asset simulation") {
  const auto t = build_tree(4, 1.0);
  const auto b = brownian(t);
  const auto s = simulate_assets(t, AssetModel::constant({0.0}, {1.0}, {0.0}));
  for (int k = 0; k <= 4; ++k)
    for (std::size_t j = 0; j < ScenarioTree::width(k); ++j) CHECK(s(k, j) == b(k, j));

  const auto t2 = build_tree(2, 0.5);
  const auto drift_only = simulate_assets(t2, AssetModel::constant({1.0}, {0.0}, {0.0}));
  for (double v : drift_only.level(2)) CHECK(v == 0.5);

  const auto two = simulate_assets(t, AssetModel::constant({0.0, 0.0}, {1.0, 2.0}, {0.0, 0.0}));
  for (int k = 0; k <= 4; ++k)
    for (std::size_t j = 0; j < ScenarioTree::width(k); ++j) {
      CHECK(two(k, j, 0) == b(k, j));
      CHECK(two(k, j, 1) == 2.0 * two(k, j, 0));
    }

  CHECK_THROWS(AssetModel::constant({0.0, 1.0}, {1.0}, {0.0, 0.0}));
  const AssetModel bad(1, [](int, std::size_t) { return std::vector<double>{NAN}; },
                       [](int, std::size_t) { return std::vector<double>{1.0}; }, {0.0});
  CHECK_THROWS(bad.tabulate(t));
}

TEST_CASE("path-dependent coefficients") {
  const auto t = build_tree(3, 0.75);
  // Drift equal to the node index, diffusion 1 + level.
  const AssetModel m(1, [](int, std::size_t node) { return std::vector<double>{double(node)}; },
                     [](int level, std::size_t) { return std::vector<double>{1.0 + level}; }, {2.0});
  const auto s = simulate_assets(t, m);
  for (std::size_t leaf = 0; leaf < t.leaf_count(); ++leaf) {
    double expect = 2.0;
    for (int k = 0; k < 3; ++k) {
      const auto node = ScenarioTree::ancestor(leaf, 3, k);
      const double db = oracle::moved_down(leaf, 3, k) ? -t.sqrt_dt() : t.sqrt_dt();
      expect += double(node) * t.dt() + (1.0 + k) * db;
    }
    CHECK(s(3, leaf) == doctest::Approx(expect).epsilon(1e-14));
  }
}

TEST_CASE("wealth") {
  const auto t = build_tree(3, 0.6);
  const auto b = brownian(t);
  const auto unit = AssetModel::constant({0.0}, {1.0}, {0.0});
  const auto w = wealth(t, unit, Policy::constant(t, {1.0}), 0.0);
  for (int k = 0; k <= 3; ++k)
    for (std::size_t j = 0; j < ScenarioTree::width(k); ++j) CHECK(w.values(k, j) == b(k, j));

  const auto idle = wealth(t, unit, Policy::constant(t, {0.0}), 1.75);
  for (int k = 0; k <= 3; ++k)
    for (double v : idle.values.level(k)) CHECK(v == 1.75);

  const auto t2 = build_tree(2, 0.5);
  const auto w2 = wealth(t2, AssetModel::constant({0.0, 0.0}, {1.0, 2.0}, {0.0, 0.0}),
                         Policy::constant(t2, {1.0, 1.0}), 1.0);
  CHECK(w2.terminal(t2, 0) == 4.0);
  CHECK(w2.terminal(t2, 1) == 1.0);
  CHECK(w2.terminal(t2, 2) == 1.0);
  CHECK(w2.terminal(t2, 3) == -2.0);

  CHECK_THROWS(wealth(t2, unit, Policy::constant(t2, {1.0, 1.0}), 0.0));
  CHECK_THROWS(Policy::constant(t2, {NAN}));
}

TEST_CASE("wealth is linear in the policy") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g;
  const auto t = build_tree(5, 1.0);
  const auto model = AssetModel::per_level({{0.1, -0.2}, {0.3, 0.0}, {0.0, 0.5}, {1.0, 1.0}, {-0.4, 0.2}},
                                           {{1.0, 0.5}, {0.7, 1.2}, {1.1, -0.3}, {0.2, 0.9}, {1.0, 1.0}},
                                           {0.0, 0.0});
  PredictableProcess u(t, 2), v(t, 2), uv(t, 2);
  for (int k = 0; k < 5; ++k)
    for (std::size_t j = 0; j < ScenarioTree::width(k); ++j)
      for (std::size_t i = 0; i < 2; ++i) {
        u(k, j, i) = g(rng);
        v(k, j, i) = g(rng);
        uv(k, j, i) = u(k, j, i) + v(k, j, i);
      }
  const auto wu = wealth(t, model, Policy(u), 0.5);
  const auto wv = wealth(t, model, Policy(v), 0.25);
  const auto wuv = wealth(t, model, Policy(uv), 0.75);
  for (int k = 0; k <= 5; ++k)
    for (std::size_t j = 0; j < ScenarioTree::width(k); ++j)
      CHECK(wuv.values(k, j) == doctest::Approx(wu.values(k, j) + wv.values(k, j)).epsilon(1e-12));
}

TEST_CASE("indicator policy integrates the increments on its node set") {
  std::mt19937_64 rng(9);
  const auto t = build_tree(4, 0.8);
  const auto model = AssetModel::constant({0.3}, {1.4}, {0.0});
  std::bernoulli_distribution coin(0.4);
  for (int trial = 0; trial < 20; ++trial) {
    PredictableProcess u(t);
    std::vector<std::pair<int, std::size_t>> set;
    for (int k = 0; k < 4; ++k)
      for (std::size_t j = 0; j < ScenarioTree::width(k); ++j)
        if (coin(rng)) {
          u(k, j) = 1.0;
          set.emplace_back(k, j);
        }
    const auto w = wealth(t, model, Policy(u), 0.0);
    for (std::size_t leaf = 0; leaf < t.leaf_count(); ++leaf) {
      double expect = 0.0;
      for (const auto& [k, j] : set)
        if (ScenarioTree::ancestor(leaf, 4, k) == j)
          expect += 0.3 * t.dt() + 1.4 * (oracle::moved_down(leaf, 4, k) ? -t.sqrt_dt() : t.sqrt_dt());
      CHECK(w.terminal(t, leaf) == doctest::Approx(expect).epsilon(1e-12));
    }
  }
}
