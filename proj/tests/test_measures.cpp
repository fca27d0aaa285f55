#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "dynrisk/bsde.hpp"
#include "dynrisk/measures.hpp"
#include "oracles.hpp"

using namespace dynrisk;

namespace {

TerminalPayoff brownian_payoff(const ScenarioTree& t) {
  const auto b = brownian(t);
  return TerminalPayoff(t, oracle::vec(b.level(t.steps())));
}

}  // namespace

TEST_CASE("coherent and deviation values") {
  const auto kappa = RiskEnvelope::kappa(0.5);
  for (int n : {2, 4, 8}) {
    const auto t = build_tree(n, 0.5);
    const auto x = brownian_payoff(t);
    CHECK(coherent(t, x, kappa, 0).values[0] == doctest::Approx(0.25).epsilon(1e-13));
    CHECK(deviation(t, x, kappa, 0).values[0] == doctest::Approx(0.25).epsilon(1e-13));
    for (double v : deviation(t, x, RiskEnvelope::reference_only(), 0).values) CHECK(v == 0.0);
  }

  const auto t = build_tree(2, 0.5);
  const TerminalPayoff x(t, {2.0, 1.0, -1.0, -2.0});
  const auto cvar = RiskEnvelope::cvar(0.5);
  CHECK(coherent(t, x, cvar, 0).values[0] == 1.5);
  const auto c1 = coherent(t, x, cvar, 1);
  CHECK(c1.values[0] == -1.0);
  CHECK(c1.values[1] == 2.0);
  CHECK(coherent(t, x, RiskEnvelope::reference_only(), 0).values[0] == 0.0);

  // Deviation of an F_t-measurable payoff vanishes at t.
  std::mt19937_64 rng(2);
  const auto t6 = build_tree(6, 1.0);
  for (int level = 0; level <= 6; ++level) {
    const auto v = oracle::gaussian_leaves(t6, rng);
    const auto xt = TerminalPayoff::lift(t6, level, oracle::block_mean(v, 6, level));
    for (const auto& env : {kappa, cvar})
      for (double d : deviation(t6, xt, env, level).values) CHECK(std::abs(d) <= 1e-12);
  }
  CHECK_THROWS_AS(coherent(t, x, RiskEnvelope::interval(1.0, 2.0), 0), EnvelopeError);
}

TEST_CASE("conditional cvar matches the Rockafellar-Uryasev minimum") {
  std::mt19937_64 rng(13);
  const auto t = build_tree(6, 1.0);
  for (double lambda : {0.1, 0.25, 0.3, 0.5, 0.77, 1.0})
    for (int trial = 0; trial < 10; ++trial) {
      const auto v = oracle::gaussian_leaves(t, rng);
      const TerminalPayoff x(t, v);
      for (int level = 0; level <= 6; ++level) {
        const auto c = coherent(t, x, RiskEnvelope::cvar(lambda), level);
        const std::size_t block = std::size_t{1} << (6 - level);
        for (std::size_t j = 0; j < c.values.size(); ++j) {
          const std::vector<double> sub(v.begin() + j * block, v.begin() + (j + 1) * block);
          CHECK(c.values[j] == doctest::Approx(oracle::ru_cvar(sub, lambda)).epsilon(1e-12));
        }
      }
    }
}

TEST_CASE("correspondence round trip") {
  std::mt19937_64 rng(17);
  const auto t = build_tree(5, 1.0);
  for (const auto& env : {RiskEnvelope::kappa(0.4), RiskEnvelope::cvar(0.3)})
    for (int trial = 0; trial < 20; ++trial) {
      const TerminalPayoff x(t, oracle::gaussian_leaves(t, rng));
      for (int level = 0; level <= 5; ++level) {
        const auto d = deviation(t, x, env, level);
        const auto c = coherent_from_deviation(t, x, d);
        const auto c_direct = coherent(t, x, env, level);
        const auto back = deviation_from_coherent(t, x, c);
        for (std::size_t j = 0; j < d.values.size(); ++j) {
          CHECK(std::abs(back.values[j] - d.values[j]) <= 1e-12);
          CHECK(std::abs(c.values[j] - c_direct.values[j]) <= 1e-12);
        }
        // Deviation dominates zero since the reference density is a candidate.
        for (double v : d.values) CHECK(v >= -1e-12);
      }
    }
}

TEST_CASE("volatility recorder") {
  const auto t = build_tree(2, 0.5);
  const auto x = brownian_payoff(t);
  RecorderWeights half{{PredictableProcess(t, 1, 0.5), PredictableProcess(t, 1, -0.5)}};
  CHECK(volatility_recorder(t, x, half, 0)[0] == doctest::Approx(0.25).epsilon(1e-14));
  RecorderWeights none{{PredictableProcess(t)}};
  CHECK(volatility_recorder(t, x, none, 0)[0] == 0.0);

  const auto kw = recorder_weights_from_kernels(t, {PredictableProcess(t, 1, -0.5)});
  REQUIRE(kw.weights.size() == 1);
  CHECK(kw.weights[0](0, 0) == 0.5);
  CHECK(kw.weights[0](1, 0) == 0.375);
  CHECK(kw.weights[0](1, 1) == 0.625);
  const auto zw = recorder_weights_from_kernels(t, {PredictableProcess(t)});
  for (int k = 0; k < 2; ++k)
    for (std::size_t j = 0; j < ScenarioTree::width(k); ++j) CHECK(zw.weights[0](k, j) == -0.0);

  RecorderWeights bad{{PredictableProcess(t, 1, 0.5)}};
  CHECK_THROWS_AS(bad.check_positivity(), std::domain_error);

  // The worst-case weight alone carries the deviation in expectation; the
  // node-wise maximum over a larger family can only record more.
  std::mt19937_64 rng(5);
  const auto t5 = build_tree(5, 0.8);
  const auto kappa = RiskEnvelope::kappa(0.5);
  for (int trial = 0; trial < 20; ++trial) {
    const auto v = oracle::gaussian_leaves(t5, rng);
    const TerminalPayoff xr(t5, v);
    std::vector<double> minus;
    for (double e : v) minus.push_back(-e);
    const auto sol = solve_tree(t5, TerminalPayoff(t5, minus), kappa.driver());
    const auto khat = recorder_weights_from_kernels(t5, {sol.kernel}).weights[0];
    const auto rep = martingale_representation(t5, xr);
    double linear = 0.0;
    for (int k = 0; k < 5; ++k)
      for (std::size_t j = 0; j < ScenarioTree::width(k); ++j)
        linear += ScenarioTree::probability(k) * khat(k, j) * rep.integrand(k, j) * t5.dt();
    const double dev0 = deviation(t5, xr, kappa, 0).values[0];
    CHECK(linear == doctest::Approx(dev0).epsilon(1e-12));
    for (int level = 0; level <= 5; ++level) {
      const auto w = recorder_weights_from_kernels(t5, kappa.kernels(), &sol.kernel, level);
      const auto rec = volatility_recorder(t5, xr, w, level);
      const auto dev = deviation(t5, xr, kappa, level).values;
      for (std::size_t j = 0; j < rec.size(); ++j) CHECK(rec[j] >= dev[j] - 1e-12);
    }
  }
  for (int n : {2, 4, 8}) {
    const auto tb = build_tree(n, 0.5);
    const auto xb = brownian_payoff(tb);
    std::vector<double> minus;
    for (double e : xb.values()) minus.push_back(-e);
    const auto sol = solve_tree(tb, TerminalPayoff(tb, minus), kappa.driver());
    const auto w = recorder_weights_from_kernels(tb, kappa.kernels(), &sol.kernel);
    CHECK(volatility_recorder(tb, xb, w, 0)[0] == doctest::Approx(0.25).epsilon(1e-13));
  }
  const auto xt = TerminalPayoff::lift(t5, 3, std::vector<double>{1, 2, 3, 4, 5, 6, 7, 8});
  const auto w = recorder_weights_from_kernels(t5, kappa.kernels(), nullptr, 3);
  for (double v : volatility_recorder(t5, xt, w, 3)) CHECK(v == 0.0);
}

TEST_CASE("axiom suite") {
  const auto t = build_tree(6, 1.0);
  for (const auto& fam : {MeasureFamily::coherent(RiskEnvelope::kappa(0.5)),
                          MeasureFamily::deviation(RiskEnvelope::kappa(0.5)),
                          MeasureFamily::coherent(RiskEnvelope::cvar(0.5)),
                          MeasureFamily::deviation(RiskEnvelope::cvar(0.5))}) {
    const auto r = axiom_suite(fam, t, 42, 100);
    CHECK(r.total_violations() == 0);
    CHECK(r.axioms.size() == 4);
    for (const auto& a : r.axioms) CHECK(a.applicable > 0);
  }

  // Deviation minus a constant breaks translation insensitivity on constants.
  auto broken = MeasureFamily::deviation(RiskEnvelope::kappa(0.5));
  const auto inner = broken.evaluate;
  broken.evaluate = [inner](const ScenarioTree& tr, const TerminalPayoff& x, int level) {
    auto v = inner(tr, x, level);
    for (double& d : v) d -= 1.0;
    return v;
  };
  const auto r = axiom_suite(broken, t, 42, 50);
  bool d2 = false;
  for (const auto& a : r.axioms)
    if (a.axiom == "D2't") d2 = a.violations > 0;
  CHECK(d2);
  const auto again = axiom_suite(broken, t, 42, 50);
  CHECK(again.total_violations() == r.total_violations());
}

TEST_CASE("time consistency") {
  std::mt19937_64 rng(31);
  const auto t = build_tree(6, 1.0);
  const auto kappa = RiskEnvelope::kappa(0.5);
  for (int trial = 0; trial < 10; ++trial) {
    const TerminalPayoff x(t, oracle::gaussian_leaves(t, rng));
    for (int s = 0; s <= 6; ++s)
      for (int u = s; u <= 6; ++u) {
        const auto r = time_consistency_check(t, kappa, x, s, u);
        CHECK(r.max_coherent() <= 1e-12);
        CHECK(r.max_deviation() <= 1e-12);
      }
  }
  const auto t2 = build_tree(2, 0.5);
  const TerminalPayoff x(t2, {2.0, 1.0, -1.0, -2.0});
  const auto r = time_consistency_check(t2, RiskEnvelope::cvar(0.5), x, 0, 1);
  CHECK(r.max_coherent() == 0.5);

  const auto fs = TerminalPayoff::lift(t2, 0, std::vector<double>{3.0});
  const auto rf = time_consistency_check(t2, RiskEnvelope::cvar(0.5), fs, 0, 1);
  CHECK(rf.max_coherent() == 0.0);
  CHECK(rf.max_deviation() == 0.0);
}
