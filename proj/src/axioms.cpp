#include <algorithm>
#include <cmath>
#include <random>

#include "dynrisk/measures.hpp"

namespace dynrisk {

namespace {

class Tally {
 public:
  Tally(std::string name, double tol) : stat_{std::move(name), 0, 0, 0.0}, tol_(tol) {}

  void check(double residual, double scale) {
    ++stat_.applicable;
    stat_.max_residual = std::max(stat_.max_residual, residual);
    if (!(residual <= tol_ * (1.0 + scale))) ++stat_.violations;
  }
  const AxiomStat& stat() const { return stat_; }

 private:
  AxiomStat stat_;
  double tol_;
};

std::vector<double> gaussian(std::mt19937_64& rng, std::size_t n) {
  std::normal_distribution<double> g;
  std::vector<double> v(n);
  for (double& e : v) e = g(rng);
  return v;
}

double amax(std::initializer_list<double> xs) {
  double m = 0.0;
  for (double x : xs) m = std::max(m, std::abs(x));
  return m;
}

}  // namespace

std::size_t AxiomReport::total_violations() const {
  std::size_t n = 0;
  for (const auto& a : axioms) n += a.violations;
  return n;
}

AxiomReport axiom_suite(const MeasureFamily& family, const ScenarioTree& tree,
                        std::uint64_t seed, int trials, double tolerance) {
  if (trials < 1) throw std::invalid_argument("axiom_suite: trials must be >= 1");
  const bool coherent = family.kind == MeasureKind::coherent;
  Tally m1("M1t", tolerance), m2("M2t", tolerance);
  Tally a3(coherent ? "C1t" : "D1t", tolerance), a4(coherent ? "C2t" : "D2't", tolerance);
  const int n = tree.steps();
  const std::size_t leaves = tree.leaf_count();

  for (int trial = 0; trial < trials; ++trial) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(trial)};
    std::mt19937_64 rng(seq);
    const int t = std::uniform_int_distribution<int>(0, n)(rng);
    const std::size_t width = ScenarioTree::width(t);

    const auto xv = gaussian(rng, leaves);
    const auto yv = gaussian(rng, leaves);
    const auto cv = gaussian(rng, width);
    auto lam = gaussian(rng, width);
    for (double& l : lam) l = std::exp(l);
    auto noise = gaussian(rng, leaves);

    const TerminalPayoff x(tree, xv);
    const TerminalPayoff y(tree, yv);
    const auto c = TerminalPayoff::lift(tree, t, cv);
    const auto l = TerminalPayoff::lift(tree, t, lam);
    std::vector<double> sum(leaves), scaled(leaves), shifted(leaves), above(leaves);
    for (std::size_t i = 0; i < leaves; ++i) {
      sum[i] = xv[i] + yv[i];
      scaled[i] = l[i] * xv[i];
      shifted[i] = xv[i] + c[i];
      above[i] = xv[i] + std::abs(noise[i]);
    }

    const auto rx = family.evaluate(tree, x, t);
    const auto ry = family.evaluate(tree, y, t);
    const auto rsum = family.evaluate(tree, TerminalPayoff(tree, sum), t);
    const auto rzero = family.evaluate(tree, TerminalPayoff(tree, std::vector<double>(leaves, 0.0)), t);
    const auto rscaled = family.evaluate(tree, TerminalPayoff(tree, scaled), t);
    const auto rshift = family.evaluate(tree, TerminalPayoff(tree, shifted), t);
    const auto rabove = coherent ? family.evaluate(tree, TerminalPayoff(tree, above), t)
                                 : std::vector<double>{};

    for (std::size_t j = 0; j < width; ++j) {
      m1.check(std::max(0.0, rsum[j] - rx[j] - ry[j]), amax({rsum[j], rx[j], ry[j]}));
      m2.check(std::abs(rzero[j]), 0.0);
      m2.check(std::abs(rscaled[j] - lam[j] * rx[j]), amax({rscaled[j], lam[j] * rx[j]}));
      if (coherent) {
        a3.check(std::max(0.0, rabove[j] - rx[j]), amax({rabove[j], rx[j]}));
        a4.check(std::abs(rshift[j] - (rx[j] - cv[j])), amax({rshift[j], rx[j], cv[j]}));
      } else {
        a3.check(std::abs(rshift[j] - rx[j]), amax({rshift[j], rx[j], cv[j]}));
        a4.check(std::max(0.0, -rx[j]), std::abs(rx[j]));
      }
    }
  }
  AxiomReport r;
  r.family = family.name;
  r.seed = seed;
  r.trials = trials;
  r.steps = n;
  r.tolerance = tolerance;
  r.axioms = {m1.stat(), m2.stat(), a3.stat(), a4.stat()};
  return r;
}

}  // namespace dynrisk
