#include "dynrisk/measures.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "dynrisk/bsde.hpp"

namespace dynrisk {

namespace {

void check_level(const ScenarioTree& tree, int level, const char* who) {
  if (level < 0 || level > tree.steps())
    throw std::invalid_argument(std::string(who) + ": level " + std::to_string(level) +
                                " out of range 0.." + std::to_string(tree.steps()));
}

TerminalPayoff negated(const ScenarioTree& tree, const TerminalPayoff& x) {
  std::vector<double> v(x.values().begin(), x.values().end());
  for (double& e : v) e = -e;
  return TerminalPayoff(tree, std::move(v));
}

double max_abs(const std::vector<double>& v) {
  double m = 0.0;
  for (double e : v) m = std::max(m, std::abs(e));
  return m;
}

}  // namespace

std::string to_string(MeasureKind kind) {
  return kind == MeasureKind::coherent ? "coherent" : "deviation";
}

MeasureResult coherent(const ScenarioTree& tree, const TerminalPayoff& x,
                       const RiskEnvelope& envelope, int level) {
  check_level(tree, level, "coherent");
  require_valid(envelope, tree);
  MeasureResult r{level, {}, MeasureKind::coherent, envelope.describe()};
  const auto loss = negated(tree, x);
  switch (envelope.kind()) {
    case RiskEnvelope::Kind::kernel_generated:
      r.values = g_expectation(tree, loss, envelope.driver(), level);
      break;
    case RiskEnvelope::Kind::cvar: {
      const auto q = cvar_worst_density(tree, x, envelope.cvar_level(), level);
      std::vector<double> weighted(tree.leaf_count());
      for (std::size_t i = 0; i < weighted.size(); ++i) weighted[i] = loss[i] * q[i];
      r.values = cond_expectation(weighted, tree.steps(), level);
      break;
    }
    case RiskEnvelope::Kind::reference_only:
      r.values = cond_expectation(tree, loss, level);
      break;
  }
  return r;
}

MeasureResult deviation(const ScenarioTree& tree, const TerminalPayoff& x,
                        const RiskEnvelope& envelope, int level) {
  return deviation_from_coherent(tree, x, coherent(tree, x, envelope, level));
}

MeasureResult deviation_from_coherent(const ScenarioTree& tree, const TerminalPayoff& x,
                                      const MeasureResult& c) {
  if (c.kind != MeasureKind::coherent)
    throw std::invalid_argument("deviation_from_coherent: input is not a coherent result");
  const auto mean = cond_expectation(tree, x, c.level);
  if (mean.size() != c.values.size())
    throw std::invalid_argument("deviation_from_coherent: value count does not match level");
  MeasureResult d{c.level, c.values, MeasureKind::deviation, c.envelope};
  for (std::size_t j = 0; j < mean.size(); ++j) d.values[j] += mean[j];
  return d;
}

MeasureResult coherent_from_deviation(const ScenarioTree& tree, const TerminalPayoff& x,
                                      const MeasureResult& d) {
  if (d.kind != MeasureKind::deviation)
    throw std::invalid_argument("coherent_from_deviation: input is not a deviation result");
  const auto mean = cond_expectation(tree, x, d.level);
  if (mean.size() != d.values.size())
    throw std::invalid_argument("coherent_from_deviation: value count does not match level");
  MeasureResult c{d.level, d.values, MeasureKind::coherent, d.envelope};
  for (std::size_t j = 0; j < mean.size(); ++j) c.values[j] -= mean[j];
  return c;
}

void RecorderWeights::check_positivity() const {
  if (weights.empty()) throw std::domain_error("recorder weights: empty weight family");
  const auto& first = weights.front();
  for (const auto& w : weights)
    if (w.levels() != first.levels() || w.dim() != 1)
      throw std::invalid_argument("recorder weights: processes must be scalar and share one tree");
  for (int k = 0; k < first.levels(); ++k)
    for (std::size_t j = 0; j < ScenarioTree::width(k); ++j) {
      double lo = first(k, j);
      double hi = lo;
      for (const auto& w : weights) {
        lo = std::min(lo, w(k, j));
        hi = std::max(hi, w(k, j));
      }
      if (!(lo <= 0.0 && 0.0 <= hi))
        throw std::domain_error("recorder weights violate min K <= 0 <= max K at level " +
                                std::to_string(k) + ", node " + std::to_string(j));
    }
}

std::vector<double> volatility_recorder(const ScenarioTree& tree, const TerminalPayoff& x,
                                        const RecorderWeights& weights, int level) {
  check_level(tree, level, "volatility_recorder");
  weights.check_positivity();
  if (weights.weights.front().levels() != tree.steps())
    throw std::invalid_argument("volatility_recorder: weights built on a different tree");
  const auto rep = martingale_representation(tree, x);
  const int n = tree.steps();
  std::vector<double> acc(tree.leaf_count(), 0.0);
  for (int k = n - 1; k >= level; --k) {
    std::vector<double> next(ScenarioTree::width(k));
    for (std::size_t j = 0; j < next.size(); ++j) {
      const double s = rep.integrand(k, j);
      double r = weights.weights.front()(k, j) * s;
      for (const auto& w : weights.weights) r = std::max(r, w(k, j) * s);
      next[j] = r * tree.dt() + 0.5 * (acc[ScenarioTree::up(j)] + acc[ScenarioTree::down(j)]);
    }
    acc = std::move(next);
  }
  return acc;
}

RecorderWeights recorder_weights_from_kernels(const ScenarioTree& tree,
                                              const std::vector<PredictableProcess>& kernels,
                                              int start_level) {
  RecorderWeights out;
  for (const auto& phi : kernels) {
    const auto e = doleans_exponential(tree, phi, start_level);
    PredictableProcess k(tree);
    for (int lv = 0; lv < tree.steps(); ++lv)
      for (std::size_t j = 0; j < ScenarioTree::width(lv); ++j) k(lv, j) = -phi(lv, j) * e(lv, j);
    out.weights.push_back(std::move(k));
  }
  return out;
}

RecorderWeights recorder_weights_from_kernels(const ScenarioTree& tree, const KernelSet& kernels,
                                              const PredictableProcess* selected,
                                              int start_level) {
  // Vertex i of every node, repeating the last vertex where a node has fewer.
  std::size_t count = 1;
  for (int k = 0; k < tree.steps(); ++k)
    for (std::size_t j = 0; j < ScenarioTree::width(k); ++j)
      count = std::max(count, kernels.vertices(k, j).size());
  std::vector<PredictableProcess> phis(count, PredictableProcess(tree));
  for (int k = 0; k < tree.steps(); ++k)
    for (std::size_t j = 0; j < ScenarioTree::width(k); ++j) {
      const auto v = kernels.vertices(k, j);
      for (std::size_t i = 0; i < count; ++i) phis[i](k, j) = v[std::min(i, v.size() - 1)];
    }
  if (selected) phis.push_back(*selected);
  return recorder_weights_from_kernels(tree, phis, start_level);
}

MeasureFamily MeasureFamily::coherent(const RiskEnvelope& envelope) {
  return {"coherent " + envelope.describe(), MeasureKind::coherent,
          [envelope](const ScenarioTree& tree, const TerminalPayoff& x, int level) {
            return dynrisk::coherent(tree, x, envelope, level).values;
          }};
}

MeasureFamily MeasureFamily::deviation(const RiskEnvelope& envelope) {
  return {"deviation " + envelope.describe(), MeasureKind::deviation,
          [envelope](const ScenarioTree& tree, const TerminalPayoff& x, int level) {
            return dynrisk::deviation(tree, x, envelope, level).values;
          }};
}

double ConsistencyResidual::max_coherent() const { return max_abs(coherent); }
double ConsistencyResidual::max_deviation() const { return max_abs(deviation); }

ConsistencyResidual time_consistency_check(const ScenarioTree& tree, const RiskEnvelope& envelope,
                                           const TerminalPayoff& x, int s, int t) {
  check_level(tree, s, "time_consistency_check");
  check_level(tree, t, "time_consistency_check");
  if (s > t) throw std::invalid_argument("time_consistency_check: need s <= t");
  ConsistencyResidual r{s, t, {}, {}};

  const auto cs = coherent(tree, x, envelope, s).values;
  auto ct = coherent(tree, x, envelope, t).values;
  for (double& v : ct) v = -v;
  const auto nested = coherent(tree, TerminalPayoff::lift(tree, t, ct), envelope, s).values;
  r.coherent.resize(cs.size());
  for (std::size_t j = 0; j < cs.size(); ++j) r.coherent[j] = cs[j] - nested[j];

  const auto ds = deviation(tree, x, envelope, s).values;
  const auto dt = deviation(tree, x, envelope, t).values;
  const auto dt_mean = cond_expectation(dt, t, s);
  auto shifted = cond_expectation(tree, x, t);
  for (std::size_t j = 0; j < shifted.size(); ++j) shifted[j] -= dt[j];
  const auto dnested = deviation(tree, TerminalPayoff::lift(tree, t, shifted), envelope, s).values;
  r.deviation.resize(ds.size());
  for (std::size_t j = 0; j < ds.size(); ++j) r.deviation[j] = ds[j] - dt_mean[j] - dnested[j];
  return r;
}

}  // namespace dynrisk
