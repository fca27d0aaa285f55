#include "dynrisk/tree.hpp"

#include <sstream>

namespace dynrisk {

namespace {

std::string positivity_message(int level, std::size_t node, double bound) {
  std::ostringstream os;
  os.precision(17);
  os << "density positivity violated at level " << level << ", node " << node
     << ": |phi| * sqrt(dt) = " << bound << " >= 1";
  return os.str();
}

}  // namespace

PositivityError::PositivityError(int level, std::size_t node, double bound)
    : std::domain_error(positivity_message(level, node, bound)),
      level_(level),
      node_(node),
      bound_(bound) {}

ScenarioTree::ScenarioTree(int steps, double horizon) {
  if (steps < 1) throw std::invalid_argument("tree steps must be >= 1");
  if (!(horizon > 0.0) || !std::isfinite(horizon))
    throw std::invalid_argument("tree horizon must be positive and finite");
  if (steps > kMaxTreeSteps)
    throw CapacityError("tree steps " + std::to_string(steps) + " exceed the limit of " +
                        std::to_string(kMaxTreeSteps));
  steps_ = steps;
  horizon_ = horizon;
  dt_ = horizon / steps;
  sqrt_dt_ = std::sqrt(dt_);
}

ScenarioTree build_tree(int steps, double horizon) { return ScenarioTree(steps, horizon); }

TerminalPayoff::TerminalPayoff(const ScenarioTree& tree, std::vector<double> values)
    : values_(std::move(values)) {
  if (values_.size() != tree.leaf_count())
    throw std::invalid_argument("payoff has " + std::to_string(values_.size()) +
                                " values, tree has " + std::to_string(tree.leaf_count()) +
                                " leaves");
  for (std::size_t i = 0; i < values_.size(); ++i)
    if (!std::isfinite(values_[i]))
      throw std::invalid_argument("payoff value at leaf " + std::to_string(i) + " is not finite");
}

TerminalPayoff TerminalPayoff::lift(const ScenarioTree& tree, int level,
                                    std::span<const double> values) {
  if (level < 0 || level > tree.steps() || values.size() != ScenarioTree::width(level))
    throw std::invalid_argument("lift: values do not match the requested level");
  std::vector<double> leaves(tree.leaf_count());
  const int shift = tree.steps() - level;
  for (std::size_t leaf = 0; leaf < leaves.size(); ++leaf) leaves[leaf] = values[leaf >> shift];
  return TerminalPayoff(tree, std::move(leaves));
}

std::vector<double> cond_expectation(std::span<const double> values, int from_level,
                                     int to_level) {
  if (to_level < 0 || to_level > from_level)
    throw std::invalid_argument("cond_expectation: target level " + std::to_string(to_level) +
                                " is not within 0.." + std::to_string(from_level));
  if (values.size() != ScenarioTree::width(from_level))
    throw std::invalid_argument("cond_expectation: value count does not match level");
  std::vector<double> cur(values.begin(), values.end());
  for (int k = from_level; k > to_level; --k) {
    const std::size_t half = ScenarioTree::width(k - 1);
    for (std::size_t j = 0; j < half; ++j) cur[j] = 0.5 * (cur[2 * j] + cur[2 * j + 1]);
    cur.resize(half);
  }
  return cur;
}

std::vector<double> cond_expectation(const ScenarioTree& tree, const TerminalPayoff& x,
                                     int level) {
  return cond_expectation(x.values(), tree.steps(), level);
}

std::vector<double> cond_expectation(const AdaptedProcess& x, int at_level, int to_level) {
  if (x.dim() != 1) throw std::invalid_argument("cond_expectation: scalar process required");
  if (at_level >= x.levels()) throw std::invalid_argument("cond_expectation: level out of range");
  return cond_expectation(x.level(at_level), at_level, to_level);
}

AdaptedProcess brownian(const ScenarioTree& tree) {
  AdaptedProcess b(tree);
  for (int k = 0; k < tree.steps(); ++k)
    for (std::size_t j = 0; j < ScenarioTree::width(k); ++j) {
      b(k + 1, ScenarioTree::up(j)) = b(k, j) + tree.sqrt_dt();
      b(k + 1, ScenarioTree::down(j)) = b(k, j) - tree.sqrt_dt();
    }
  return b;
}

MartingaleRepresentation martingale_representation(const ScenarioTree& tree,
                                                   const TerminalPayoff& x) {
  const int n = tree.steps();
  MartingaleRepresentation rep{AdaptedProcess(tree), PredictableProcess(tree)};
  auto& m = rep.martingale;
  std::copy(x.values().begin(), x.values().end(), m.level(n).begin());
  const double scale = 2.0 * tree.sqrt_dt();
  for (int k = n - 1; k >= 0; --k)
    for (std::size_t j = 0; j < ScenarioTree::width(k); ++j) {
      const double u = m(k + 1, ScenarioTree::up(j));
      const double d = m(k + 1, ScenarioTree::down(j));
      m(k, j) = 0.5 * (u + d);
      rep.integrand(k, j) = (u - d) / scale;
    }
  return rep;
}

AdaptedProcess doleans_exponential(const ScenarioTree& tree, const PredictableProcess& phi,
                                   int start_level) {
  if (phi.dim() != 1) throw std::invalid_argument("doleans_exponential: scalar kernel required");
  if (phi.levels() != tree.steps())
    throw std::invalid_argument("doleans_exponential: kernel does not match tree");
  if (start_level < 0 || start_level > tree.steps())
    throw std::invalid_argument("doleans_exponential: start level out of range");
  AdaptedProcess e(tree, 1, 1.0);
  for (int k = start_level; k < tree.steps(); ++k)
    for (std::size_t j = 0; j < ScenarioTree::width(k); ++j) {
      const double step = phi(k, j) * tree.sqrt_dt();
      if (!(std::abs(step) < 1.0)) throw PositivityError(k, j, std::abs(step));
      e(k + 1, ScenarioTree::up(j)) = e(k, j) * (1.0 + step);
      e(k + 1, ScenarioTree::down(j)) = e(k, j) * (1.0 - step);
    }
  return e;
}

AdaptedProcess stochastic_integral(const ScenarioTree& tree, const PredictableProcess& h,
                                   const AdaptedProcess& x) {
  if (h.dim() != x.dim())
    throw std::invalid_argument("stochastic_integral: dimension mismatch (" +
                                std::to_string(h.dim()) + " vs " + std::to_string(x.dim()) + ")");
  if (h.levels() != tree.steps() || x.levels() != tree.steps() + 1)
    throw std::invalid_argument("stochastic_integral: process does not match tree");
  AdaptedProcess out(tree);
  for (int k = 0; k < tree.steps(); ++k)
    for (std::size_t j = 0; j < ScenarioTree::width(k); ++j) {
      const auto hk = h.node(k, j);
      const auto xk = x.node(k, j);
      for (std::size_t c : {ScenarioTree::up(j), ScenarioTree::down(j)}) {
        const auto xn = x.node(k + 1, c);
        double acc = 0.0;
        for (std::size_t i = 0; i < hk.size(); ++i) acc += hk[i] * (xn[i] - xk[i]);
        out(k + 1, c) = out(k, j) + acc;
      }
    }
  return out;
}

}  // namespace dynrisk
