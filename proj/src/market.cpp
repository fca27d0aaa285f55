#include "dynrisk/market.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace dynrisk {

namespace {

std::vector<double> checked(const CoefficientRule& rule, const char* what, std::size_t count,
                            int level, std::size_t node) {
  auto v = rule(level, node);
  if (v.size() != count)
    throw std::invalid_argument(std::string(what) + " rule returned " + std::to_string(v.size()) +
                                " values, expected " + std::to_string(count));
  for (double x : v)
    if (!std::isfinite(x))
      throw std::domain_error(std::string(what) + " is not finite at level " +
                              std::to_string(level) + ", node " + std::to_string(node));
  return v;
}

CoefficientRule table_rule(std::vector<std::vector<double>> table, const char* what) {
  return [table = std::move(table), what](int level, std::size_t) {
    if (level < 0 || static_cast<std::size_t>(level) >= table.size())
      throw std::out_of_range(std::string(what) + " table has no row for level " +
                              std::to_string(level));
    return table[static_cast<std::size_t>(level)];
  };
}

}  // namespace

AssetModel::AssetModel(std::size_t asset_count, CoefficientRule drift, CoefficientRule diffusion,
                       std::vector<double> initial_prices)
    : asset_count_(asset_count),
      drift_(std::move(drift)),
      diffusion_(std::move(diffusion)),
      initial_prices_(std::move(initial_prices)) {
  if (asset_count_ == 0) throw std::invalid_argument("asset model needs at least one asset");
  if (initial_prices_.size() != asset_count_)
    throw std::invalid_argument("initial price vector length does not match asset count");
  for (double s : initial_prices_)
    if (!std::isfinite(s)) throw std::domain_error("initial price is not finite");
}

AssetModel AssetModel::constant(std::vector<double> drift, std::vector<double> diffusion,
                                std::vector<double> initial_prices) {
  const std::size_t d = initial_prices.size();
  if (drift.size() != d || diffusion.size() != d)
    throw std::invalid_argument("constant coefficients must have one entry per asset");
  return AssetModel(
      d, [drift = std::move(drift)](int, std::size_t) { return drift; },
      [diffusion = std::move(diffusion)](int, std::size_t) { return diffusion; },
      std::move(initial_prices));
}

AssetModel AssetModel::per_level(std::vector<std::vector<double>> drift,
                                 std::vector<std::vector<double>> diffusion,
                                 std::vector<double> initial_prices) {
  const std::size_t d = initial_prices.size();
  return AssetModel(d, table_rule(std::move(drift), "drift"),
                    table_rule(std::move(diffusion), "diffusion"), std::move(initial_prices));
}

std::vector<double> AssetModel::drift(int level, std::size_t node) const {
  return checked(drift_, "drift", asset_count_, level, node);
}

std::vector<double> AssetModel::diffusion(int level, std::size_t node) const {
  return checked(diffusion_, "diffusion", asset_count_, level, node);
}

AssetModel::Coefficients AssetModel::tabulate(const ScenarioTree& tree) const {
  Coefficients c{PredictableProcess(tree, asset_count_), PredictableProcess(tree, asset_count_)};
  for (int k = 0; k < tree.steps(); ++k)
    for (std::size_t j = 0; j < ScenarioTree::width(k); ++j) {
      const auto b = drift(k, j);
      const auto s = diffusion(k, j);
      std::copy(b.begin(), b.end(), c.drift.node(k, j).begin());
      std::copy(s.begin(), s.end(), c.diffusion.node(k, j).begin());
    }
  return c;
}

Policy::Policy(PredictableProcess shares) : shares_(std::move(shares)) {
  for (int k = 0; k < shares_.levels(); ++k)
    for (double v : shares_.level(k))
      if (!std::isfinite(v))
        throw std::domain_error("policy holds a non-finite share count at level " +
                                std::to_string(k));
}

Policy Policy::constant(const ScenarioTree& tree, std::vector<double> shares) {
  PredictableProcess u(tree, shares.size());
  for (int k = 0; k < tree.steps(); ++k)
    for (std::size_t j = 0; j < ScenarioTree::width(k); ++j)
      std::copy(shares.begin(), shares.end(), u.node(k, j).begin());
  return Policy(std::move(u));
}

Policy Policy::per_level(const ScenarioTree& tree,
                         const std::vector<std::vector<double>>& shares) {
  if (shares.size() != static_cast<std::size_t>(tree.steps()))
    throw std::invalid_argument("policy table needs one row per step");
  const std::size_t d = shares.front().size();
  PredictableProcess u(tree, d);
  for (int k = 0; k < tree.steps(); ++k) {
    const auto& row = shares[static_cast<std::size_t>(k)];
    if (row.size() != d) throw std::invalid_argument("policy table rows differ in length");
    for (std::size_t j = 0; j < ScenarioTree::width(k); ++j)
      std::copy(row.begin(), row.end(), u.node(k, j).begin());
  }
  return Policy(std::move(u));
}

TerminalPayoff WealthProcess::terminal_payoff(const ScenarioTree& tree) const {
  const auto last = values.level(tree.steps());
  return TerminalPayoff(tree, std::vector<double>(last.begin(), last.end()));
}

AdaptedProcess simulate_assets(const ScenarioTree& tree, const AssetModel& model) {
  const std::size_t d = model.asset_count();
  AdaptedProcess s(tree, d);
  std::copy(model.initial_prices().begin(), model.initial_prices().end(), s.node(0, 0).begin());
  const auto coeffs = model.tabulate(tree);
  for (int k = 0; k < tree.steps(); ++k)
    for (std::size_t j = 0; j < ScenarioTree::width(k); ++j) {
      const auto b = coeffs.drift.node(k, j);
      const auto sig = coeffs.diffusion.node(k, j);
      for (std::size_t c : {ScenarioTree::up(j), ScenarioTree::down(j)}) {
        const double db = tree.increment_into(c);
        for (std::size_t i = 0; i < d; ++i) s(k + 1, c, i) = s(k, j, i) + b[i] * tree.dt() + sig[i] * db;
      }
    }
  return s;
}

WealthProcess wealth(const ScenarioTree& tree, const AssetModel& model, const Policy& policy,
                     double x0) {
  return wealth(tree, model.tabulate(tree), policy, x0);
}

WealthProcess wealth(const ScenarioTree& tree, const AssetModel::Coefficients& coeffs,
                     const Policy& policy, double x0) {
  const std::size_t d = coeffs.drift.dim();
  if (policy.asset_count() != d)
    throw std::invalid_argument("policy dimension " + std::to_string(policy.asset_count()) +
                                " does not match asset count " + std::to_string(d));
  if (!std::isfinite(x0)) throw std::domain_error("initial wealth is not finite");
  WealthProcess w{x0, AdaptedProcess(tree)};
  w.values(0, 0) = x0;
  const auto& u = policy.shares();
  for (int k = 0; k < tree.steps(); ++k)
    for (std::size_t j = 0; j < ScenarioTree::width(k); ++j) {
      const auto uk = u.node(k, j);
      const auto b = coeffs.drift.node(k, j);
      const auto sig = coeffs.diffusion.node(k, j);
      for (std::size_t c : {ScenarioTree::up(j), ScenarioTree::down(j)}) {
        const double db = tree.increment_into(c);
        double inc = 0.0;
        for (std::size_t i = 0; i < d; ++i) inc += uk[i] * (b[i] * tree.dt() + sig[i] * db);
        w.values(k + 1, c) = w.values(k, j) + inc;
      }
    }
  return w;
}

}  // namespace dynrisk
