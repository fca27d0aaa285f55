#pragma once

#include <functional>
#include <vector>

#include "dynrisk/tree.hpp"

namespace dynrisk {

// Coefficient rules see the node so drift and diffusion may be path-dependent.
using CoefficientRule = std::function<std::vector<double>(int level, std::size_t node)>;

/// Arithmetic dynamics dS^i = b^i dt + sigma^i dB on a single Brownian driver.
class AssetModel {
 public:
  AssetModel(std::size_t asset_count, CoefficientRule drift, CoefficientRule diffusion,
             std::vector<double> initial_prices);

  static AssetModel constant(std::vector<double> drift, std::vector<double> diffusion,
                             std::vector<double> initial_prices);
  // Tables indexed [level][asset]; one row per step.
  static AssetModel per_level(std::vector<std::vector<double>> drift,
                              std::vector<std::vector<double>> diffusion,
                              std::vector<double> initial_prices);

  std::size_t asset_count() const { return asset_count_; }
  const std::vector<double>& initial_prices() const { return initial_prices_; }

  std::vector<double> drift(int level, std::size_t node) const;
  std::vector<double> diffusion(int level, std::size_t node) const;

  struct Coefficients {
    PredictableProcess drift;
    PredictableProcess diffusion;
  };
  // Evaluates both rules on every non-terminal node; rejects non-finite output.
  Coefficients tabulate(const ScenarioTree& tree) const;

 private:
  std::size_t asset_count_;
  CoefficientRule drift_;
  CoefficientRule diffusion_;
  std::vector<double> initial_prices_;
};

/// Shares held over each step.
class Policy {
 public:
  explicit Policy(PredictableProcess shares);
  static Policy constant(const ScenarioTree& tree, std::vector<double> shares);
  static Policy per_level(const ScenarioTree& tree, const std::vector<std::vector<double>>& shares);

  const PredictableProcess& shares() const { return shares_; }
  std::size_t asset_count() const { return shares_.dim(); }

 private:
  PredictableProcess shares_;
};

struct WealthProcess {
  double initial = 0.0;
  AdaptedProcess values;

  double terminal(const ScenarioTree& tree, std::size_t leaf) const {
    return values(tree.steps(), leaf);
  }
  TerminalPayoff terminal_payoff(const ScenarioTree& tree) const;
};

AdaptedProcess simulate_assets(const ScenarioTree& tree, const AssetModel& model);

WealthProcess wealth(const ScenarioTree& tree, const AssetModel& model, const Policy& policy,
                     double x0);
WealthProcess wealth(const ScenarioTree& tree, const AssetModel::Coefficients& coeffs,
                     const Policy& policy, double x0);

}  // namespace dynrisk
