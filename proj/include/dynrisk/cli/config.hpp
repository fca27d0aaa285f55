#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "dynrisk/envelope.hpp"
#include "dynrisk/market.hpp"
#include "dynrisk/tree.hpp"

namespace dynrisk::cli {

/// Schema violation; `field` is the dotted path of the offending key.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string field, const std::string& message)
      : std::runtime_error(field + ": " + message), field_(std::move(field)), message_(message) {}
  const std::string& field() const { return field_; }
  const std::string& message() const { return message_; }

 private:
  std::string field_;
  std::string message_;
};

struct AssetSpec {
  std::vector<double> drift;      // one value (constant) or one per step
  std::vector<double> diffusion;
  double s0 = 0.0;
};

struct EnvelopeSpec {
  std::string type;  // kappa | interval | cvar | reference
  double kappa = 0.0;
  double lo = 0.0;
  double hi = 0.0;
  double lambda = 1.0;
};

struct MonteCarloSpec {
  int steps = 50;
  std::size_t paths = 100000;
  int degree = 2;
};

struct StddevSpec {
  bool present = false;
  std::vector<double> weights;
  std::vector<std::vector<double>> covariance;
};

inline const std::vector<std::string> kTaskNames = {
    "measure", "deviation", "contrib", "axioms", "consistency", "bsde-mc", "example-kappa", "stddev"};

struct ExperimentConfig {
  int steps = 0;
  double horizon = 0.0;
  std::vector<AssetSpec> assets;
  bool policy_constant = true;
  std::vector<std::vector<double>> policy;  // one row, or one per step
  double x0 = 0.0;
  EnvelopeSpec envelope;
  std::vector<std::string> tasks;
  std::uint64_t seed = 0;
  std::string output_dir = "dynrisk-output";

  // options block
  int level = 0;
  int trials = 500;
  std::string payoff = "wealth";  // wealth | brownian
  std::vector<std::pair<int, int>> pairs;  // empty: every s <= t
  MonteCarloSpec mc;
  StddevSpec stddev;

  nlohmann::json raw;

  ScenarioTree tree() const;
  AssetModel model() const;
  Policy make_policy(const ScenarioTree& tree) const;
  RiskEnvelope risk_envelope() const;
  // Constant coefficients and a constant policy.
  bool constant_market() const;
};

/// Strict parse: unknown keys, wrong types and out-of-range values raise
/// ConfigError. A tree beyond the supported depth raises CapacityError.
ExperimentConfig parse_config(const nlohmann::json& doc);
ExperimentConfig load_config(const std::string& path);

}  // namespace dynrisk::cli
