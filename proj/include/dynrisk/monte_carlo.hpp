#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

#include "dynrisk/envelope.hpp"

namespace dynrisk {

inline constexpr std::size_t kMaxEnsembleEntries = 50'000'000;

/// Gaussian Brownian increments, row-major path_count x steps.
struct PathEnsemble {
  std::uint64_t seed = 0;
  int steps = 0;
  std::size_t path_count = 0;
  double horizon = 0.0;
  double dt = 0.0;
  std::vector<double> increments;

  double increment(std::size_t path, int step) const {
    return increments[path * static_cast<std::size_t>(steps) + static_cast<std::size_t>(step)];
  }
  // B_0 = 0, ..., B_N along one path.
  std::vector<double> brownian_path(std::size_t path) const;
};

PathEnsemble simulate_paths(std::uint64_t seed, int steps, std::size_t path_count, double horizon,
                            std::size_t capacity = kMaxEnsembleEntries);

/// Regression features of the state (t, B_t).
class RegressionBasis {
 public:
  using FeatureRule = std::function<void(double time, double state, std::span<double> out)>;

  RegressionBasis(std::size_t feature_count, FeatureRule rule, int degree = 0);
  // 1, B, ..., B^degree.
  static RegressionBasis polynomial(int degree);

  std::size_t size() const { return count_; }
  int degree() const { return degree_; }
  void evaluate(double time, double state, std::span<double> out) const;

 private:
  std::size_t count_;
  FeatureRule rule_;
  int degree_;
};

class RegressionError : public std::runtime_error {
 public:
  RegressionError(const std::string& what, double condition)
      : std::runtime_error(what), condition_(condition) {}
  double condition() const { return condition_; }

 private:
  double condition_;
};

using PathTerminalRule = std::function<double(std::span<const double> brownian_path)>;

struct MonteCarloOptions {
  // Paths are split into independent batches; the spread of batch estimates
  // gives the standard error, so regression noise is part of it.
  std::size_t batches = 20;
  std::size_t min_batch_paths = 1000;
  // Ridge penalty on the centred slope coefficients, relative to the Gram trace.
  double ridge = 1e-10;
};

struct MonteCarloSolution {
  double y0 = 0.0;
  double standard_error = 0.0;
  std::size_t batches = 1;
  std::size_t path_count = 0;
  int steps = 0;
  std::vector<double> value;      // path_count x (steps + 1): regression estimates of Y
  std::vector<double> integrand;  // path_count x steps: regression estimates of Z

  double value_at(std::size_t path, int step) const {
    return value[path * static_cast<std::size_t>(steps + 1) + static_cast<std::size_t>(step)];
  }
  double integrand_at(std::size_t path, int step) const {
    return integrand[path * static_cast<std::size_t>(steps) + static_cast<std::size_t>(step)];
  }
};

/// Backward least-squares scheme on simulated paths:
///   Ybar_k = E_k[Y_{k+1}],  Z_k = E_k[(Y_{k+1} - Ybar_k) dB_{k+1}] / dt,
///   Y_k = Ybar_k + g(Z_k) dt,
/// with conditional expectations replaced by ridge regressions on the basis.
/// Y0 is the batch mean of the path-wise reconstruction
///   xi + sum_k g(Z_k) dt - sum_k Z_k dB_{k+1}.
/// The driver must not depend on the node.
MonteCarloSolution solve_mc(const PathEnsemble& ensemble, const PathTerminalRule& terminal,
                            const Driver& driver, const RegressionBasis& basis,
                            const MonteCarloOptions& options = {});

}  // namespace dynrisk
