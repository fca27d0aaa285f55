#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace dynrisk {

// Raised when a request would exceed a declared size limit.
class CapacityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Raised when a Doleans exponential would lose strict positivity.
class PositivityError : public std::domain_error {
 public:
  PositivityError(int level, std::size_t node, double bound);
  int level() const { return level_; }
  std::size_t node() const { return node_; }
  double bound() const { return bound_; }

 private:
  int level_;
  std::size_t node_;
  double bound_;
};

inline constexpr int kMaxTreeSteps = 26;

/// Non-recombining binary filtration with Brownian increments of +-sqrt(dt).
///
/// Level k holds 2^k nodes. Node j at level k has children 2j ("up",
/// dB = +sqrt(dt)) and 2j+1 ("down", dB = -sqrt(dt)), each with conditional
/// probability 1/2. Reading the bits of a leaf index from the most significant
/// end therefore spells its path.
class ScenarioTree {
 public:
  ScenarioTree(int steps, double horizon);

  int steps() const { return steps_; }
  double horizon() const { return horizon_; }
  double dt() const { return dt_; }
  double sqrt_dt() const { return sqrt_dt_; }
  double time(int level) const { return level * dt_; }

  std::size_t leaf_count() const { return width(steps_); }

  static std::size_t width(int level) { return std::size_t{1} << level; }
  static double probability(int level) { return std::ldexp(1.0, -level); }
  static std::size_t up(std::size_t node) { return node << 1; }
  static std::size_t down(std::size_t node) { return (node << 1) | 1; }
  static std::size_t ancestor(std::size_t node, int from_level, int to_level) {
    return node >> (from_level - to_level);
  }
  // Brownian increment on the step into `child`.
  double increment_into(std::size_t child) const {
    return (child & 1) ? -sqrt_dt_ : sqrt_dt_;
  }

 private:
  int steps_;
  double horizon_;
  double dt_;
  double sqrt_dt_;
};

ScenarioTree build_tree(int steps, double horizon);

struct AdaptedKind {
  static int level_count(const ScenarioTree& tree) { return tree.steps() + 1; }
};
struct PredictableKind {
  static int level_count(const ScenarioTree& tree) { return tree.steps(); }
};

/// Node-indexed vector-valued process. Adapted processes live on levels
/// 0..N; predictable ones on 0..N-1, the value at (k, node) being the one
/// held over the step from k to k+1.
template <class Kind>
class NodeProcess {
 public:
  NodeProcess() = default;
  explicit NodeProcess(const ScenarioTree& tree, std::size_t dim = 1, double fill = 0.0)
      : dim_(dim) {
    if (dim == 0) throw std::invalid_argument("process dimension must be positive");
    const int n = Kind::level_count(tree);
    levels_.reserve(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k) levels_.emplace_back(ScenarioTree::width(k) * dim, fill);
  }

  int levels() const { return static_cast<int>(levels_.size()); }
  std::size_t dim() const { return dim_; }

  double& operator()(int level, std::size_t node, std::size_t comp = 0) {
    return levels_[static_cast<std::size_t>(level)][node * dim_ + comp];
  }
  double operator()(int level, std::size_t node, std::size_t comp = 0) const {
    return levels_[static_cast<std::size_t>(level)][node * dim_ + comp];
  }

  std::span<double> node(int level, std::size_t node) {
    return {levels_[static_cast<std::size_t>(level)].data() + node * dim_, dim_};
  }
  std::span<const double> node(int level, std::size_t node) const {
    return {levels_[static_cast<std::size_t>(level)].data() + node * dim_, dim_};
  }

  // Raw interleaved storage of one level (node-major, component-minor).
  std::span<double> level(int k) { return levels_[static_cast<std::size_t>(k)]; }
  std::span<const double> level(int k) const { return levels_[static_cast<std::size_t>(k)]; }

 private:
  std::size_t dim_ = 1;
  std::vector<std::vector<double>> levels_;
};

using AdaptedProcess = NodeProcess<AdaptedKind>;
using PredictableProcess = NodeProcess<PredictableKind>;

/// One finite real per leaf.
class TerminalPayoff {
 public:
  TerminalPayoff() = default;
  TerminalPayoff(const ScenarioTree& tree, std::vector<double> values);

  // The F_level-measurable payoff that equals `values[node]` on every leaf
  // below `node`.
  static TerminalPayoff lift(const ScenarioTree& tree, int level, std::span<const double> values);

  std::span<const double> values() const { return values_; }
  double operator[](std::size_t leaf) const { return values_[leaf]; }
  std::size_t size() const { return values_.size(); }

 private:
  std::vector<double> values_;
};

/// E[. | F_to] of values measurable at `from_level`. Children are reduced
/// pairwise in (up, down) order, so the tower property holds bit-for-bit.
std::vector<double> cond_expectation(std::span<const double> values, int from_level, int to_level);
std::vector<double> cond_expectation(const ScenarioTree& tree, const TerminalPayoff& x, int level);
std::vector<double> cond_expectation(const AdaptedProcess& x, int at_level, int to_level);

AdaptedProcess brownian(const ScenarioTree& tree);

struct MartingaleRepresentation {
  AdaptedProcess martingale;    // M_k = E_k[X]
  PredictableProcess integrand; // sigma^X
};

MartingaleRepresentation martingale_representation(const ScenarioTree& tree, const TerminalPayoff& x);

/// Discrete stochastic exponential prod_{start<=j<k} (1 + phi_j dB_{j+1});
/// identically one up to `start_level`. Requires |phi| sqrt(dt) < 1.
AdaptedProcess doleans_exponential(const ScenarioTree& tree, const PredictableProcess& phi,
                                   int start_level = 0);

/// (H . X)_k = sum_{j<k} <H_j, X_{j+1} - X_j>.
AdaptedProcess stochastic_integral(const ScenarioTree& tree, const PredictableProcess& h,
                                   const AdaptedProcess& x);

}  // namespace dynrisk
