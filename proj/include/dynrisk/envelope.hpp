#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "dynrisk/tree.hpp"

namespace dynrisk {

struct KernelInterval {
  double lo = 0.0;
  double hi = 0.0;
};

struct SupportPoint {
  double value = 0.0;   // sup_phi phi * z
  double argmax = 0.0;  // the selected kernel
};

/// Node-indexed admissible kernels Phi: either an interval [lo, hi] or a
/// finite list of values per node.
class KernelSet {
 public:
  using IntervalRule = std::function<KernelInterval(int level, std::size_t node)>;
  using FiniteRule = std::function<std::vector<double>(int level, std::size_t node)>;

  static KernelSet interval(double lo, double hi);
  static KernelSet interval(IntervalRule rule, bool node_independent = false);
  static KernelSet finite(std::vector<double> values);
  static KernelSet finite(FiniteRule rule, bool node_independent = false);
  static KernelSet kappa(double kappa) { return interval(-kappa, kappa); }

  bool is_interval() const { return std::holds_alternative<IntervalRule>(rule_); }
  bool node_independent() const { return node_independent_; }

  // Extreme kernels at a node: {lo, hi} (one value when lo == hi) or the
  // sorted, de-duplicated finite list.
  std::vector<double> vertices(int level, std::size_t node) const;
  KernelInterval hull(int level, std::size_t node) const;
  bool contains_zero(int level, std::size_t node) const;

  /// sup over Phi of phi * z. At z == 0 every kernel attains; the admissible
  /// kernel of least absolute value is returned (0 when 0 is admissible).
  SupportPoint support(int level, std::size_t node, double z) const;

 private:
  KernelSet(std::variant<IntervalRule, FiniteRule> rule, bool node_independent)
      : rule_(std::move(rule)), node_independent_(node_independent) {}
  std::variant<IntervalRule, FiniteRule> rule_;
  bool node_independent_;
};

SupportPoint support_function(const KernelSet& kernels, int level, std::size_t node, double z);

/// BSDE generator g(level, node, z), z-only, plus its subgradient selector.
class Driver {
 public:
  using Rule = std::function<double(int level, std::size_t node, double z)>;

  Driver(Rule value, Rule subgradient, bool node_independent);
  static Driver from_kernels(const KernelSet& kernels);
  static Driver zero();

  double operator()(int level, std::size_t node, double z) const { return value_(level, node, z); }
  double subgradient(int level, std::size_t node, double z) const {
    return subgradient_(level, node, z);
  }
  bool node_independent() const { return node_independent_; }

 private:
  Rule value_;
  Rule subgradient_;
  bool node_independent_;
};

class EnvelopeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Candidate density set Q_t: kernel-generated, CVaR at level lambda, or {1}.
class RiskEnvelope {
 public:
  enum class Kind { kernel_generated, cvar, reference_only };

  static RiskEnvelope kernel_generated(KernelSet kernels, std::string text = "kernel-generated");
  static RiskEnvelope kappa(double kappa);
  static RiskEnvelope interval(double lo, double hi);
  static RiskEnvelope cvar(double lambda);
  static RiskEnvelope reference_only();

  Kind kind() const { return kind_; }
  bool has_kernels() const { return kind_ != Kind::cvar; }
  // Reference-only envelopes expose the degenerate set [0, 0].
  const KernelSet& kernels() const;
  double cvar_level() const;
  Driver driver() const;
  std::string describe() const;

 private:
  RiskEnvelope(Kind kind, std::optional<KernelSet> kernels, double lambda, std::string text)
      : kind_(kind), kernels_(std::move(kernels)), lambda_(lambda), text_(std::move(text)) {}
  Kind kind_;
  std::optional<KernelSet> kernels_;
  double lambda_;
  std::string text_;
};

enum class A1Status { certified, sampled_pass, sampled_violation, not_probed };

struct EnvelopeValidation {
  bool a2_holds = true;          // the reference density 1 is a candidate
  bool positivity_holds = true;  // |phi| sqrt(dt) < 1 on every node
  bool ordered = true;           // lo <= hi everywhere
  double max_kernel_step = 0.0;  // max |phi| sqrt(dt)
  A1Status a1 = A1Status::not_probed;
  double a1_worst_excess = 0.0;  // max of D_t(X) - (E_t X - min X) over probes
  std::vector<std::string> issues;

  // A1 sampling results are reported, never fatal.
  bool ok() const { return a2_holds && positivity_holds && ordered; }
};

/// Checks A2 and density positivity on every node. CVaR certifies A1
/// analytically; kernel envelopes are probed on `a1_samples` seeded payoffs.
EnvelopeValidation envelope_validate(const RiskEnvelope& envelope, const ScenarioTree& tree,
                                     int a1_samples = 8, std::uint64_t seed = 0);

// Throws EnvelopeError listing the issues when the structural checks fail.
void require_valid(const RiskEnvelope& envelope, const ScenarioTree& tree);

/// sup_Q E_t[-X Q] over a kernel-generated envelope by one-step worst-case
/// measure changes: V_k = max_phi [(1 + phi sqrt dt)/2 V_up + (1 - phi sqrt dt)/2 V_down].
std::vector<double> worst_case_loss(const ScenarioTree& tree, const TerminalPayoff& x,
                                    const KernelSet& kernels, int level);

/// Greedy CVaR density on each level-t subtree: mass 1/lambda is stacked on
/// the largest losses (ties by leaf index) until the conditional mass is one.
TerminalPayoff cvar_worst_density(const ScenarioTree& tree, const TerminalPayoff& x,
                                  double lambda, int level);

struct DensityProcess {
  int conditioning_level = 0;
  AdaptedProcess values;    // E_k[Q]; identically one up to the conditioning level
  TerminalPayoff terminal;  // Q
};

// Density process of Q that is consistent on F_level.
DensityProcess density_from_terminal(const ScenarioTree& tree, const TerminalPayoff& q, int level);

inline constexpr std::size_t kDefaultEnumerationBound = std::size_t{1} << 20;

using DensityVisitor = std::function<void(const PredictableProcess& kernel, const DensityProcess&)>;

/// Visits every vertex density of the envelope consistent on F_level: one
/// vertex kernel per decision node (levels level..N-1), in level-major node
/// order with the leftmost node varying slowest. CVaR returns its single
/// greedy-optimal density for `payoff` (kernel process left zero).
void for_each_extreme_density(const RiskEnvelope& envelope, const ScenarioTree& tree, int level,
                              const DensityVisitor& visit, const TerminalPayoff* payoff = nullptr,
                              std::size_t bound = kDefaultEnumerationBound);

std::vector<DensityProcess> extreme_densities(const RiskEnvelope& envelope,
                                              const ScenarioTree& tree, int level,
                                              const TerminalPayoff* payoff = nullptr,
                                              std::size_t bound = kDefaultEnumerationBound);

// Number of vertex densities for a kernel envelope (saturates at SIZE_MAX).
std::size_t extreme_density_count(const RiskEnvelope& envelope, const ScenarioTree& tree,
                                  int level);

}  // namespace dynrisk
