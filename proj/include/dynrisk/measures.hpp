#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "dynrisk/envelope.hpp"
#include "dynrisk/tree.hpp"

namespace dynrisk {

enum class MeasureKind { coherent, deviation };

std::string to_string(MeasureKind kind);

struct MeasureResult {
  int level = 0;
  std::vector<double> values;  // one per node at `level`
  MeasureKind kind = MeasureKind::coherent;
  std::string envelope;
};

/// C_t(X) = ess sup over the envelope of E_t[-X Q].
///  kernel-generated: Y_t of the tree BSDE with terminal -X and driver sup_phi phi z;
///  CVaR: E_t[-X Q] with the greedy worst-case density of each level-t subtree;
///  reference-only: E_t[-X].
MeasureResult coherent(const ScenarioTree& tree, const TerminalPayoff& x,
                       const RiskEnvelope& envelope, int level);

/// D_t(X) = C_t(X) + E_t[X].
MeasureResult deviation(const ScenarioTree& tree, const TerminalPayoff& x,
                        const RiskEnvelope& envelope, int level);

// The one-to-one correspondence, applied to already evaluated values.
MeasureResult deviation_from_coherent(const ScenarioTree& tree, const TerminalPayoff& x,
                                      const MeasureResult& c);
MeasureResult coherent_from_deviation(const ScenarioTree& tree, const TerminalPayoff& x,
                                      const MeasureResult& d);

/// Finite family of scalar weight processes K for a volatility recorder.
struct RecorderWeights {
  std::vector<PredictableProcess> weights;

  // min_K K <= 0 <= max_K K on every node, i.e. max_K K x >= 0 for all x.
  // Throws std::domain_error naming the first offending node.
  void check_positivity() const;
};

/// V_t(X) = E_t[ sum_{k >= t} max_K K_k sigma^X_k dt ].
std::vector<double> volatility_recorder(const ScenarioTree& tree, const TerminalPayoff& x,
                                        const RecorderWeights& weights, int level);

/// K = -phi * E(phi . B) for each kernel process. The overload taking a kernel
/// set uses the node-wise vertex kernels (lower and upper endpoints for an
/// interval) plus an optional extra selection such as an exposed-face kernel.
RecorderWeights recorder_weights_from_kernels(const ScenarioTree& tree,
                                              const std::vector<PredictableProcess>& kernels,
                                              int start_level = 0);
RecorderWeights recorder_weights_from_kernels(const ScenarioTree& tree, const KernelSet& kernels,
                                              const PredictableProcess* selected = nullptr,
                                              int start_level = 0);

/// A conditional measure t -> rho_t to be checked against the axioms.
struct MeasureFamily {
  using Evaluate = std::function<std::vector<double>(const ScenarioTree&, const TerminalPayoff&, int)>;

  std::string name;
  MeasureKind kind = MeasureKind::coherent;
  Evaluate evaluate;

  static MeasureFamily coherent(const RiskEnvelope& envelope);
  static MeasureFamily deviation(const RiskEnvelope& envelope);
};

struct AxiomStat {
  std::string axiom;
  std::size_t applicable = 0;  // node-wise checks performed
  std::size_t violations = 0;
  double max_residual = 0.0;
};

struct AxiomReport {
  std::string family;
  std::uint64_t seed = 0;
  int trials = 0;
  int steps = 0;
  double tolerance = 1e-9;
  std::vector<AxiomStat> axioms;  // M1t, M2t and then C1t, C2t or D1t, D2't

  std::size_t total_violations() const;
};

/// Seeded property run. Each trial draws a level t, Gaussian payoffs X and Y,
/// an F_t-measurable C and lambda > 0, and a dominating payoff for the
/// monotonicity check. A check fails when its residual exceeds
/// tolerance * (1 + scale of the values involved).
AxiomReport axiom_suite(const MeasureFamily& family, const ScenarioTree& tree,
                        std::uint64_t seed, int trials, double tolerance = 1e-9);

struct ConsistencyResidual {
  int s = 0;
  int t = 0;
  std::vector<double> coherent;   // C_s(X) - C_s(-C_t(X)), per node at level s
  std::vector<double> deviation;  // D_s(X) - E_s[D_t(X)] - D_s(E_t[X] - D_t(X))
  double max_coherent() const;
  double max_deviation() const;
};

ConsistencyResidual time_consistency_check(const ScenarioTree& tree, const RiskEnvelope& envelope,
                                           const TerminalPayoff& x, int s, int t);

}  // namespace dynrisk
