#pragma once

#include <Eigen/Dense>
#include <vector>

#include "dynrisk/envelope.hpp"
#include "dynrisk/market.hpp"
#include "dynrisk/tree.hpp"

namespace dynrisk {

/// A worst-case density for X conditional at `level`. The density process
/// D is the Doleans exponential of the kernel started at `level` (kernel
/// envelopes), or the martingale of the greedy CVaR density (no kernel).
/// Sign convention: the kernel here is phi_hat = -theta_hat.
struct ExposedFace {
  int level = 0;
  RiskEnvelope::Kind kind = RiskEnvelope::Kind::kernel_generated;
  bool has_kernel = true;
  PredictableProcess kernel;  // phi_hat; zero before `level`
  DensityProcess density;
  std::vector<double> value;  // C_level(X), one per node at `level`

  const TerminalPayoff& terminal_density() const { return density.terminal; }
};

ExposedFace exposed_face(const ScenarioTree& tree, const TerminalPayoff& x,
                         const RiskEnvelope& envelope, int level);

struct SubdifferentialProbe {
  double theta = 0.0;
  std::vector<double> quotient;  // (C_t(X + theta Y) - C_t(X)) / theta per node
  bool within = true;            // inside [lower - 10|theta|, upper + 10|theta|]
};

struct SubdifferentialBounds {
  int level = 0;
  std::vector<double> upper;  // max over the exposed face of E_t[-Q Y]
  std::vector<double> lower;  // min over the exposed face of E_t[-Q Y]
  std::size_t tie_nodes = 0;
  std::size_t selections = 1;
  std::vector<SubdifferentialProbe> probes;

  bool probes_within() const;
};

inline constexpr std::size_t kTieEnumerationBound = std::size_t{1} << 16;

/// Bounds of E_t[-Q Y] over the exposed face of X. Where Z vanishes every
/// kernel is optimal, so the face is spanned by the vertex kernels of those
/// nodes; all such selections are enumerated (CapacityError past `bound`).
SubdifferentialBounds subdifferential_bounds(const ScenarioTree& tree, const TerminalPayoff& x,
                                             const TerminalPayoff& y, const RiskEnvelope& envelope,
                                             int level,
                                             std::vector<double> thetas = {1e-3, 1e-4, -1e-3, -1e-4},
                                             std::size_t bound = kTieEnumerationBound);

enum class LossRoute {
  automatic,  // kernel formula when the face has a kernel, density formula otherwise
  kernel,     // l = -(b + sigma phi_hat) D
  density,    // l = -(b D + sigma zeta), zeta = (D_up - D_down) / (2 sqrt dt)
};

/// Per-asset density l of the signed measure mu(E) = E[-X^{1_E}_T Q_hat]
/// on predictable node sets.
PredictableProcess doleans_loss_process(const ScenarioTree& tree,
                                        const AssetModel::Coefficients& coeffs,
                                        const ExposedFace& face,
                                        LossRoute route = LossRoute::automatic);
PredictableProcess doleans_loss_process(const ScenarioTree& tree, const AssetModel& model,
                                        const ExposedFace& face,
                                        LossRoute route = LossRoute::automatic);

/// mu(E) for the node set E, computed from the wealth of the indicator
/// policy under Q_hat. Independent of the loss process.
std::vector<double> indicator_loss(const ScenarioTree& tree, const AssetModel::Coefficients& coeffs,
                                   const ExposedFace& face,
                                   const std::vector<std::pair<int, std::size_t>>& nodes);

struct ContributionReport {
  int level = 0;
  std::size_t assets = 0;
  PredictableProcess shares;     // u
  PredictableProcess drift;      // b
  PredictableProcess diffusion;  // sigma
  WealthProcess wealth;
  ExposedFace face;

  PredictableProcess ell;                     // l
  PredictableProcess marginal_coherent;       // m^C = l
  PredictableProcess marginal_deviation;      // m^D = l + b
  PredictableProcess marginal_deviation_alt;  // -sigma phi_hat D (density form: -sigma zeta)
  PredictableProcess discrepancy;             // m^D - m^D_alt = b (1 - D)
  PredictableProcess contribution_coherent;   // u * m^C
  PredictableProcess contribution_deviation;  // u * m^D

  // Node-wise at `level`.
  std::vector<double> coherent_value;
  std::vector<double> deviation_value;
  std::vector<double> coherent_aggregate;   // E_t[sum u.m^C dt] - X_t
  std::vector<double> deviation_aggregate;  // E_t[sum u.m^D dt]
  std::vector<double> coherent_residual;
  std::vector<double> deviation_residual;
  std::vector<double> discrepancy_mean;     // E_t[sum u.(m^D - m^D_alt) dt]

  double max_coherent_residual() const;
  double max_deviation_residual() const;
  double max_discrepancy_mean() const;
};

ContributionReport marginal_and_total_contributions(const ScenarioTree& tree,
                                                    const AssetModel& model, const Policy& policy,
                                                    double x0, const RiskEnvelope& envelope,
                                                    int level);

struct ContributionConsistency {
  int t1 = 0;
  int t2 = 0;
  bool time_consistent_family = true;
  double kernel_residual = 0.0;        // max |phi_hat(t1) - phi_hat(t2)| on levels >= max(t1, t2)
  double marginal_residual = 0.0;      // max |m^C(t1) - m^C(t2)|
  double normalized_residual = 0.0;    // max |m^C(t1)/D(t1) - m^C(t2)/D(t2)| where both D > 0
  double correspondence_residual = 0.0;  // max |m^D - m^C - b| over both reports
};

/// Compares the contributions computed from faces at t1 and t2 on their
/// common future. Kernel processes coincide for kernel envelopes; the
/// marginals themselves carry the density of each face, so they agree
/// after dividing by it.
ContributionConsistency contribution_time_consistency(const ScenarioTree& tree,
                                                      const AssetModel& model,
                                                      const Policy& policy, double x0,
                                                      const RiskEnvelope& envelope, int t1, int t2);

struct ZIdentityReport {
  int level = 0;
  // Node-wise at `level`, where the face density is one.
  std::vector<double> residual;            // sum_i u m^D_alt - Z phi_hat
  std::vector<double> residual_ell;        // sum_i u (l + b) - Z phi_hat
  std::vector<double> z_formula_residual;  // Z + (u . sigma) D
  // E_t[sum_k (sum_i u m^D - Z phi_hat) dt] with each marginal form.
  std::vector<double> aggregate_residual;
  std::vector<double> aggregate_residual_alt;
  // Path-wise on all levels >= `level`.
  double max_path_residual = 0.0;
  double max_path_z_formula_residual = 0.0;
  double max_drift_term = 0.0;  // max |u . b (1 - D)|

  double max_residual() const;
  double max_z_formula_residual() const;
  double max_aggregate_residual() const;
};

/// Z and phi_hat come from the tree BSDE on -X^u_T. Kernel envelopes only.
ZIdentityReport z_identity_check(const ScenarioTree& tree, const AssetModel& model,
                                 const Policy& policy, double x0, const RiskEnvelope& envelope,
                                 int level);

class StaticPortfolio {
 public:
  StaticPortfolio(Eigen::VectorXd weights, Eigen::MatrixXd covariance);
  const Eigen::VectorXd& weights() const { return w_; }
  const Eigen::MatrixXd& covariance() const { return cov_; }

 private:
  Eigen::VectorXd w_;
  Eigen::MatrixXd cov_;
};

struct StaticContribution {
  double total = 0.0;          // sqrt(w' L w)
  Eigen::VectorXd marginals;   // (L w) / total
  Eigen::VectorXd contributions;  // w * marginals
};

StaticContribution static_stddev_contribution(const StaticPortfolio& portfolio);

}  // namespace dynrisk
