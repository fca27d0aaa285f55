#include "dynrisk/contribution.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "dynrisk/bsde.hpp"
#include "dynrisk/measures.hpp"

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

DensityProcess kernel_density(const ScenarioTree& tree, const PredictableProcess& phi, int level) {
  auto d = doleans_exponential(tree, phi, level);
  const auto leaves = d.level(tree.steps());
  TerminalPayoff q(tree, std::vector<double>(leaves.begin(), leaves.end()));
  return DensityProcess{level, std::move(d), std::move(q)};
}

// E_level[-Q Y] per node at `level`.
std::vector<double> weighted_loss(const ScenarioTree& tree, const TerminalPayoff& q,
                                  const TerminalPayoff& y, int level) {
  std::vector<double> v(tree.leaf_count());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = -q[i] * y[i];
  return cond_expectation(v, tree.steps(), level);
}

// E_level[sum_{k >= level} f_k dt] where f is the node-wise inner product of a and b.
std::vector<double> accumulate_dot(const ScenarioTree& tree, const PredictableProcess& a,
                                   const PredictableProcess& b, int level) {
  std::vector<double> acc(tree.leaf_count(), 0.0);
  for (int k = tree.steps() - 1; k >= level; --k) {
    std::vector<double> next(ScenarioTree::width(k));
    for (std::size_t j = 0; j < next.size(); ++j) {
      const auto x = a.node(k, j);
      const auto y = b.node(k, j);
      double s = 0.0;
      for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * y[i];
      next[j] = s * tree.dt() + 0.5 * (acc[ScenarioTree::up(j)] + acc[ScenarioTree::down(j)]);
    }
    acc = std::move(next);
  }
  return acc;
}

// zeta_k = (D_up - D_down) / (2 sqrt dt), the integrand of the density martingale.
double density_integrand(const ScenarioTree& tree, const DensityProcess& d, int k, std::size_t j) {
  return (d.values(k + 1, ScenarioTree::up(j)) - d.values(k + 1, ScenarioTree::down(j))) /
         (2.0 * tree.sqrt_dt());
}

}  // namespace

ExposedFace exposed_face(const ScenarioTree& tree, const TerminalPayoff& x,
                         const RiskEnvelope& envelope, int level) {
  check_level(tree, level, "exposed_face");
  require_valid(envelope, tree);
  ExposedFace f;
  f.level = level;
  f.kind = envelope.kind();
  f.kernel = PredictableProcess(tree);
  if (envelope.kind() == RiskEnvelope::Kind::cvar) {
    f.has_kernel = false;
    const auto q = cvar_worst_density(tree, x, envelope.cvar_level(), level);
    f.density = density_from_terminal(tree, q, level);
    f.value = weighted_loss(tree, q, x, level);
    return f;
  }
  const auto s = solve_tree(tree, negated(tree, x), envelope.driver());
  for (int k = level; k < tree.steps(); ++k)
    for (std::size_t j = 0; j < ScenarioTree::width(k); ++j) f.kernel(k, j) = s.kernel(k, j);
  f.density = kernel_density(tree, f.kernel, level);
  const auto y = s.value.level(level);
  f.value.assign(y.begin(), y.end());
  return f;
}

bool SubdifferentialBounds::probes_within() const {
  return std::all_of(probes.begin(), probes.end(), [](const auto& p) { return p.within; });
}

SubdifferentialBounds subdifferential_bounds(const ScenarioTree& tree, const TerminalPayoff& x,
                                             const TerminalPayoff& y, const RiskEnvelope& envelope,
                                             int level, std::vector<double> thetas,
                                             std::size_t bound) {
  if (y.size() != tree.leaf_count())
    throw std::invalid_argument("subdifferential_bounds: direction has the wrong leaf count");
  const auto face = exposed_face(tree, x, envelope, level);
  SubdifferentialBounds r;
  r.level = level;
  r.upper = weighted_loss(tree, face.terminal_density(), y, level);
  r.lower = r.upper;

  if (face.has_kernel) {
    const auto s = solve_tree(tree, negated(tree, x), envelope.driver());
    const auto& ks = envelope.kernels();
    struct Tie {
      int level;
      std::size_t node;
      std::vector<double> vertices;
    };
    std::vector<Tie> ties;
    constexpr double eps = std::numeric_limits<double>::epsilon();
    for (int k = level; k < tree.steps(); ++k)
      for (std::size_t j = 0; j < ScenarioTree::width(k); ++j) {
        const double up = s.value(k + 1, ScenarioTree::up(j));
        const double down = s.value(k + 1, ScenarioTree::down(j));
        const double slack = 64.0 * eps * (std::abs(up) + std::abs(down)) / (2.0 * tree.sqrt_dt());
        if (std::abs(s.integrand(k, j)) <= slack) {
          auto v = ks.vertices(k, j);
          if (v.size() > 1) ties.push_back({k, j, std::move(v)});
        }
      }
    r.tie_nodes = ties.size();
    std::size_t total = 1;
    for (const auto& t : ties) {
      if (total > bound / t.vertices.size())
        throw CapacityError("subdifferential_bounds: more than " + std::to_string(bound) +
                            " tie selections");
      total *= t.vertices.size();
    }
    r.selections = total;
    if (!ties.empty()) {
      std::vector<std::size_t> pick(ties.size(), 0);
      auto phi = face.kernel;
      for (std::size_t sel = 0; sel < total; ++sel) {
        for (std::size_t i = 0; i < ties.size(); ++i)
          phi(ties[i].level, ties[i].node) = ties[i].vertices[pick[i]];
        const auto d = kernel_density(tree, phi, level);
        const auto v = weighted_loss(tree, d.terminal, y, level);
        for (std::size_t j = 0; j < v.size(); ++j) {
          r.upper[j] = std::max(r.upper[j], v[j]);
          r.lower[j] = std::min(r.lower[j], v[j]);
        }
        for (std::size_t i = ties.size(); i-- > 0;) {
          if (++pick[i] < ties[i].vertices.size()) break;
          pick[i] = 0;
        }
      }
    }
  }

  const auto base = face.value;
  for (double theta : thetas) {
    if (theta == 0.0 || !std::isfinite(theta))
      throw std::invalid_argument("subdifferential_bounds: probe step must be finite and nonzero");
    std::vector<double> moved(tree.leaf_count());
    for (std::size_t i = 0; i < moved.size(); ++i) moved[i] = x[i] + theta * y[i];
    const auto c = coherent(tree, TerminalPayoff(tree, std::move(moved)), envelope, level).values;
    SubdifferentialProbe p{theta, std::vector<double>(c.size()), true};
    const double tol = 10.0 * std::abs(theta);
    for (std::size_t j = 0; j < c.size(); ++j) {
      p.quotient[j] = (c[j] - base[j]) / theta;
      if (!(p.quotient[j] >= r.lower[j] - tol && p.quotient[j] <= r.upper[j] + tol))
        p.within = false;
    }
    r.probes.push_back(std::move(p));
  }
  return r;
}

PredictableProcess doleans_loss_process(const ScenarioTree& tree,
                                        const AssetModel::Coefficients& coeffs,
                                        const ExposedFace& face, LossRoute route) {
  if (route == LossRoute::automatic)
    route = face.has_kernel ? LossRoute::kernel : LossRoute::density;
  if (route == LossRoute::kernel && !face.has_kernel)
    throw EnvelopeError("doleans_loss_process: the face carries no kernel process");
  const std::size_t d = coeffs.drift.dim();
  PredictableProcess ell(tree, d);
  for (int k = 0; k < tree.steps(); ++k)
    for (std::size_t j = 0; j < ScenarioTree::width(k); ++j) {
      const double dk = face.density.values(k, j);
      const double zeta = route == LossRoute::kernel ? 0.0 : density_integrand(tree, face.density, k, j);
      for (std::size_t i = 0; i < d; ++i) {
        const double b = coeffs.drift(k, j, i);
        const double s = coeffs.diffusion(k, j, i);
        ell(k, j, i) = route == LossRoute::kernel ? -(b + s * face.kernel(k, j)) * dk
                                                  : -(b * dk + s * zeta);
      }
    }
  return ell;
}

PredictableProcess doleans_loss_process(const ScenarioTree& tree, const AssetModel& model,
                                        const ExposedFace& face, LossRoute route) {
  return doleans_loss_process(tree, model.tabulate(tree), face, route);
}

std::vector<double> indicator_loss(const ScenarioTree& tree, const AssetModel::Coefficients& coeffs,
                                   const ExposedFace& face,
                                   const std::vector<std::pair<int, std::size_t>>& nodes) {
  const int n = tree.steps();
  const std::size_t d = coeffs.drift.dim();
  const auto& q = face.terminal_density();
  std::vector<double> mu(d, 0.0);
  for (std::size_t i = 0; i < d; ++i) {
    // Terminal wealth of one share of asset i held on the node set.
    std::vector<double> xt(tree.leaf_count(), 0.0);
    for (const auto& [k, j] : nodes) {
      if (k < 0 || k >= n || j >= ScenarioTree::width(k))
        throw std::invalid_argument("indicator_loss: node outside the predictable range");
      const std::size_t block = ScenarioTree::width(n - k);
      for (std::size_t leaf = j * block; leaf < (j + 1) * block; ++leaf) {
        const std::size_t child = ScenarioTree::ancestor(leaf, n, k + 1);
        xt[leaf] += coeffs.drift(k, j, i) * tree.dt() +
                    coeffs.diffusion(k, j, i) * tree.increment_into(child);
      }
    }
    for (std::size_t leaf = 0; leaf < xt.size(); ++leaf) xt[leaf] = -xt[leaf] * q[leaf];
    mu[i] = cond_expectation(xt, n, 0)[0];
  }
  return mu;
}

double ContributionReport::max_coherent_residual() const { return max_abs(coherent_residual); }
double ContributionReport::max_deviation_residual() const { return max_abs(deviation_residual); }
double ContributionReport::max_discrepancy_mean() const { return max_abs(discrepancy_mean); }

ContributionReport marginal_and_total_contributions(const ScenarioTree& tree,
                                                    const AssetModel& model, const Policy& policy,
                                                    double x0, const RiskEnvelope& envelope,
                                                    int level) {
  check_level(tree, level, "marginal_and_total_contributions");
  auto coeffs = model.tabulate(tree);
  ContributionReport r;
  r.level = level;
  r.assets = model.asset_count();
  r.wealth = wealth(tree, coeffs, policy, x0);
  r.shares = policy.shares();
  const auto x = r.wealth.terminal_payoff(tree);
  r.face = exposed_face(tree, x, envelope, level);
  r.ell = doleans_loss_process(tree, coeffs, r.face);

  const std::size_t d = r.assets;
  r.marginal_coherent = r.ell;
  r.marginal_deviation = PredictableProcess(tree, d);
  r.marginal_deviation_alt = PredictableProcess(tree, d);
  r.discrepancy = PredictableProcess(tree, d);
  r.contribution_coherent = PredictableProcess(tree, d);
  r.contribution_deviation = PredictableProcess(tree, d);
  for (int k = 0; k < tree.steps(); ++k)
    for (std::size_t j = 0; j < ScenarioTree::width(k); ++j) {
      const double dk = r.face.density.values(k, j);
      const double kern = r.face.has_kernel ? r.face.kernel(k, j) * dk
                                            : density_integrand(tree, r.face.density, k, j);
      for (std::size_t i = 0; i < d; ++i) {
        const double u = r.shares(k, j, i);
        const double md = r.ell(k, j, i) + coeffs.drift(k, j, i);
        r.marginal_deviation(k, j, i) = md;
        r.marginal_deviation_alt(k, j, i) = -coeffs.diffusion(k, j, i) * kern;
        r.discrepancy(k, j, i) = md - r.marginal_deviation_alt(k, j, i);
        r.contribution_coherent(k, j, i) = u * r.ell(k, j, i);
        r.contribution_deviation(k, j, i) = u * md;
      }
    }

  r.coherent_value = coherent(tree, x, envelope, level).values;
  r.deviation_value = deviation(tree, x, envelope, level).values;
  r.coherent_aggregate = accumulate_dot(tree, r.shares, r.marginal_coherent, level);
  r.deviation_aggregate = accumulate_dot(tree, r.shares, r.marginal_deviation, level);
  r.discrepancy_mean = accumulate_dot(tree, r.shares, r.discrepancy, level);
  const auto xt = r.wealth.values.level(level);
  const std::size_t w = ScenarioTree::width(level);
  r.coherent_residual.resize(w);
  r.deviation_residual.resize(w);
  for (std::size_t j = 0; j < w; ++j) {
    r.coherent_aggregate[j] -= xt[j];
    r.coherent_residual[j] = r.coherent_value[j] - r.coherent_aggregate[j];
    r.deviation_residual[j] = r.deviation_value[j] - r.deviation_aggregate[j];
  }
  r.drift = std::move(coeffs.drift);
  r.diffusion = std::move(coeffs.diffusion);
  return r;
}

ContributionConsistency contribution_time_consistency(const ScenarioTree& tree,
                                                      const AssetModel& model,
                                                      const Policy& policy, double x0,
                                                      const RiskEnvelope& envelope, int t1, int t2) {
  const auto a = marginal_and_total_contributions(tree, model, policy, x0, envelope, t1);
  const auto b = marginal_and_total_contributions(tree, model, policy, x0, envelope, t2);
  ContributionConsistency r;
  r.t1 = t1;
  r.t2 = t2;
  r.time_consistent_family = envelope.kind() != RiskEnvelope::Kind::cvar;
  const std::size_t d = a.assets;
  for (const auto* rep : {&a, &b})
    for (int k = 0; k < tree.steps(); ++k)
      for (std::size_t j = 0; j < ScenarioTree::width(k); ++j)
        for (std::size_t i = 0; i < d; ++i)
          r.correspondence_residual =
              std::max(r.correspondence_residual,
                       std::abs(rep->marginal_deviation(k, j, i) - rep->marginal_coherent(k, j, i) -
                                rep->drift(k, j, i)));
  for (int k = std::max(t1, t2); k < tree.steps(); ++k)
    for (std::size_t j = 0; j < ScenarioTree::width(k); ++j) {
      if (a.face.has_kernel && b.face.has_kernel)
        r.kernel_residual =
            std::max(r.kernel_residual, std::abs(a.face.kernel(k, j) - b.face.kernel(k, j)));
      const double da = a.face.density.values(k, j);
      const double db = b.face.density.values(k, j);
      for (std::size_t i = 0; i < d; ++i) {
        const double ma = a.marginal_coherent(k, j, i);
        const double mb = b.marginal_coherent(k, j, i);
        r.marginal_residual = std::max(r.marginal_residual, std::abs(ma - mb));
        if (da > 0.0 && db > 0.0)
          r.normalized_residual = std::max(r.normalized_residual, std::abs(ma / da - mb / db));
      }
    }
  return r;
}

double ZIdentityReport::max_residual() const { return max_abs(residual); }
double ZIdentityReport::max_z_formula_residual() const { return max_abs(z_formula_residual); }
double ZIdentityReport::max_aggregate_residual() const {
  return std::max(max_abs(aggregate_residual), max_abs(aggregate_residual_alt));
}

ZIdentityReport z_identity_check(const ScenarioTree& tree, const AssetModel& model,
                                 const Policy& policy, double x0, const RiskEnvelope& envelope,
                                 int level) {
  if (envelope.kind() == RiskEnvelope::Kind::cvar)
    throw EnvelopeError("z_identity_check: needs a kernel-generated envelope");
  const auto rep = marginal_and_total_contributions(tree, model, policy, x0, envelope, level);
  const auto s = solve_tree(tree, negated(tree, rep.wealth.terminal_payoff(tree)), envelope.driver());
  const int n = tree.steps();
  const std::size_t d = rep.assets;

  ZIdentityReport r;
  r.level = level;
  // Z phi_hat as a scalar predictable process, for accumulation.
  PredictableProcess zphi(tree);
  PredictableProcess one(tree, 1, 1.0);
  PredictableProcess cd(tree), cd_alt(tree);
  for (int k = level; k < n; ++k)
    for (std::size_t j = 0; j < ScenarioTree::width(k); ++j) {
      const double z = s.integrand(k, j);
      const double phi = s.kernel(k, j);
      const double dk = rep.face.density.values(k, j);
      double sum = 0.0, sum_ell = 0.0, u_sigma = 0.0, drift_term = 0.0;
      for (std::size_t i = 0; i < d; ++i) {
        const double u = rep.shares(k, j, i);
        sum += u * rep.marginal_deviation_alt(k, j, i);
        sum_ell += u * rep.marginal_deviation(k, j, i);
        u_sigma += u * rep.diffusion(k, j, i);
        drift_term += u * rep.drift(k, j, i) * (1.0 - dk);
      }
      zphi(k, j) = z * phi;
      cd(k, j) = sum_ell;
      cd_alt(k, j) = sum;
      const double res = sum - z * phi;
      const double zres = z + u_sigma * dk;
      r.max_path_residual = std::max(r.max_path_residual, std::abs(res));
      r.max_path_z_formula_residual = std::max(r.max_path_z_formula_residual, std::abs(zres));
      r.max_drift_term = std::max(r.max_drift_term, std::abs(drift_term));
      if (k == level) {
        r.residual.push_back(res);
        r.residual_ell.push_back(sum_ell - z * phi);
        r.z_formula_residual.push_back(zres);
      }
    }
  const auto a = accumulate_dot(tree, cd, one, level);
  const auto a_alt = accumulate_dot(tree, cd_alt, one, level);
  const auto g = accumulate_dot(tree, zphi, one, level);
  for (std::size_t j = 0; j < g.size(); ++j) {
    r.aggregate_residual.push_back(a[j] - g[j]);
    r.aggregate_residual_alt.push_back(a_alt[j] - g[j]);
  }
  return r;
}

StaticPortfolio::StaticPortfolio(Eigen::VectorXd weights, Eigen::MatrixXd covariance)
    : w_(std::move(weights)), cov_(std::move(covariance)) {
  const auto d = w_.size();
  if (d == 0) throw std::invalid_argument("static portfolio: no assets");
  if (cov_.rows() != d || cov_.cols() != d)
    throw std::invalid_argument("static portfolio: covariance must be " + std::to_string(d) + "x" +
                                std::to_string(d));
  if (!w_.allFinite() || !cov_.allFinite())
    throw std::domain_error("static portfolio: non-finite input");
  const double scale = cov_.cwiseAbs().maxCoeff();
  if ((cov_ - cov_.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
    throw std::domain_error("static portfolio: covariance is not symmetric");
  if (Eigen::LLT<Eigen::MatrixXd>(cov_).info() != Eigen::Success)
    throw std::domain_error("static portfolio: covariance is not positive definite");
  if (w_.cwiseAbs().maxCoeff() == 0.0)
    throw std::domain_error("static portfolio: weights are all zero");
}

StaticContribution static_stddev_contribution(const StaticPortfolio& portfolio) {
  const auto& w = portfolio.weights();
  const Eigen::VectorXd lw = portfolio.covariance() * w;
  StaticContribution r;
  r.total = std::sqrt(w.dot(lw));
  r.marginals = lw / r.total;
  r.contributions = w.cwiseProduct(r.marginals);
  return r;
}

}  // namespace dynrisk
