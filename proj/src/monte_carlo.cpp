#include "dynrisk/monte_carlo.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

namespace dynrisk {

namespace {

// Fitted values of y regressed on the columns of f with an unpenalised
// intercept; slopes carry a ridge penalty of `ridge * trace` on the centred Gram.
Eigen::VectorXd fit(const Eigen::MatrixXd& f, const Eigen::VectorXd& y, double ridge) {
  const double y_mean = y.mean();
  const Eigen::RowVectorXd f_mean = f.colwise().mean();
  const Eigen::MatrixXd fc = f.rowwise() - f_mean;
  const Eigen::MatrixXd gram = fc.transpose() * fc;
  const double trace = gram.trace();
  if (!std::isfinite(trace)) throw RegressionError("regression features are not finite", NAN);
  if (trace <= 0.0) return Eigen::VectorXd::Constant(y.size(), y_mean);

  const Eigen::VectorXd yc = y.array() - y_mean;
  const Eigen::MatrixXd a =
      gram + ridge * trace * Eigen::MatrixXd::Identity(gram.rows(), gram.cols());
  const Eigen::LDLT<Eigen::MatrixXd> ldlt(a);
  const Eigen::VectorXd beta = ldlt.solve(fc.transpose() * yc);
  if (ldlt.info() != Eigen::Success || !beta.allFinite()) {
    const Eigen::VectorXd ev = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(a).eigenvalues();
    const double cond = ev.maxCoeff() / std::max(ev.minCoeff(), 0.0);
    throw RegressionError("singular regression (condition estimate " + std::to_string(cond) + ")",
                          cond);
  }
  return (fc * beta).array() + y_mean;
}

struct BatchResult {
  double mean = 0.0;
  double variance = 0.0;  // cross-sectional, of the path-wise reconstruction
};

BatchResult solve_batch(const PathEnsemble& ens, std::size_t first, std::size_t count,
                        const PathTerminalRule& terminal, const Driver& driver,
                        const RegressionBasis& basis, double ridge, MonteCarloSolution& out) {
  const int n = ens.steps;
  const std::size_t m = basis.size();
  // Brownian states per path and level.
  Eigen::MatrixXd b(static_cast<Eigen::Index>(count), n + 1);
  Eigen::VectorXd y(static_cast<Eigen::Index>(count));
  Eigen::VectorXd pathwise(static_cast<Eigen::Index>(count));
  for (std::size_t i = 0; i < count; ++i) {
    const auto path = ens.brownian_path(first + i);
    for (int k = 0; k <= n; ++k) b(static_cast<Eigen::Index>(i), k) = path[static_cast<std::size_t>(k)];
    const double xi = terminal(path);
    if (!std::isfinite(xi))
      throw std::domain_error("terminal rule is not finite on path " + std::to_string(first + i));
    y(static_cast<Eigen::Index>(i)) = xi;
    pathwise(static_cast<Eigen::Index>(i)) = xi;
  }
  const auto idx = [&](std::size_t i) { return static_cast<Eigen::Index>(i); };
  for (std::size_t i = 0; i < count; ++i)
    out.value[(first + i) * static_cast<std::size_t>(n + 1) + static_cast<std::size_t>(n)] = y(idx(i));

  Eigen::MatrixXd f(static_cast<Eigen::Index>(count), static_cast<Eigen::Index>(m));
  std::vector<double> row(m);
  for (int k = n - 1; k >= 0; --k) {
    const double t = k * ens.dt;
    for (std::size_t i = 0; i < count; ++i) {
      basis.evaluate(t, b(idx(i), k), row);
      for (std::size_t c = 0; c < m; ++c) f(idx(i), static_cast<Eigen::Index>(c)) = row[c];
    }
    const Eigen::VectorXd cond_mean = fit(f, y, ridge);
    Eigen::VectorXd target(static_cast<Eigen::Index>(count));
    for (std::size_t i = 0; i < count; ++i) {
      const double db = ens.increment(first + i, k);
      target(idx(i)) = (y(idx(i)) - cond_mean(idx(i))) * db / ens.dt;
    }
    const Eigen::VectorXd z = fit(f, target, ridge);
    for (std::size_t i = 0; i < count; ++i) {
      const double g = driver(k, 0, z(idx(i)));
      if (!std::isfinite(g)) throw std::domain_error("driver output is not finite");
      y(idx(i)) = cond_mean(idx(i)) + g * ens.dt;
      pathwise(idx(i)) += g * ens.dt - z(idx(i)) * ens.increment(first + i, k);
      out.value[(first + i) * static_cast<std::size_t>(n + 1) + static_cast<std::size_t>(k)] = y(idx(i));
      out.integrand[(first + i) * static_cast<std::size_t>(n) + static_cast<std::size_t>(k)] = z(idx(i));
    }
  }
  BatchResult r;
  r.mean = pathwise.mean();
  if (count > 1) r.variance = (pathwise.array() - r.mean).square().sum() / static_cast<double>(count - 1);
  return r;
}

}  // namespace

std::vector<double> PathEnsemble::brownian_path(std::size_t path) const {
  std::vector<double> b(static_cast<std::size_t>(steps) + 1, 0.0);
  for (int k = 0; k < steps; ++k)
    b[static_cast<std::size_t>(k) + 1] = b[static_cast<std::size_t>(k)] + increment(path, k);
  return b;
}

PathEnsemble simulate_paths(std::uint64_t seed, int steps, std::size_t path_count, double horizon,
                            std::size_t capacity) {
  if (steps < 1) throw std::invalid_argument("simulate_paths: steps must be >= 1");
  if (path_count < 2) throw std::invalid_argument("simulate_paths: need at least 2 paths");
  if (!(horizon > 0.0) || !std::isfinite(horizon))
    throw std::invalid_argument("simulate_paths: horizon must be positive");
  if (path_count > capacity / static_cast<std::size_t>(steps))
    throw CapacityError("path ensemble of " + std::to_string(path_count) + " x " +
                        std::to_string(steps) + " exceeds the limit of " + std::to_string(capacity));
  PathEnsemble e;
  e.seed = seed;
  e.steps = steps;
  e.path_count = path_count;
  e.horizon = horizon;
  e.dt = horizon / steps;
  e.increments.resize(path_count * static_cast<std::size_t>(steps));
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, std::sqrt(e.dt));
  for (double& x : e.increments) x = gauss(rng);
  return e;
}

RegressionBasis::RegressionBasis(std::size_t feature_count, FeatureRule rule, int degree)
    : count_(feature_count), rule_(std::move(rule)), degree_(degree) {
  if (count_ == 0) throw std::invalid_argument("regression basis needs at least one feature");
}

RegressionBasis RegressionBasis::polynomial(int degree) {
  if (degree < 0) throw std::invalid_argument("polynomial basis degree must be >= 0");
  return RegressionBasis(
      static_cast<std::size_t>(degree) + 1,
      [](double, double state, std::span<double> out) {
        double p = 1.0;
        for (double& v : out) {
          v = p;
          p *= state;
        }
      },
      degree);
}

void RegressionBasis::evaluate(double time, double state, std::span<double> out) const {
  rule_(time, state, out);
  for (double v : out)
    if (!std::isfinite(v)) throw RegressionError("basis feature is not finite", NAN);
}

MonteCarloSolution solve_mc(const PathEnsemble& ensemble, const PathTerminalRule& terminal,
                            const Driver& driver, const RegressionBasis& basis,
                            const MonteCarloOptions& options) {
  if (!driver.node_independent())
    throw std::invalid_argument("Monte-Carlo solver needs a driver that does not depend on the node");
  const std::size_t p = ensemble.path_count;
  const int n = ensemble.steps;
  MonteCarloSolution out;
  out.path_count = p;
  out.steps = n;
  out.value.assign(p * static_cast<std::size_t>(n + 1), 0.0);
  out.integrand.assign(p * static_cast<std::size_t>(n), 0.0);

  const std::size_t min_paths = std::max<std::size_t>(options.min_batch_paths, 2);
  const std::size_t batches = std::clamp<std::size_t>(p / min_paths, 1, std::max<std::size_t>(options.batches, 1));
  out.batches = batches;

  std::vector<double> means(batches);
  std::vector<std::size_t> sizes(batches);
  double single_variance = 0.0;
  for (std::size_t bi = 0; bi < batches; ++bi) {
    const std::size_t first = bi * p / batches;
    const std::size_t last = (bi + 1) * p / batches;
    const auto r = solve_batch(ensemble, first, last - first, terminal, driver, basis,
                               options.ridge, out);
    means[bi] = r.mean;
    sizes[bi] = last - first;
    single_variance = r.variance;
  }
  double y0 = 0.0;
  for (std::size_t bi = 0; bi < batches; ++bi)
    y0 += means[bi] * static_cast<double>(sizes[bi]) / static_cast<double>(p);
  out.y0 = y0;
  if (batches == 1) {
    out.standard_error = std::sqrt(single_variance / static_cast<double>(p));
  } else {
    double ss = 0.0;
    for (double m : means) ss += (m - y0) * (m - y0);
    out.standard_error = std::sqrt(ss / static_cast<double>(batches - 1) / static_cast<double>(batches));
  }
  return out;
}

}  // namespace dynrisk
