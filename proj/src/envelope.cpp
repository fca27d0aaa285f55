#include "dynrisk/envelope.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

namespace dynrisk {

namespace {

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

double least_abs(const std::vector<double>& sorted) {
  double best = sorted.front();
  for (double v : sorted)
    if (std::abs(v) < std::abs(best)) best = v;
  return best;
}

}  // namespace

KernelSet KernelSet::interval(double lo, double hi) {
  if (!(lo <= hi) || !std::isfinite(lo) || !std::isfinite(hi))
    throw std::invalid_argument("kernel interval needs finite lo <= hi, got [" + fmt(lo) + ", " +
                                fmt(hi) + "]");
  return KernelSet(IntervalRule([lo, hi](int, std::size_t) { return KernelInterval{lo, hi}; }), true);
}

KernelSet KernelSet::interval(IntervalRule rule, bool node_independent) {
  return KernelSet(std::move(rule), node_independent);
}

KernelSet KernelSet::finite(std::vector<double> values) {
  if (values.empty()) throw std::invalid_argument("finite kernel set is empty");
  for (double v : values)
    if (!std::isfinite(v)) throw std::invalid_argument("finite kernel set holds a non-finite value");
  std::sort(values.begin(), values.end());
  values.erase(std::unique(values.begin(), values.end()), values.end());
  return KernelSet(FiniteRule([values](int, std::size_t) { return values; }), true);
}

KernelSet KernelSet::finite(FiniteRule rule, bool node_independent) {
  return KernelSet(std::move(rule), node_independent);
}

std::vector<double> KernelSet::vertices(int level, std::size_t node) const {
  if (const auto* r = std::get_if<IntervalRule>(&rule_)) {
    const auto iv = (*r)(level, node);
    if (iv.lo == iv.hi) return {iv.lo};
    return {iv.lo, iv.hi};
  }
  auto v = std::get<FiniteRule>(rule_)(level, node);
  if (v.empty())
    throw std::invalid_argument("finite kernel set is empty at level " + std::to_string(level));
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

KernelInterval KernelSet::hull(int level, std::size_t node) const {
  if (const auto* r = std::get_if<IntervalRule>(&rule_)) return (*r)(level, node);
  const auto v = vertices(level, node);
  return {v.front(), v.back()};
}

bool KernelSet::contains_zero(int level, std::size_t node) const {
  if (const auto* r = std::get_if<IntervalRule>(&rule_)) {
    const auto iv = (*r)(level, node);
    return iv.lo <= 0.0 && 0.0 <= iv.hi;
  }
  const auto v = vertices(level, node);
  return std::binary_search(v.begin(), v.end(), 0.0);
}

SupportPoint KernelSet::support(int level, std::size_t node, double z) const {
  double lo = 0.0;
  double hi = 0.0;
  double tie = 0.0;
  if (const auto* r = std::get_if<IntervalRule>(&rule_)) {
    const auto iv = (*r)(level, node);
    lo = iv.lo;
    hi = iv.hi;
    tie = lo > 0.0 ? lo : (hi < 0.0 ? hi : 0.0);
  } else {
    const auto v = vertices(level, node);
    lo = v.front();
    hi = v.back();
    tie = least_abs(v);
  }
  // phi * z is linear in phi, so the sup sits on an extreme kernel.
  const double arg = z > 0.0 ? hi : (z < 0.0 ? lo : tie);
  return {arg * z, arg};
}

SupportPoint support_function(const KernelSet& kernels, int level, std::size_t node, double z) {
  return kernels.support(level, node, z);
}

Driver::Driver(Rule value, Rule subgradient, bool node_independent)
    : value_(std::move(value)),
      subgradient_(std::move(subgradient)),
      node_independent_(node_independent) {}

Driver Driver::from_kernels(const KernelSet& kernels) {
  return Driver([kernels](int k, std::size_t j, double z) { return kernels.support(k, j, z).value; },
                [kernels](int k, std::size_t j, double z) { return kernels.support(k, j, z).argmax; },
                kernels.node_independent());
}

Driver Driver::zero() {
  return Driver([](int, std::size_t, double) { return 0.0; },
                [](int, std::size_t, double) { return 0.0; }, true);
}

RiskEnvelope RiskEnvelope::kernel_generated(KernelSet kernels, std::string text) {
  return RiskEnvelope(Kind::kernel_generated, std::move(kernels), 0.0, std::move(text));
}

RiskEnvelope RiskEnvelope::kappa(double kappa) {
  return kernel_generated(KernelSet::kappa(kappa), "kappa(" + fmt(kappa) + ")");
}

RiskEnvelope RiskEnvelope::interval(double lo, double hi) {
  return kernel_generated(KernelSet::interval(lo, hi), "interval(" + fmt(lo) + ", " + fmt(hi) + ")");
}

RiskEnvelope RiskEnvelope::cvar(double lambda) {
  if (!(lambda > 0.0 && lambda <= 1.0))
    throw std::invalid_argument("CVaR level must lie in (0, 1], got " + fmt(lambda));
  return RiskEnvelope(Kind::cvar, std::nullopt, lambda, "cvar(" + fmt(lambda) + ")");
}

RiskEnvelope RiskEnvelope::reference_only() {
  return RiskEnvelope(Kind::reference_only, KernelSet::interval(0.0, 0.0), 0.0, "reference");
}

const KernelSet& RiskEnvelope::kernels() const {
  if (!kernels_) throw EnvelopeError("CVaR envelopes are not kernel-generated");
  return *kernels_;
}

double RiskEnvelope::cvar_level() const {
  if (kind_ != Kind::cvar) throw EnvelopeError("envelope is not a CVaR envelope");
  return lambda_;
}

Driver RiskEnvelope::driver() const { return Driver::from_kernels(kernels()); }

std::string RiskEnvelope::describe() const { return text_; }

std::vector<double> worst_case_loss(const ScenarioTree& tree, const TerminalPayoff& x,
                                    const KernelSet& kernels, int level) {
  const int n = tree.steps();
  if (level < 0 || level > n) throw std::invalid_argument("worst_case_loss: level out of range");
  std::vector<double> v(x.values().begin(), x.values().end());
  for (double& e : v) e = -e;
  for (int k = n - 1; k >= level; --k) {
    std::vector<double> next(ScenarioTree::width(k));
    for (std::size_t j = 0; j < next.size(); ++j) {
      const double up = v[2 * j];
      const double down = v[2 * j + 1];
      double best = -std::numeric_limits<double>::infinity();
      for (double phi : kernels.vertices(k, j)) {
        const double p = 0.5 * (1.0 + phi * tree.sqrt_dt());
        best = std::max(best, p * up + (1.0 - p) * down);
      }
      next[j] = best;
    }
    v = std::move(next);
  }
  return v;
}

TerminalPayoff cvar_worst_density(const ScenarioTree& tree, const TerminalPayoff& x,
                                  double lambda, int level) {
  if (!(lambda > 0.0 && lambda <= 1.0))
    throw std::invalid_argument("CVaR level must lie in (0, 1], got " + fmt(lambda));
  const int n = tree.steps();
  if (level < 0 || level > n) throw std::invalid_argument("cvar_worst_density: level out of range");
  const std::size_t block = ScenarioTree::width(n - level);
  const double p = 1.0 / static_cast<double>(block);
  const double cap = 1.0 / lambda;
  std::vector<double> q(tree.leaf_count(), 0.0);
  std::vector<std::size_t> order(block);
  for (std::size_t start = 0; start < q.size(); start += block) {
    std::iota(order.begin(), order.end(), start);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
    double remaining = 1.0;
    for (std::size_t leaf : order) {
      if (remaining <= 0.0) break;
      const double mass = std::min(cap * p, remaining);
      q[leaf] = mass / p;
      remaining -= mass;
    }
  }
  return TerminalPayoff(tree, std::move(q));
}

DensityProcess density_from_terminal(const ScenarioTree& tree, const TerminalPayoff& q,
                                     int level) {
  const int n = tree.steps();
  DensityProcess d{level, AdaptedProcess(tree, 1, 1.0), q};
  std::vector<double> cur(q.values().begin(), q.values().end());
  std::copy(cur.begin(), cur.end(), d.values.level(n).begin());
  for (int k = n - 1; k >= level; --k) {
    cur = cond_expectation(cur, k + 1, k);
    std::copy(cur.begin(), cur.end(), d.values.level(k).begin());
  }
  return d;
}

EnvelopeValidation envelope_validate(const RiskEnvelope& envelope, const ScenarioTree& tree,
                                     int a1_samples, std::uint64_t seed) {
  EnvelopeValidation r;
  if (envelope.kind() == RiskEnvelope::Kind::cvar) {
    // 1 is admissible for every lambda in (0, 1]; densities below 1/lambda
    // keep D_t(X) within the conditional lower range.
    r.a1 = A1Status::certified;
    return r;
  }
  const auto& ks = envelope.kernels();
  for (int k = 0; k < tree.steps(); ++k)
    for (std::size_t j = 0; j < ScenarioTree::width(k); ++j) {
      const auto iv = ks.hull(k, j);
      if (!(iv.lo <= iv.hi)) {
        if (r.ordered)
          r.issues.push_back("kernel bounds out of order at level " + std::to_string(k) +
                             ", node " + std::to_string(j));
        r.ordered = false;
      }
      if (r.a2_holds && !ks.contains_zero(k, j)) {
        r.a2_holds = false;
        r.issues.push_back("A2: reference density not admissible (0 not in kernel set) at level " +
                           std::to_string(k) + ", node " + std::to_string(j));
      }
      const double step = std::max(std::abs(iv.lo), std::abs(iv.hi)) * tree.sqrt_dt();
      r.max_kernel_step = std::max(r.max_kernel_step, step);
      if (r.positivity_holds && !(step < 1.0)) {
        r.positivity_holds = false;
        r.issues.push_back("density positivity: |phi| sqrt(dt) = " + fmt(step) + " at level " +
                           std::to_string(k) + ", node " + std::to_string(j));
      }
    }
  if (a1_samples <= 0 || !r.ok()) return r;

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss;
  const int n = tree.steps();
  r.a1 = A1Status::sampled_pass;
  for (int s = 0; s < a1_samples; ++s) {
    std::vector<double> leaves(tree.leaf_count());
    for (double& v : leaves) v = gauss(rng);
    const TerminalPayoff x(tree, leaves);
    for (int t = 0; t <= n; ++t) {
      const auto loss = worst_case_loss(tree, x, ks, t);
      const auto mean = cond_expectation(tree, x, t);
      const std::size_t block = ScenarioTree::width(n - t);
      for (std::size_t j = 0; j < mean.size(); ++j) {
        const double lowest =
            *std::min_element(leaves.begin() + static_cast<std::ptrdiff_t>(j * block),
                              leaves.begin() + static_cast<std::ptrdiff_t>((j + 1) * block));
        const double deviation = loss[j] + mean[j];
        const double excess = deviation - (mean[j] - lowest);
        r.a1_worst_excess = std::max(r.a1_worst_excess, excess);
      }
    }
  }
  if (r.a1_worst_excess > 1e-12) {
    r.a1 = A1Status::sampled_violation;
    r.issues.push_back("A1: sampled deviation exceeds the lower range by " +
                       fmt(r.a1_worst_excess));
  }
  return r;
}

void require_valid(const RiskEnvelope& envelope, const ScenarioTree& tree) {
  const auto r = envelope_validate(envelope, tree, 0);
  if (r.ok()) return;
  std::string msg = "envelope " + envelope.describe() + " failed validation:";
  for (const auto& issue : r.issues) msg += " " + issue + ";";
  throw EnvelopeError(msg);
}

std::size_t extreme_density_count(const RiskEnvelope& envelope, const ScenarioTree& tree,
                                  int level) {
  if (envelope.kind() == RiskEnvelope::Kind::cvar) return 1;
  const auto& ks = envelope.kernels();
  std::size_t count = 1;
  for (int k = level; k < tree.steps(); ++k)
    for (std::size_t j = 0; j < ScenarioTree::width(k); ++j) {
      const std::size_t m = ks.vertices(k, j).size();
      if (count > std::numeric_limits<std::size_t>::max() / m)
        return std::numeric_limits<std::size_t>::max();
      count *= m;
    }
  return count;
}

void for_each_extreme_density(const RiskEnvelope& envelope, const ScenarioTree& tree, int level,
                              const DensityVisitor& visit, const TerminalPayoff* payoff,
                              std::size_t bound) {
  const int n = tree.steps();
  if (level < 0 || level > n) throw std::invalid_argument("extreme densities: level out of range");
  if (envelope.kind() == RiskEnvelope::Kind::cvar) {
    if (payoff == nullptr)
      throw std::invalid_argument("CVaR extreme density needs the payoff it is optimal for");
    const auto q = cvar_worst_density(tree, *payoff, envelope.cvar_level(), level);
    visit(PredictableProcess(tree), density_from_terminal(tree, q, level));
    return;
  }
  const std::size_t total = extreme_density_count(envelope, tree, level);
  if (total > bound)
    throw CapacityError("vertex density enumeration needs " +
                        (total == std::numeric_limits<std::size_t>::max() ? std::string("> 2^64")
                                                                          : std::to_string(total)) +
                        " densities, bound is " + std::to_string(bound));

  struct Slot {
    int level;
    std::size_t node;
    std::vector<double> choices;
  };
  std::vector<Slot> slots;
  const auto& ks = envelope.kernels();
  for (int k = level; k < n; ++k)
    for (std::size_t j = 0; j < ScenarioTree::width(k); ++j) slots.push_back({k, j, ks.vertices(k, j)});

  PredictableProcess kernel(tree);
  std::vector<std::size_t> digit(slots.size(), 0);
  for (const auto& s : slots) kernel(s.level, s.node) = s.choices.front();
  for (std::size_t count = 0; count < total; ++count) {
    const auto e = doleans_exponential(tree, kernel, level);
    const auto last = e.level(n);
    DensityProcess d{level, e, TerminalPayoff(tree, std::vector<double>(last.begin(), last.end()))};
    visit(kernel, d);
    // Odometer: the last decision node turns fastest.
    for (std::size_t i = slots.size(); i-- > 0;) {
      auto& s = slots[i];
      if (++digit[i] < s.choices.size()) {
        kernel(s.level, s.node) = s.choices[digit[i]];
        break;
      }
      digit[i] = 0;
      kernel(s.level, s.node) = s.choices.front();
    }
  }
}

std::vector<DensityProcess> extreme_densities(const RiskEnvelope& envelope,
                                              const ScenarioTree& tree, int level,
                                              const TerminalPayoff* payoff, std::size_t bound) {
  std::vector<DensityProcess> out;
  for_each_extreme_density(
      envelope, tree, level,
      [&](const PredictableProcess&, const DensityProcess& d) { out.push_back(d); }, payoff, bound);
  return out;
}

}  // namespace dynrisk
