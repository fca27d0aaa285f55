#include "dynrisk/bsde.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace dynrisk {

BsdeSolution solve_tree(const ScenarioTree& tree, const TerminalPayoff& terminal,
                        const Driver& driver) {
  const int n = tree.steps();
  BsdeSolution s{AdaptedProcess(tree), PredictableProcess(tree), PredictableProcess(tree)};
  std::copy(terminal.values().begin(), terminal.values().end(), s.value.level(n).begin());
  const double scale = 2.0 * tree.sqrt_dt();
  for (int k = n - 1; k >= 0; --k)
    for (std::size_t j = 0; j < ScenarioTree::width(k); ++j) {
      const double up = s.value(k + 1, ScenarioTree::up(j));
      const double down = s.value(k + 1, ScenarioTree::down(j));
      const double z = (up - down) / scale;
      const double g = driver(k, j, z);
      if (!std::isfinite(g))
        throw std::domain_error("driver output is not finite at level " + std::to_string(k) +
                                ", node " + std::to_string(j));
      s.integrand(k, j) = z;
      s.kernel(k, j) = driver.subgradient(k, j, z);
      s.value(k, j) = 0.5 * (up + down) + g * tree.dt();
    }
  return s;
}

std::vector<double> g_expectation(const ScenarioTree& tree, const TerminalPayoff& x,
                                  const Driver& driver, int level) {
  if (level < 0 || level > tree.steps())
    throw std::invalid_argument("g_expectation: level " + std::to_string(level) + " out of range");
  const auto s = solve_tree(tree, x, driver);
  const auto y = s.value.level(level);
  return {y.begin(), y.end()};
}

}  // namespace dynrisk
