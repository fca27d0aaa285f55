#pragma once

#include <vector>

#include "dynrisk/envelope.hpp"
#include "dynrisk/tree.hpp"

namespace dynrisk {

/// (Y, Z) of -dY = g(Z) dt - Z dB, Y_N = xi, on the tree, together with the
/// kernel selected by the driver's subgradient at each Z.
struct BsdeSolution {
  AdaptedProcess value;         // Y
  PredictableProcess integrand; // Z
  PredictableProcess kernel;    // phi_hat = subgradient of g at Z
};

/// Exact backward induction:
///   Z_k = (Y_up - Y_down) / (2 sqrt dt),  Y_k = (Y_up + Y_down)/2 + g_k(Z_k) dt.
BsdeSolution solve_tree(const ScenarioTree& tree, const TerminalPayoff& terminal,
                        const Driver& driver);

/// Conditional g-expectation E_g[X | F_level], i.e. Y at `level`.
std::vector<double> g_expectation(const ScenarioTree& tree, const TerminalPayoff& x,
                                  const Driver& driver, int level);

}  // namespace dynrisk
