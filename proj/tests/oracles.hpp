#pragma once

// Brute-force reference computations for the tests. They deliberately avoid
// the library's recursions: expectations are plain block averages over
// leaves, densities are products along explicit paths.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <vector>

#include "dynrisk/tree.hpp"

namespace oracle {

inline std::vector<double> gaussian_leaves(const dynrisk::ScenarioTree& tree, std::mt19937_64& rng,
                                           double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  std::vector<double> v(tree.leaf_count());
  for (double& x : v) x = g(rng);
  return v;
}

// E[X | F_level] as the arithmetic mean of each block of leaves.
inline std::vector<double> block_mean(const std::vector<double>& leaves, int steps, int level) {
  const std::size_t block = std::size_t{1} << (steps - level);
  std::vector<double> out(std::size_t{1} << level, 0.0);
  for (std::size_t i = 0; i < leaves.size(); ++i) out[i / block] += leaves[i];
  for (double& v : out) v /= static_cast<double>(block);
  return out;
}

// Bit of `leaf` that records the move on step k (1 = down).
inline bool moved_down(std::size_t leaf, int steps, int k) { return (leaf >> (steps - 1 - k)) & 1; }

inline double brownian_leaf(const dynrisk::ScenarioTree& tree, std::size_t leaf) {
  double b = 0.0;
  for (int k = 0; k < tree.steps(); ++k) b += moved_down(leaf, tree.steps(), k) ? -tree.sqrt_dt() : tree.sqrt_dt();
  return b;
}

// max over every node-wise selection phi in {lo, hi} of E[-X Q], Q the
// product of (1 + phi dB sqrt-normalised) along each path. Exhaustive: the
// selection is a bit mask over the 2^N - 1 decision nodes.
inline double vertex_max_loss(const dynrisk::ScenarioTree& tree, const std::vector<double>& x,
                              double lo, double hi) {
  const int n = tree.steps();
  const std::size_t nodes = (std::size_t{1} << n) - 1;
  double best = -std::numeric_limits<double>::infinity();
  for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << nodes); ++mask) {
    double total = 0.0;
    for (std::size_t leaf = 0; leaf < x.size(); ++leaf) {
      double q = 1.0;
      std::size_t node = 0;
      for (int k = 0; k < n; ++k) {
        const std::size_t flat = (std::size_t{1} << k) - 1 + node;  // level-major index
        const double phi = (mask >> flat) & 1 ? hi : lo;
        const bool down = moved_down(leaf, n, k);
        q *= 1.0 + phi * (down ? -tree.sqrt_dt() : tree.sqrt_dt());
        node = 2 * node + (down ? 1 : 0);
      }
      total += -x[leaf] * q;
    }
    best = std::max(best, total / static_cast<double>(x.size()));
  }
  return best;
}

// CVaR of the loss -X on equally likely outcomes through the
// Rockafellar-Uryasev minimisation min_c c + E[(L - c)^+] / lambda, whose
// minimum is attained at one of the outcomes.
inline double ru_cvar(const std::vector<double>& x, double lambda) {
  double best = std::numeric_limits<double>::infinity();
  const double n = static_cast<double>(x.size());
  for (double xc : x) {
    const double c = -xc;
    double tail = 0.0;
    for (double xi : x) tail += std::max(-xi - c, 0.0);
    best = std::min(best, c + tail / n / lambda);
  }
  return best;
}

inline std::vector<double> vec(std::span<const double> s) { return {s.begin(), s.end()}; }

inline double rel_err(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

}  // namespace oracle
