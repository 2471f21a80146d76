#pragma once

// Brute-force reference computations used by the unit and acceptance tests.
// They share no code with the library solvers.

#include "scribprop/energy.hpp"
#include "scribprop/maxflow.hpp"

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <vector>

namespace oracle {

struct Arc {
  int from, to;
  double cap;
};

/// Minimum s-t cut by enumerating every partition of the non-terminal nodes.
inline double min_cut(int n, int s, int t, const std::vector<Arc>& arcs) {
  std::vector<int> inner;
  for (int v = 0; v < n; ++v) {
    if (v != s && v != t) inner.push_back(v);
  }
  double best = std::numeric_limits<double>::infinity();
  for (std::uint32_t mask = 0; mask < (1u << inner.size()); ++mask) {
    std::vector<bool> src(n, false);
    src[s] = true;
    for (std::size_t k = 0; k < inner.size(); ++k) src[inner[k]] = (mask >> k) & 1u;
    double cut = 0.0;
    for (const auto& a : arcs) {
      if (src[a.from] && !src[a.to]) cut += a.cap;
    }
    best = std::min(best, cut);
  }
  return best;
}

/// Potts energy straight from the definition; nullopt on a forbidden cell.
inline std::optional<double> energy(const scribprop::EnergyProblem& p, const std::vector<int>& y) {
  double e = 0.0;
  for (int i = 0; i < p.node_count(); ++i) {
    if (p.unary.forbidden(i, y[i])) return std::nullopt;
    e += p.unary.costs(i, y[i]);
  }
  for (const auto& edge : p.edges) {
    if (y[edge.i] != y[edge.j]) e += edge.weight;
  }
  return e;
}

/// Exhaustive minimum over all L^S labelings; nullopt if every labeling is forbidden.
inline std::optional<double> exhaustive_min(const scribprop::EnergyProblem& p) {
  const int s = p.node_count();
  const int l = p.label_count();
  std::vector<int> y(s, 0);
  std::optional<double> best;
  while (true) {
    if (auto e = energy(p, y); e && (!best || *e < *best)) best = e;
    int i = 0;
    while (i < s && ++y[i] == l) y[i++] = 0;
    if (i == s) break;
  }
  return best;
}

/// Random problem with integer costs and weights so sums are exact.
inline scribprop::EnergyProblem random_problem(std::mt19937_64& rng, int nodes, int labels, double edge_prob,
                                               int max_cost = 20, int max_weight = 10) {
  scribprop::EnergyProblem p;
  for (int l = 0; l < labels; ++l) p.universe.labels.push_back(l);
  p.unary.costs.resize(nodes, labels);
  p.unary.forbidden = scribprop::ForbiddenMask::Constant(nodes, labels, false);
  std::uniform_int_distribution<int> cost(0, max_cost);
  std::uniform_int_distribution<int> weight(0, max_weight);
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  for (int i = 0; i < nodes; ++i) {
    for (int l = 0; l < labels; ++l) p.unary.costs(i, l) = cost(rng);
  }
  for (int i = 0; i < nodes; ++i) {
    for (int j = i + 1; j < nodes; ++j) {
      if (coin(rng) < edge_prob) p.edges.push_back({i, j, static_cast<double>(weight(rng))});
    }
  }
  return p;
}

}  // namespace oracle
