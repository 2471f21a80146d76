#pragma once

#include "scribprop/energy.hpp"

#include <optional>
#include <vector>

namespace scribprop {

/// Energy tolerance below which a move or cycle counts as no improvement.
inline constexpr double kExpansionEpsilon = 1e-9;

/// Per-superpixel argmin over allowed labels, ties to the lowest index.
/// Throws NoFeasibleLabeling if some row is entirely forbidden.
Labeling default_labeling(const EnergyProblem& problem);

/// Best labeling reachable from `current` by letting any subset of nodes switch
/// to `alpha`. Nodes whose current label is forbidden are forced to alpha;
/// throws InfeasibleCurrent if alpha is forbidden for such a node.
Labeling expansion_move(const EnergyProblem& problem, const Labeling& current, int alpha);

struct ExpansionTrace {
  /// Energy after every move, starting with the initial labeling.
  std::vector<double> energies;
  int cycles = 0;
};

/// Cycles alpha over the universe in ascending order until a full cycle gains
/// no more than kExpansionEpsilon. Forbidden cells of a supplied `init` are
/// replaced by the default labeling first.
Labeling alpha_expansion(const EnergyProblem& problem, const std::optional<Labeling>& init = std::nullopt,
                         ExpansionTrace* trace = nullptr);

}  // namespace scribprop
