#include "scribprop/expansion.hpp"

#include "scribprop/maxflow.hpp"

#include <limits>

namespace scribprop {

Labeling default_labeling(const EnergyProblem& problem) {
  Labeling y(problem.node_count(), -1);
  for (int i = 0; i < problem.node_count(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (int l = 0; l < problem.label_count(); ++l) {
      if (problem.unary.forbidden(i, l)) continue;
      const double c = problem.unary.costs(i, l);
      if (y[i] < 0 || c < best) {
        best = c;
        y[i] = l;
      }
    }
    if (y[i] < 0) {
      throw Error(ErrorCode::NoFeasibleLabeling, "superpixel " + std::to_string(i) + " has no allowed label");
    }
  }
  return y;
}

namespace {

enum class MoveRole : unsigned char { Keep, Switch, Free };

// Binary submodular energy over the free nodes of one move, built as an s-t
// network: a node cut to the sink side switches to alpha.
class MoveGraph {
 public:
  explicit MoveGraph(int variables)
      : net_(variables + 2, 0, 1), keep_cost_(variables, 0.0), switch_cost_(variables, 0.0) {}

  void add_unary(int v, double keep, double sw) {
    keep_cost_[v] += keep;
    switch_cost_[v] += sw;
  }

  // Costs for (keep, keep), (keep, switch), (switch, keep), (switch, switch).
  void add_pairwise(int u, int v, double kk, double ks, double sk, double ss) {
    add_unary(u, kk, sk);
    add_unary(v, 0.0, ss - sk);
    const double coupling = ks + sk - kk - ss;  // >= 0 for metric pairwise costs
    if (coupling > 0.0) net_.add_arc(node(u), node(v), coupling);
  }

  std::vector<bool> solve() {
    for (std::size_t v = 0; v < keep_cost_.size(); ++v) {
      const double diff = switch_cost_[v] - keep_cost_[v];
      if (diff > 0.0) {
        net_.add_arc(net_.source(), node(static_cast<int>(v)), diff);
      } else if (diff < 0.0) {
        net_.add_arc(node(static_cast<int>(v)), net_.sink(), -diff);
      }
    }
    const auto cut = max_flow(net_);
    std::vector<bool> switched(keep_cost_.size());
    for (std::size_t v = 0; v < switched.size(); ++v) switched[v] = !cut.source_side[node(static_cast<int>(v))];
    return switched;
  }

 private:
  static int node(int v) { return v + 2; }

  FlowNetwork net_;
  std::vector<double> keep_cost_;
  std::vector<double> switch_cost_;
};

double energy_or_infinity(const EnergyProblem& problem, const Labeling& y) {
  const auto e = total_energy(problem, y);
  return e ? *e : std::numeric_limits<double>::infinity();
}

}  // namespace

Labeling expansion_move(const EnergyProblem& problem, const Labeling& current, int alpha) {
  const int n = problem.node_count();
  if (static_cast<int>(current.size()) != n) throw Error(ErrorCode::LengthMismatch, "labeling length");
  if (alpha < 0 || alpha >= problem.label_count()) throw Error(ErrorCode::LabelOutOfRange, "alpha out of range");

  std::vector<MoveRole> role(n);
  std::vector<int> var(n, -1);
  int variables = 0;
  for (int i = 0; i < n; ++i) {
    if (current[i] < 0 || current[i] >= problem.label_count()) {
      throw Error(ErrorCode::LabelOutOfRange, "current label out of range");
    }
    const bool current_ok = problem.unary.allowed(i, current[i]);
    const bool alpha_ok = problem.unary.allowed(i, alpha);
    if (!current_ok) {
      if (!alpha_ok) throw Error(ErrorCode::InfeasibleCurrent, "superpixel " + std::to_string(i));
      role[i] = MoveRole::Switch;
    } else if (!alpha_ok || current[i] == alpha) {
      role[i] = MoveRole::Keep;
    } else {
      role[i] = MoveRole::Free;
      var[i] = variables++;
    }
  }

  auto fixed_label = [&](int i) { return role[i] == MoveRole::Switch ? alpha : current[i]; };

  MoveGraph graph(variables);
  for (int i = 0; i < n; ++i) {
    if (role[i] == MoveRole::Free) {
      graph.add_unary(var[i], problem.unary.costs(i, current[i]), problem.unary.costs(i, alpha));
    }
  }
  for (const auto& e : problem.edges) {
    const bool free_i = role[e.i] == MoveRole::Free;
    const bool free_j = role[e.j] == MoveRole::Free;
    const double w = e.weight;
    if (free_i && free_j) {
      const double kk = current[e.i] != current[e.j] ? w : 0.0;
      graph.add_pairwise(var[e.i], var[e.j], kk, w, w, 0.0);
    } else if (free_i) {
      const int other = fixed_label(e.j);
      graph.add_unary(var[e.i], current[e.i] != other ? w : 0.0, alpha != other ? w : 0.0);
    } else if (free_j) {
      const int other = fixed_label(e.i);
      graph.add_unary(var[e.j], current[e.j] != other ? w : 0.0, alpha != other ? w : 0.0);
    }
  }

  const auto switched = graph.solve();
  Labeling next(n);
  for (int i = 0; i < n; ++i) {
    next[i] = role[i] == MoveRole::Free ? (switched[var[i]] ? alpha : current[i]) : fixed_label(i);
  }
  // The cut is optimal up to rounding; never hand back a worse labeling.
  if (energy_or_infinity(problem, next) > energy_or_infinity(problem, current)) return current;
  return next;
}

Labeling alpha_expansion(const EnergyProblem& problem, const std::optional<Labeling>& init, ExpansionTrace* trace) {
  Labeling y = default_labeling(problem);
  if (init) {
    if (static_cast<int>(init->size()) != problem.node_count()) {
      throw Error(ErrorCode::LengthMismatch, "initial labeling length");
    }
    for (int i = 0; i < problem.node_count(); ++i) {
      const int l = (*init)[i];
      if (l >= 0 && l < problem.label_count() && problem.unary.allowed(i, l)) y[i] = l;
    }
  }
  double energy = energy_or_infinity(problem, y);
  if (trace) {
    trace->energies.assign(1, energy);
    trace->cycles = 0;
  }
  if (problem.label_count() < 2) return y;

  bool improved = true;
  while (improved) {
    improved = false;
    for (int alpha = 0; alpha < problem.label_count(); ++alpha) {
      Labeling candidate = expansion_move(problem, y, alpha);
      const double e = energy_or_infinity(problem, candidate);
      if (e < energy - kExpansionEpsilon) {
        y = std::move(candidate);
        energy = e;
        improved = true;
      }
      if (trace) trace->energies.push_back(energy);
    }
    if (trace) ++trace->cycles;
  }
  return y;
}

}  // namespace scribprop
