#include "scribprop/energy.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>

namespace scribprop {

int LabelUniverse::index_of(CategoryId c) const {
  auto it = std::lower_bound(labels.begin(), labels.end(), c);
  if (it == labels.end() || *it != c) return -1;
  return static_cast<int>(it - labels.begin());
}

LabelUniverse make_universe(const ScribbleSet& scribbles) { return {scribbles.categories()}; }

UnaryTable scribble_unary(const std::vector<std::vector<CategoryId>>& overlaps, const LabelUniverse& universe) {
  if (universe.labels.empty()) throw Error(ErrorCode::NoScribbles, "empty label universe");
  const int s = static_cast<int>(overlaps.size());
  const int l = universe.size();
  UnaryTable table;
  table.costs = CostMatrix::Zero(s, l);
  table.forbidden = ForbiddenMask::Constant(s, l, false);
  const double unmarked = std::log(static_cast<double>(l));  // -log(1/|{c_k}|)
  for (int i = 0; i < s; ++i) {
    if (overlaps[i].empty()) {
      table.costs.row(i).setConstant(unmarked);
      continue;
    }
    table.forbidden.row(i).setConstant(true);
    for (CategoryId c : overlaps[i]) {
      const int idx = universe.index_of(c);
      if (idx < 0) {
        throw Error(ErrorCode::OverlapOutsideUniverse, "category " + std::to_string(c) + " not in universe");
      }
      table.forbidden(i, idx) = false;
    }
  }
  return table;
}

UnaryTable predictor_unary(const LogProbMap& logprob, const SuperpixelMap& map, bool normalize_by_size) {
  if (logprob.width != map.width || logprob.height != map.height ||
      logprob.values.rows() != static_cast<Eigen::Index>(map.ids.size())) {
    throw Error(ErrorCode::DimensionMismatch, "log-probability map and superpixel map differ in size");
  }
  if (!logprob.values.allFinite()) throw Error(ErrorCode::NonFiniteLogProb, "log-probabilities must be finite");
  UnaryTable table;
  table.costs = CostMatrix::Zero(map.count, logprob.num_labels());
  table.forbidden = ForbiddenMask::Constant(map.count, logprob.num_labels(), false);
  for (std::size_t p = 0; p < map.ids.size(); ++p) {
    table.costs.row(map.ids[p]) -= logprob.values.row(static_cast<Eigen::Index>(p));
  }
  if (normalize_by_size) {
    const auto sizes = map.sizes();
    for (int i = 0; i < map.count; ++i) table.costs.row(i) /= sizes[i];
  }
  return table;
}

UnaryTable combine_unaries(const UnaryTable& scribble, const std::optional<UnaryTable>& predictor) {
  if (!predictor) return scribble;
  if (predictor->rows() != scribble.rows() || predictor->cols() != scribble.cols()) {
    throw Error(ErrorCode::ShapeMismatch, "unary tables differ in shape");
  }
  UnaryTable out;
  out.costs = scribble.costs + predictor->costs;
  out.forbidden = scribble.forbidden;
  return out;
}

EnergyProblem build_problem(UnaryTable unary, std::vector<WeightedEdge> edges, LabelUniverse universe,
                            bool use_pairwise) {
  const int s = unary.rows();
  if (unary.cols() != universe.size() || unary.forbidden.rows() != s || unary.forbidden.cols() != unary.cols()) {
    throw Error(ErrorCode::InconsistentSizes, "unary table does not match universe");
  }
  for (const auto& e : edges) {
    if (e.i < 0 || e.j < 0 || e.i >= s || e.j >= s || e.i == e.j) {
      throw Error(ErrorCode::InconsistentSizes, "edge endpoint out of range");
    }
    if (!std::isfinite(e.weight) || e.weight < 0.0) {
      throw Error(ErrorCode::InconsistentSizes, "edge weight must be finite and >= 0");
    }
  }
  if (!use_pairwise) edges.clear();
  return {std::move(universe), std::move(unary), std::move(edges)};
}

std::optional<double> total_energy(const EnergyProblem& problem, const Labeling& y) {
  if (static_cast<int>(y.size()) != problem.node_count()) {
    throw Error(ErrorCode::LengthMismatch, "labeling length differs from node count");
  }
  double energy = 0.0;
  for (int i = 0; i < problem.node_count(); ++i) {
    if (y[i] < 0 || y[i] >= problem.label_count()) {
      throw Error(ErrorCode::LabelOutOfRange, "label index out of range");
    }
    if (problem.unary.forbidden(i, y[i])) return std::nullopt;
    energy += problem.unary.costs(i, y[i]);
  }
  for (const auto& e : problem.edges) {
    if (y[e.i] != y[e.j]) energy += e.weight;
  }
  return energy;
}

std::string dump_problem_json(const EnergyProblem& problem) {
  nlohmann::ordered_json doc;
  doc["universe"] = problem.universe.labels;
  auto unary = nlohmann::ordered_json::array();
  auto mask = nlohmann::ordered_json::array();
  for (int i = 0; i < problem.node_count(); ++i) {
    auto row = nlohmann::ordered_json::array();
    auto mrow = nlohmann::ordered_json::array();
    for (int l = 0; l < problem.label_count(); ++l) {
      row.push_back(problem.unary.costs(i, l));
      mrow.push_back(static_cast<bool>(problem.unary.forbidden(i, l)));
    }
    unary.push_back(std::move(row));
    mask.push_back(std::move(mrow));
  }
  doc["unary"] = std::move(unary);
  doc["forbidden"] = std::move(mask);
  auto edges = nlohmann::ordered_json::array();
  for (const auto& e : problem.edges) edges.push_back({e.i, e.j, e.weight});
  doc["edges"] = std::move(edges);
  return doc.dump();
}

}  // namespace scribprop
