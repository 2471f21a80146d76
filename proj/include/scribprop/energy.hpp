#pragma once

#include "scribprop/core.hpp"
#include "scribprop/features.hpp"
#include "scribprop/logprob.hpp"
#include "scribprop/superpixel.hpp"

#include <Eigen/Core>

#include <optional>
#include <string>
#include <vector>

namespace scribprop {

/// Categories an image's superpixels may take, ascending. Labelings index into it.
struct LabelUniverse {
  std::vector<CategoryId> labels;

  int size() const { return static_cast<int>(labels.size()); }
  /// Index of a category, or -1.
  int index_of(CategoryId c) const;

  friend bool operator==(const LabelUniverse&, const LabelUniverse&) = default;
};

LabelUniverse make_universe(const ScribbleSet& scribbles);

using CostMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ForbiddenMask = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// S x L costs. A forbidden cell stands for an infinite cost; its value in
/// `costs` is ignored.
struct UnaryTable {
  CostMatrix costs;
  ForbiddenMask forbidden;

  int rows() const { return static_cast<int>(costs.rows()); }
  int cols() const { return static_cast<int>(costs.cols()); }
  bool allowed(int i, int l) const { return !forbidden(i, l); }
};

struct EnergyProblem {
  LabelUniverse universe;
  UnaryTable unary;
  std::vector<WeightedEdge> edges;

  int node_count() const { return unary.rows(); }
  int label_count() const { return unary.cols(); }
};

/// y[i] indexes the universe.
using Labeling = std::vector<int>;

UnaryTable scribble_unary(const std::vector<std::vector<CategoryId>>& overlaps, const LabelUniverse& universe);

/// cost(i, l) = -sum over pixels of superpixel i of log P(l). With
/// `normalize_by_size` the sum becomes a mean.
UnaryTable predictor_unary(const LogProbMap& logprob, const SuperpixelMap& map, bool normalize_by_size = false);

UnaryTable combine_unaries(const UnaryTable& scribble, const std::optional<UnaryTable>& predictor);

EnergyProblem build_problem(UnaryTable unary, std::vector<WeightedEdge> edges, LabelUniverse universe,
                            bool use_pairwise = true);

/// Unary plus Potts pairwise energy; nullopt when y touches a forbidden cell.
std::optional<double> total_energy(const EnergyProblem& problem, const Labeling& y);

/// Problem as JSON: universe, unary matrix, forbidden mask, edges.
std::string dump_problem_json(const EnergyProblem& problem);

}  // namespace scribprop
