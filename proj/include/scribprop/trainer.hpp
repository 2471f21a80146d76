#pragma once

#include "scribprop/core.hpp"
#include "scribprop/energy.hpp"
#include "scribprop/expansion.hpp"
#include "scribprop/features.hpp"
#include "scribprop/predictor.hpp"
#include "scribprop/superpixel.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace scribprop {

struct TrainConfig {
  int outer_iterations = 3;
  bool use_pairwise = true;
  SuperpixelParams superpixel;
  PairwiseParams pairwise;
  PredictorConfig predictor;
  /// Average instead of sum the pixel log-probabilities of a superpixel.
  bool normalize_predictor_unary = false;
  std::uint64_t seed = 0;
  /// Worker threads for per-image propagation; results do not depend on it.
  int threads = 1;
};

void validate(const TrainConfig& config);

/// Everything about an image that does not depend on the predictor.
struct PreparedImage {
  RgbImage image;
  SuperpixelMap superpixels;
  FeatureMatrix features;
  std::vector<WeightedEdge> edges;
};

PreparedImage prepare_image(RgbImage image, const TrainConfig& config);

struct Propagation {
  LabelMap labels;
  Labeling labeling;
  LabelUniverse universe;
  double energy = 0.0;
  ExpansionTrace trace;
};

/// Graph-cut label propagation on one image. `predictor` may be null, in which
/// case only the scribble unary and pairwise terms are used.
Propagation propagate_prepared(const PreparedImage& prepared, const ScribbleSet& scribbles,
                               const Predictor* predictor, const TrainConfig& config);
/// Same, on precomputed superpixels, features and weighted adjacency.
Propagation propagate_graph(const SuperpixelMap& map, const FeatureMatrix& features,
                            const std::vector<WeightedEdge>& edges, const ScribbleSet& scribbles,
                            const Predictor* predictor, const TrainConfig& config);
Propagation propagate_image(const RgbImage& image, const ScribbleSet& scribbles, const Predictor* predictor,
                            const TrainConfig& config);

/// Pixel labels from a superpixel labeling.
LabelMap expand_labeling(const SuperpixelMap& map, const Labeling& y, const LabelUniverse& universe);

struct TrainingImage {
  std::string name;
  RgbImage image;
  std::optional<ScribbleSet> scribbles;
  std::optional<LabelMap> mask;
};

struct ImageStats {
  std::string name;
  std::optional<double> energy;  // absent for mask images
  std::size_t changed_pixels = 0;
};

struct IterationRecord {
  int iteration = 0;
  std::vector<LabelMap> labels;  // training labels, one per image
  RefPredictorModel model;       // trained on `labels`
  std::vector<ImageStats> stats;
};

struct TrainResult {
  RefPredictorModel model;
  std::vector<LabelMap> labels;
  std::vector<IterationRecord> history;
};

using IterationCallback = std::function<void(const IterationRecord&)>;

/// Alternating optimisation. Iteration 0 propagates without a predictor; every
/// iteration trains a fresh model on the current labels, and every later
/// iteration re-propagates with the previous model. Mask images bypass
/// propagation and train on their masks directly.
TrainResult alternate_train(const std::vector<TrainingImage>& images, const TrainConfig& config,
                            const IterationCallback& on_iteration = {});

std::vector<TrainingImage> load_training_images(const DatasetIndex& index);

/// Runs alternate_train and writes iterN/labels/<image>.png, iterN/model.json
/// and iterN/stats.json under `out_dir`.
TrainResult alternate_train(const DatasetIndex& dataset, const TrainConfig& config,
                            const std::filesystem::path& out_dir);

/// Per-pixel argmax of the predictor alone, ties to the lowest label index.
LabelMap infer(const RefPredictorModel& model, const RgbImage& image, const TrainConfig& config);

}  // namespace scribprop
