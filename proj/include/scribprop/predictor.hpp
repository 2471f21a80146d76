#pragma once

#include "scribprop/energy.hpp"
#include "scribprop/features.hpp"
#include "scribprop/logprob.hpp"
#include "scribprop/superpixel.hpp"

#include <Eigen/Core>

#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace scribprop {

using WeightMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Multinomial logistic regression over superpixel histograms. Row l of
/// `weights` scores universe label l; its last column is the bias.
struct RefPredictorModel {
  LabelUniverse universe;
  WeightMatrix weights;

  static RefPredictorModel zeros(LabelUniverse universe);
  int num_labels() const { return universe.size(); }
};

struct PredictorConfig {
  double learning_rate = 0.05;
  int epochs = 300;
  double l2 = 1e-4;
};

struct TrainingExample {
  Eigen::Matrix<double, kFeatureDim, 1> features;
  int label = 0;        // index into the model universe
  double weight = 1.0;  // e.g. pixel count
};

/// Weighted mean cross-entropy plus (l2 / 2) * |W|^2 over non-bias weights.
struct LossAndGradient {
  double loss = 0.0;
  WeightMatrix gradient;
};

LossAndGradient loss_and_gradient(const WeightMatrix& weights, std::span<const TrainingExample> examples,
                                  double l2);

/// Full-batch gradient descent from zero weights. Returns the lowest-loss iterate.
RefPredictorModel train(std::span<const TrainingExample> examples, LabelUniverse universe,
                        const PredictorConfig& config = {});

/// Log-softmax of the scores restricted to `universe` (a subset of the model's).
/// One row per superpixel.
CostMatrix predict_superpixels(const RefPredictorModel& model, const FeatureMatrix& features,
                               const LabelUniverse& universe);

/// Every pixel receives its superpixel's log-probability vector.
LogProbMap predict(const RefPredictorModel& model, const SuperpixelMap& map, const FeatureMatrix& features,
                   const LabelUniverse& universe);
LogProbMap predict(const RefPredictorModel& model, const SuperpixelMap& map, const FeatureMatrix& features);

std::string serialize_model(const RefPredictorModel& model);
RefPredictorModel parse_model(const std::string& json_text);
void save_model(const RefPredictorModel& model, const std::filesystem::path& path);
RefPredictorModel load_model(const std::filesystem::path& path);

/// Source of the network term of the unary: per-pixel log-probabilities over
/// an image's label universe.
class Predictor {
 public:
  virtual ~Predictor() = default;
  virtual LogProbMap log_probs(const SuperpixelMap& map, const FeatureMatrix& features,
                               const LabelUniverse& universe) const = 0;
};

class ReferencePredictor final : public Predictor {
 public:
  explicit ReferencePredictor(RefPredictorModel model) : model_(std::move(model)) {}

  LogProbMap log_probs(const SuperpixelMap& map, const FeatureMatrix& features,
                       const LabelUniverse& universe) const override;
  const RefPredictorModel& model() const { return model_; }

 private:
  RefPredictorModel model_;
};

/// Externally computed log-probabilities; column c holds category id c.
class FilePredictor final : public Predictor {
 public:
  explicit FilePredictor(LogProbMap map) : map_(std::move(map)) {}

  LogProbMap log_probs(const SuperpixelMap& map, const FeatureMatrix& features,
                       const LabelUniverse& universe) const override;

 private:
  LogProbMap map_;
};

/// Columns of `map` selected by category id and renormalized per pixel.
LogProbMap restrict_to_universe(const LogProbMap& map, const LabelUniverse& universe);

}  // namespace scribprop
