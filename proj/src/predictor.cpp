#include "scribprop/predictor.hpp"

#include <json.hpp>

#include <bit>
#include <cmath>
#include <cstring>

namespace scribprop {

namespace {

constexpr int kParamDim = kFeatureDim + 1;

double logsumexp(const Eigen::Ref<const Eigen::RowVectorXd>& v) {
  const double m = v.maxCoeff();
  return m + std::log((v.array() - m).exp().sum());
}

}  // namespace

// ---------------------------------------------------------------------------
// Log-probability files

double max_normalization_error(const LogProbMap& map) {
  if (map.values.rows() == 0) return 0.0;
  return (map.values.array().exp().rowwise().sum() - 1.0).abs().maxCoeff();
}

namespace {

constexpr char kLogProbMagic[4] = {'S', 'L', 'P', 'B'};
constexpr double kMaxRenormDrift = 1e-3;

std::uint32_t read_u32le(const std::string& bytes, std::size_t off) {
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data() + off);
  return static_cast<std::uint32_t>(p[0]) | static_cast<std::uint32_t>(p[1]) << 8 |
         static_cast<std::uint32_t>(p[2]) << 16 | static_cast<std::uint32_t>(p[3]) << 24;
}

void append_u32le(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

}  // namespace

LogProbMap decode_logprob(const std::string& bytes) {
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kLogProbMagic, 4) != 0) {
    throw Error(ErrorCode::SchemaViolation, "missing SLPB header");
  }
  const std::uint32_t w = read_u32le(bytes, 4);
  const std::uint32_t h = read_u32le(bytes, 8);
  const std::uint32_t l = read_u32le(bytes, 12);
  if (w == 0 || h == 0 || l == 0 || w > 65536 || h > 65536 || l > 256) {
    throw Error(ErrorCode::SchemaViolation, "bad SLPB dimensions");
  }
  const std::size_t count = static_cast<std::size_t>(w) * h * l;
  if (bytes.size() != 16 + 4 * count) throw Error(ErrorCode::SchemaViolation, "SLPB payload size mismatch");

  LogProbMap map;
  map.width = static_cast<int>(w);
  map.height = static_cast<int>(h);
  map.values.resize(static_cast<Eigen::Index>(w) * h, l);
  for (std::size_t i = 0; i < count; ++i) {
    const std::uint32_t raw = read_u32le(bytes, 16 + 4 * i);
    const float v = std::bit_cast<float>(raw);
    if (!std::isfinite(v)) throw Error(ErrorCode::NonFiniteLogProb, "non-finite value in SLPB file");
    map.values.data()[i] = v;
  }
  for (Eigen::Index p = 0; p < map.values.rows(); ++p) {
    const double drift = std::abs(map.values.row(p).array().exp().sum() - 1.0);
    if (drift > kMaxRenormDrift) {
      throw Error(ErrorCode::NotNormalized, "pixel " + std::to_string(p) + " drifts by " + std::to_string(drift));
    }
    map.values.row(p).array() -= logsumexp(map.values.row(p));
  }
  return map;
}

LogProbMap load_logprob_file(const std::filesystem::path& path) { return decode_logprob(read_file(path)); }

std::string encode_logprob(const LogProbMap& map) {
  std::string out(kLogProbMagic, 4);
  append_u32le(out, static_cast<std::uint32_t>(map.width));
  append_u32le(out, static_cast<std::uint32_t>(map.height));
  append_u32le(out, static_cast<std::uint32_t>(map.num_labels()));
  for (Eigen::Index i = 0; i < map.values.size(); ++i) {
    append_u32le(out, std::bit_cast<std::uint32_t>(static_cast<float>(map.values.data()[i])));
  }
  return out;
}

void save_logprob_file(const LogProbMap& map, const std::filesystem::path& path) {
  write_file(path, encode_logprob(map));
}

LogProbMap restrict_to_universe(const LogProbMap& map, const LabelUniverse& universe) {
  LogProbMap out;
  out.width = map.width;
  out.height = map.height;
  out.values.resize(map.values.rows(), universe.size());
  for (int l = 0; l < universe.size(); ++l) {
    const int c = universe.labels[l];
    if (c < 0 || c >= map.num_labels()) {
      throw Error(ErrorCode::UniverseMismatch, "category " + std::to_string(c) + " missing from log-probabilities");
    }
    out.values.col(l) = map.values.col(c);
  }
  for (Eigen::Index p = 0; p < out.values.rows(); ++p) out.values.row(p).array() -= logsumexp(out.values.row(p));
  return out;
}

// ---------------------------------------------------------------------------
// Reference model

RefPredictorModel RefPredictorModel::zeros(LabelUniverse universe) {
  RefPredictorModel model;
  model.weights = WeightMatrix::Zero(universe.size(), kParamDim);
  model.universe = std::move(universe);
  return model;
}

LossAndGradient loss_and_gradient(const WeightMatrix& weights, std::span<const TrainingExample> examples,
                                  double l2) {
  const Eigen::Index labels = weights.rows();
  LossAndGradient out;
  out.gradient = WeightMatrix::Zero(labels, kParamDim);
  double total_weight = 0.0;
  Eigen::VectorXd x(kParamDim);
  for (const auto& ex : examples) {
    x.head<kFeatureDim>() = ex.features;
    x[kFeatureDim] = 1.0;
    const Eigen::VectorXd scores = weights * x;
    const double lse = logsumexp(scores.transpose());
    Eigen::VectorXd prob = (scores.array() - lse).exp();
    out.loss += ex.weight * (lse - scores[ex.label]);
    prob[ex.label] -= 1.0;
    out.gradient.noalias() += ex.weight * prob * x.transpose();
    total_weight += ex.weight;
  }
  out.loss /= total_weight;
  out.gradient /= total_weight;
  const auto w = weights.leftCols<kFeatureDim>();
  out.loss += 0.5 * l2 * w.squaredNorm();
  out.gradient.leftCols<kFeatureDim>() += l2 * w;
  return out;
}

RefPredictorModel train(std::span<const TrainingExample> examples, LabelUniverse universe,
                        const PredictorConfig& config) {
  if (examples.empty()) throw Error(ErrorCode::EmptyTrainingSet, "no training examples");
  if (universe.labels.empty()) throw Error(ErrorCode::EmptyTrainingSet, "empty label universe");
  double total_weight = 0.0;
  for (const auto& ex : examples) {
    if (ex.label < 0 || ex.label >= universe.size()) {
      throw Error(ErrorCode::LabelOutOfRange, "example label " + std::to_string(ex.label));
    }
    if (!(ex.weight >= 0.0)) throw Error(ErrorCode::InvalidParameter, "negative example weight");
    total_weight += ex.weight;
  }
  if (!(total_weight > 0.0)) throw Error(ErrorCode::EmptyTrainingSet, "examples carry no weight");
  if (!(config.learning_rate > 0.0) || config.epochs < 0 || !(config.l2 >= 0.0)) {
    throw Error(ErrorCode::InvalidParameter, "predictor config");
  }

  RefPredictorModel model = RefPredictorModel::zeros(std::move(universe));
  WeightMatrix best = model.weights;
  double best_loss = std::numeric_limits<double>::infinity();
  for (int epoch = 0; epoch <= config.epochs; ++epoch) {
    auto step = loss_and_gradient(model.weights, examples, config.l2);
    if (step.loss < best_loss) {
      best_loss = step.loss;
      best = model.weights;
    }
    if (epoch == config.epochs) break;
    model.weights -= config.learning_rate * step.gradient;
  }
  model.weights = std::move(best);
  return model;
}

CostMatrix predict_superpixels(const RefPredictorModel& model, const FeatureMatrix& features,
                               const LabelUniverse& universe) {
  std::vector<int> rows;
  for (CategoryId c : universe.labels) {
    const int idx = model.universe.index_of(c);
    if (idx < 0) throw Error(ErrorCode::UniverseMismatch, "model has no label " + std::to_string(c));
    rows.push_back(idx);
  }
  CostMatrix out(features.rows(), static_cast<Eigen::Index>(rows.size()));
  Eigen::VectorXd x(kParamDim);
  for (Eigen::Index i = 0; i < features.rows(); ++i) {
    x.head<kFeatureDim>() = features.row(i).transpose();
    x[kFeatureDim] = 1.0;
    for (std::size_t l = 0; l < rows.size(); ++l) out(i, static_cast<Eigen::Index>(l)) = model.weights.row(rows[l]).dot(x);
    out.row(i).array() -= logsumexp(out.row(i));
  }
  return out;
}

LogProbMap predict(const RefPredictorModel& model, const SuperpixelMap& map, const FeatureMatrix& features,
                   const LabelUniverse& universe) {
  if (features.rows() != map.count) throw Error(ErrorCode::DimensionMismatch, "feature rows differ from superpixel count");
  const CostMatrix per_superpixel = predict_superpixels(model, features, universe);
  LogProbMap out;
  out.width = map.width;
  out.height = map.height;
  out.values.resize(static_cast<Eigen::Index>(map.ids.size()), universe.size());
  for (std::size_t p = 0; p < map.ids.size(); ++p) {
    out.values.row(static_cast<Eigen::Index>(p)) = per_superpixel.row(map.ids[p]);
  }
  return out;
}

LogProbMap predict(const RefPredictorModel& model, const SuperpixelMap& map, const FeatureMatrix& features) {
  return predict(model, map, features, model.universe);
}

std::string serialize_model(const RefPredictorModel& model) {
  nlohmann::ordered_json doc;
  doc["universe"] = model.universe.labels;
  auto rows = nlohmann::ordered_json::array();
  for (Eigen::Index l = 0; l < model.weights.rows(); ++l) {
    std::vector<double> row(model.weights.row(l).begin(), model.weights.row(l).end());
    rows.push_back(row);
  }
  doc["weights"] = std::move(rows);
  return doc.dump();
}

RefPredictorModel parse_model(const std::string& json_text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::SchemaViolation, e.what());
  }
  try {
    RefPredictorModel model;
    model.universe.labels = doc.at("universe").get<std::vector<CategoryId>>();
    const auto rows = doc.at("weights").get<std::vector<std::vector<double>>>();
    if (model.universe.labels.empty() || rows.size() != model.universe.labels.size() ||
        !std::is_sorted(model.universe.labels.begin(), model.universe.labels.end())) {
      throw Error(ErrorCode::SchemaViolation, "model universe and weights disagree");
    }
    model.weights.resize(static_cast<Eigen::Index>(rows.size()), kParamDim);
    for (std::size_t l = 0; l < rows.size(); ++l) {
      if (rows[l].size() != static_cast<std::size_t>(kParamDim)) {
        throw Error(ErrorCode::SchemaViolation, "weight row must have " + std::to_string(kParamDim) + " entries");
      }
      for (int f = 0; f < kParamDim; ++f) model.weights(static_cast<Eigen::Index>(l), f) = rows[l][f];
    }
    if (!model.weights.allFinite()) throw Error(ErrorCode::SchemaViolation, "non-finite weight");
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::SchemaViolation, e.what());
  }
}

void save_model(const RefPredictorModel& model, const std::filesystem::path& path) {
  write_file(path, serialize_model(model));
}

RefPredictorModel load_model(const std::filesystem::path& path) { return parse_model(read_file(path)); }

LogProbMap ReferencePredictor::log_probs(const SuperpixelMap& map, const FeatureMatrix& features,
                                         const LabelUniverse& universe) const {
  return predict(model_, map, features, universe);
}

LogProbMap FilePredictor::log_probs(const SuperpixelMap& map, const FeatureMatrix&,
                                    const LabelUniverse& universe) const {
  if (map_.width != map.width || map_.height != map.height) {
    throw Error(ErrorCode::DimensionMismatch, "log-probability file size differs from image");
  }
  return restrict_to_universe(map_, universe);
}

}  // namespace scribprop
