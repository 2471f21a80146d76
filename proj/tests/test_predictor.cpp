#include "scribprop/logprob.hpp"
#include "scribprop/predictor.hpp"

#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

using namespace scribprop;

namespace {

SuperpixelMap one_superpixel(int w, int h) {
  SuperpixelMap m;
  m.width = w;
  m.height = h;
  m.ids.assign(static_cast<std::size_t>(w) * h, 0);
  m.count = 1;
  return m;
}

std::vector<TrainingExample> random_examples(std::mt19937_64& rng, int count, int labels) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<TrainingExample> out(count);
  for (auto& ex : out) {
    for (int d = 0; d < kFeatureDim; ++d) ex.features(d) = u(rng);
    ex.label = static_cast<int>(rng() % labels);
    ex.weight = 1.0 + static_cast<double>(rng() % 5);
  }
  return out;
}

// Loss recomputed from the definition.
double reference_loss(const WeightMatrix& w, const std::vector<TrainingExample>& ex, double l2) {
  double total = 0.0, weight = 0.0;
  for (const auto& e : ex) {
    std::vector<double> z(w.rows());
    double zmax = -1e300;
    for (int l = 0; l < w.rows(); ++l) {
      z[l] = w(l, kFeatureDim);
      for (int d = 0; d < kFeatureDim; ++d) z[l] += w(l, d) * e.features(d);
      zmax = std::max(zmax, z[l]);
    }
    double s = 0.0;
    for (double v : z) s += std::exp(v - zmax);
    total += e.weight * (zmax + std::log(s) - z[e.label]);
    weight += e.weight;
  }
  return total / weight + 0.5 * l2 * w.leftCols(kFeatureDim).squaredNorm();
}

}  // namespace

TEST_CASE("zero model is uniform") {
  const RefPredictorModel m = RefPredictorModel::zeros(LabelUniverse{{0, 2, 9}});
  CHECK(m.weights.rows() == 3);
  CHECK(m.weights.cols() == kFeatureDim + 1);
  FeatureMatrix f = FeatureMatrix::Random(1, kFeatureDim);
  const LogProbMap lp = predict(m, one_superpixel(3, 2), f);
  CHECK(lp.values.rows() == 6);
  CHECK((lp.values.array() + std::log(3.0)).abs().maxCoeff() < 1e-12);
  CHECK(max_normalization_error(lp) < 1e-12);
}

TEST_CASE("softmax margin and shift invariance") {
  RefPredictorModel m = RefPredictorModel::zeros(LabelUniverse{{0, 1, 2, 3}});
  const double margin = 1.7;
  m.weights(2, kFeatureDim) = margin;
  FeatureMatrix f = FeatureMatrix::Zero(1, kFeatureDim);
  const CostMatrix lp = predict_superpixels(m, f, m.universe);
  CHECK(std::exp(lp(0, 2)) == doctest::Approx(std::exp(margin) / (std::exp(margin) + 3)));

  m.weights.col(kFeatureDim).array() += 40.0;
  CHECK((predict_superpixels(m, f, m.universe) - lp).cwiseAbs().maxCoeff() < 1e-12);

  // Restricting to a sub-universe renormalizes over that subset.
  const CostMatrix sub = predict_superpixels(m, f, LabelUniverse{{0, 2}});
  CHECK(std::exp(sub(0, 1)) == doctest::Approx(std::exp(margin) / (std::exp(margin) + 1)));
}

TEST_CASE("training with zero epochs") {
  std::mt19937_64 rng(1);
  const auto ex = random_examples(rng, 6, 3);
  PredictorConfig cfg;
  cfg.epochs = 0;
  const RefPredictorModel m = train(ex, LabelUniverse{{0, 1, 2}}, cfg);
  CHECK(m.weights.isZero());
  CHECK(loss_and_gradient(m.weights, ex, cfg.l2).loss == doctest::Approx(std::log(3.0)));
  CHECK_THROWS_AS(train({}, LabelUniverse{{0}}, cfg), Error);
  std::vector<TrainingExample> bad(1);
  bad[0].label = 5;
  CHECK_THROWS_AS(train(bad, LabelUniverse{{0, 1}}, cfg), Error);
}

TEST_CASE("analytic gradient matches finite differences") {
  std::mt19937_64 rng(7);
  const double h = 1e-5;
  for (int trial = 0; trial < 10; ++trial) {
    const int labels = 2 + trial % 4;
    const auto ex = random_examples(rng, 5, labels);
    WeightMatrix w = WeightMatrix::Random(labels, kFeatureDim + 1) * 0.3;
    const double l2 = 0.01;
    const LossAndGradient lg = loss_and_gradient(w, ex, l2);
    CHECK(lg.loss == doctest::Approx(reference_loss(w, ex, l2)).epsilon(1e-12));
    double worst = 0.0;
    for (int l = 0; l < labels; ++l) {
      for (int d = 0; d <= kFeatureDim; ++d) {
        WeightMatrix wp = w, wm = w;
        wp(l, d) += h;
        wm(l, d) -= h;
        const double fd = (reference_loss(wp, ex, l2) - reference_loss(wm, ex, l2)) / (2 * h);
        const double rel = std::abs(fd - lg.gradient(l, d)) / std::max(1e-8, std::abs(fd) + std::abs(lg.gradient(l, d)));
        worst = std::max(worst, rel);
      }
    }
    CHECK(worst < 1e-4);
  }
}

TEST_CASE("separable toy set is learned") {
  std::vector<TrainingExample> ex;
  for (int k = 0; k < 20; ++k) {
    TrainingExample e;
    e.features.setZero();
    e.label = k % 2;
    e.features(e.label == 0 ? 3 : 60) = 1.0;
    e.features(80) = 0.05 * (k % 5);
    ex.push_back(e);
  }
  PredictorConfig cfg;
  cfg.learning_rate = 0.1;
  cfg.epochs = 200;
  const RefPredictorModel m = train(ex, LabelUniverse{{0, 1}}, cfg);
  FeatureMatrix f(static_cast<Eigen::Index>(ex.size()), kFeatureDim);
  for (std::size_t k = 0; k < ex.size(); ++k) f.row(static_cast<Eigen::Index>(k)) = ex[k].features.transpose();
  const CostMatrix lp = predict_superpixels(m, f, m.universe);
  int correct = 0;
  for (std::size_t k = 0; k < ex.size(); ++k) {
    const int guess = lp(static_cast<Eigen::Index>(k), 1) > lp(static_cast<Eigen::Index>(k), 0) ? 1 : 0;
    correct += guess == ex[k].label;
  }
  CHECK(correct == static_cast<int>(ex.size()));
}

TEST_CASE("training loss is monotone at a small step") {
  std::mt19937_64 rng(12);
  const auto ex = random_examples(rng, 30, 3);
  WeightMatrix w = WeightMatrix::Zero(3, kFeatureDim + 1);
  double prev = loss_and_gradient(w, ex, 1e-4).loss;
  for (int it = 0; it < 50; ++it) {
    w -= 1e-3 * loss_and_gradient(w, ex, 1e-4).gradient;
    const double cur = loss_and_gradient(w, ex, 1e-4).loss;
    CHECK(cur <= prev + 1e-15);
    prev = cur;
  }
}

TEST_CASE("model serialization round trip") {
  RefPredictorModel m = RefPredictorModel::zeros(LabelUniverse{{0, 4}});
  m.weights.setRandom();
  const RefPredictorModel back = parse_model(serialize_model(m));
  CHECK(back.universe == m.universe);
  CHECK(back.weights == m.weights);
  CHECK_THROWS_AS(parse_model("{}"), Error);
}

TEST_CASE("log-probability files") {
  LogProbMap uniform{2, 2, {}};
  uniform.values = Eigen::MatrixXd::Constant(4, 3, -std::log(3.0));
  const LogProbMap back = decode_logprob(encode_logprob(uniform));
  CHECK(back.width == 2);
  CHECK(back.num_labels() == 3);
  CHECK((back.values.array() + std::log(3.0)).abs().maxCoeff() < 1e-6);

  LogProbMap drift = uniform;
  drift.values.array() += std::log(1.0005);
  const LogProbMap fixed = decode_logprob(encode_logprob(drift));
  CHECK(max_normalization_error(fixed) < 1e-6);

  LogProbMap half = uniform;
  half.values.array() += std::log(0.5);
  CHECK_THROWS_AS(decode_logprob(encode_logprob(half)), Error);

  const std::string bytes = encode_logprob(uniform);
  CHECK_THROWS_AS(decode_logprob(bytes.substr(0, bytes.size() - 1)), Error);
}

TEST_CASE("file predictor selects category columns") {
  LogProbMap lp{2, 1, {}};
  lp.values.resize(2, 4);
  lp.values << std::log(0.1), std::log(0.2), std::log(0.3), std::log(0.4),  //
      std::log(0.25), std::log(0.25), std::log(0.25), std::log(0.25);
  const FilePredictor fp(lp);
  SuperpixelMap m = one_superpixel(2, 1);
  const LogProbMap r = fp.log_probs(m, FeatureMatrix::Zero(1, kFeatureDim), LabelUniverse{{1, 3}});
  CHECK(r.num_labels() == 2);
  CHECK(std::exp(r.values(0, 0)) == doctest::Approx(0.2 / 0.6));
  CHECK(std::exp(r.values(0, 1)) == doctest::Approx(0.4 / 0.6));
  CHECK(std::exp(r.values(1, 0)) == doctest::Approx(0.5));
  CHECK_THROWS_AS(fp.log_probs(m, FeatureMatrix::Zero(1, kFeatureDim), LabelUniverse{{1, 7}}), Error);
}
