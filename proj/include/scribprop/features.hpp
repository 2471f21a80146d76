#pragma once

#include "scribprop/core.hpp"
#include "scribprop/superpixel.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <vector>

namespace scribprop {

inline constexpr int kColorBinsPerChannel = 25;
inline constexpr int kColorBins = 3 * kColorBinsPerChannel;
inline constexpr int kTextureBinsPerOrientation = 10;
inline constexpr int kTextureBins = 2 * kTextureBinsPerOrientation;
inline constexpr int kFeatureDim = kColorBins + kTextureBins;

template <typename Scalar>
using ColorHistogramT = Eigen::Matrix<Scalar, kColorBins, 1>;
template <typename Scalar>
using TextureHistogramT = Eigen::Matrix<Scalar, kTextureBins, 1>;

using ColorHistogram = ColorHistogramT<double>;
using TextureHistogram = TextureHistogramT<double>;

/// Per-superpixel features: one row per superpixel, color bins then texture bins.
using FeatureMatrix = Eigen::Matrix<double, Eigen::Dynamic, kFeatureDim, Eigen::RowMajor>;

enum class HistNormalization {
  L1,            // each histogram sums to 1
  L2,            // each histogram has unit Euclidean norm
  PerChannelL1,  // each channel/orientation block sums to 1
};

struct PairwiseParams {
  double delta_c = 5.0;
  double delta_t = 10.0;
  double lambda = 1.0;
  HistNormalization normalization = HistNormalization::L1;
};

void validate(const PairwiseParams& params);

inline int color_bin(std::uint8_t v) { return v * kColorBinsPerChannel / 256; }

/// Bin of a signed gradient in [-255, 255] split into 10 bins of width 51;
/// the top bin is closed on the right.
inline int gradient_bin(int g) {
  g = std::clamp(g, -255, 255);
  return std::min((g + 255) / 51, kTextureBinsPerOrientation - 1);
}

/// Integer luma used for texture gradients.
std::vector<int> luma(const RgbImage& image);

ColorHistogram color_hist(const RgbImage& image, const PixelSet& pixels,
                          HistNormalization norm = HistNormalization::L1);
TextureHistogram texture_hist(const RgbImage& image, const PixelSet& pixels,
                              HistNormalization norm = HistNormalization::L1);

/// Color and texture histograms for every superpixel in one pass.
FeatureMatrix superpixel_features(const RgbImage& image, const SuperpixelMap& map,
                                  HistNormalization norm = HistNormalization::L1);

/// lambda * exp(-|dc|^2 / delta_c^2 - |dt|^2 / delta_t^2). The [y_i != y_j]
/// factor belongs to the energy, not here.
template <typename DerivedC1, typename DerivedC2, typename DerivedT1, typename DerivedT2>
double pairwise_weight(const Eigen::MatrixBase<DerivedC1>& hc_i, const Eigen::MatrixBase<DerivedC2>& hc_j,
                       const Eigen::MatrixBase<DerivedT1>& ht_i, const Eigen::MatrixBase<DerivedT2>& ht_j,
                       const PairwiseParams& params) {
  const double dc = (hc_i - hc_j).squaredNorm();
  const double dt = (ht_i - ht_j).squaredNorm();
  return params.lambda *
         std::exp(-dc / (params.delta_c * params.delta_c) - dt / (params.delta_t * params.delta_t));
}

struct WeightedEdge {
  int i = 0;
  int j = 0;
  double weight = 0.0;

  friend bool operator==(const WeightedEdge&, const WeightedEdge&) = default;
};

/// Pairwise weights for every adjacency edge, in the order given.
std::vector<WeightedEdge> weighted_edges(const FeatureMatrix& features, const std::vector<AdjacencyEdge>& edges,
                                         const PairwiseParams& params);

}  // namespace scribprop
