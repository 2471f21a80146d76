#include "scribprop/features.hpp"

namespace scribprop {

void validate(const PairwiseParams& params) {
  if (!(params.delta_c > 0.0) || !(params.delta_t > 0.0)) {
    throw Error(ErrorCode::InvalidParameter, "delta_c and delta_t must be > 0");
  }
  if (!(params.lambda >= 0.0) || !std::isfinite(params.lambda)) {
    throw Error(ErrorCode::InvalidParameter, "lambda must be >= 0");
  }
}

std::vector<int> luma(const RgbImage& image) {
  std::vector<int> out(image.pixel_count());
  for (std::size_t p = 0; p < out.size(); ++p) {
    const double v = 0.299 * image.data[3 * p] + 0.587 * image.data[3 * p + 1] + 0.114 * image.data[3 * p + 2];
    out[p] = static_cast<int>(std::lround(v));
  }
  return out;
}

namespace {

// Central differences with replicated borders.
std::pair<int, int> gradients(const std::vector<int>& y, int width, int height, int px, int py) {
  const int xl = std::max(px - 1, 0);
  const int xr = std::min(px + 1, width - 1);
  const int yu = std::max(py - 1, 0);
  const int yd = std::min(py + 1, height - 1);
  const int gh = y[py * width + xr] - y[py * width + xl];
  const int gv = y[yd * width + px] - y[yu * width + px];
  return {gh, gv};
}

template <typename Block>
void normalize_block(Block&& block, HistNormalization norm) {
  const double denom = norm == HistNormalization::L2 ? block.norm() : block.sum();
  if (denom > 0.0) block /= denom;
}

template <typename Row>
void normalize(Row&& hist, int block_size, HistNormalization norm) {
  if (norm == HistNormalization::PerChannelL1) {
    for (int start = 0; start < hist.size(); start += block_size) {
      normalize_block(hist.segment(start, block_size), norm);
    }
  } else {
    normalize_block(hist, norm);
  }
}

void check_pixels(const RgbImage& image, const PixelSet& pixels) {
  if (pixels.empty()) throw Error(ErrorCode::EmptyPixelSet, "histogram of an empty pixel set");
  for (const auto& p : pixels) {
    if (!image.contains(p.x, p.y)) throw Error(ErrorCode::OutOfBoundsCoordinate, "pixel outside image");
  }
}

}  // namespace

ColorHistogram color_hist(const RgbImage& image, const PixelSet& pixels, HistNormalization norm) {
  check_pixels(image, pixels);
  ColorHistogram hist = ColorHistogram::Zero();
  for (const auto& p : pixels) {
    for (int c = 0; c < 3; ++c) hist[c * kColorBinsPerChannel + color_bin(image.at(p.x, p.y, c))] += 1.0;
  }
  normalize(hist, kColorBinsPerChannel, norm);
  return hist;
}

TextureHistogram texture_hist(const RgbImage& image, const PixelSet& pixels, HistNormalization norm) {
  check_pixels(image, pixels);
  const auto y = luma(image);
  TextureHistogram hist = TextureHistogram::Zero();
  for (const auto& p : pixels) {
    const auto [gh, gv] = gradients(y, image.width, image.height, p.x, p.y);
    hist[gradient_bin(gh)] += 1.0;
    hist[kTextureBinsPerOrientation + gradient_bin(gv)] += 1.0;
  }
  normalize(hist, kTextureBinsPerOrientation, norm);
  return hist;
}

FeatureMatrix superpixel_features(const RgbImage& image, const SuperpixelMap& map, HistNormalization norm) {
  if (image.width != map.width || image.height != map.height) {
    throw Error(ErrorCode::DimensionMismatch, "image and superpixel map differ in size");
  }
  const auto y = luma(image);
  FeatureMatrix features = FeatureMatrix::Zero(map.count, kFeatureDim);
  for (int py = 0; py < image.height; ++py) {
    for (int px = 0; px < image.width; ++px) {
      auto row = features.row(map.at(px, py));
      for (int c = 0; c < 3; ++c) row[c * kColorBinsPerChannel + color_bin(image.at(px, py, c))] += 1.0;
      const auto [gh, gv] = gradients(y, image.width, image.height, px, py);
      row[kColorBins + gradient_bin(gh)] += 1.0;
      row[kColorBins + kTextureBinsPerOrientation + gradient_bin(gv)] += 1.0;
    }
  }
  for (int i = 0; i < map.count; ++i) {
    normalize(features.row(i).head<kColorBins>(), kColorBinsPerChannel, norm);
    normalize(features.row(i).tail<kTextureBins>(), kTextureBinsPerOrientation, norm);
  }
  return features;
}

std::vector<WeightedEdge> weighted_edges(const FeatureMatrix& features, const std::vector<AdjacencyEdge>& edges,
                                         const PairwiseParams& params) {
  validate(params);
  std::vector<WeightedEdge> out;
  out.reserve(edges.size());
  for (const auto& e : edges) {
    if (e.i < 0 || e.j < 0 || e.i >= features.rows() || e.j >= features.rows()) {
      throw Error(ErrorCode::InconsistentSizes, "edge endpoint outside feature table");
    }
    const double w = pairwise_weight(features.row(e.i).head<kColorBins>().transpose(),
                                     features.row(e.j).head<kColorBins>().transpose(),
                                     features.row(e.i).tail<kTextureBins>().transpose(),
                                     features.row(e.j).tail<kTextureBins>().transpose(), params);
    out.push_back({e.i, e.j, w});
  }
  return out;
}

}  // namespace scribprop
