#include "scribprop/superpixel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace scribprop {

std::vector<int> SuperpixelMap::sizes() const {
  std::vector<int> out(count, 0);
  for (int id : ids) ++out[id];
  return out;
}

void validate(const SuperpixelParams& params) {
  if (!(params.k > 0.0) || !std::isfinite(params.k)) {
    throw Error(ErrorCode::InvalidParameter, "k must be > 0");
  }
  if (!(params.sigma >= 0.0) || !std::isfinite(params.sigma)) {
    throw Error(ErrorCode::InvalidParameter, "sigma must be >= 0");
  }
  if (params.min_size < 1) throw Error(ErrorCode::InvalidParameter, "min_size must be >= 1");
}

namespace {

class DisjointSets {
 public:
  explicit DisjointSets(int n) : parent_(n), rank_(n, 0), size_(n, 1) {
    std::iota(parent_.begin(), parent_.end(), 0);
  }

  int find(int x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }

  int join(int a, int b) {
    if (rank_[a] < rank_[b]) std::swap(a, b);
    parent_[b] = a;
    size_[a] += size_[b];
    if (rank_[a] == rank_[b]) ++rank_[a];
    return a;
  }

  int size(int root) const { return size_[root]; }

 private:
  std::vector<int> parent_;
  std::vector<int> rank_;
  std::vector<int> size_;
};

struct GridEdge {
  double w;
  int a;  // smaller pixel index
  int b;
};

// Separable Gaussian with clamped borders, per channel.
std::vector<double> smooth(const RgbImage& image, double sigma) {
  const int w = image.width;
  const int h = image.height;
  std::vector<double> src(image.data.begin(), image.data.end());
  if (sigma <= 0.0) return src;

  const int len = static_cast<int>(std::ceil(sigma * 4.0)) + 1;
  std::vector<double> mask(len);
  for (int i = 0; i < len; ++i) mask[i] = std::exp(-0.5 * (i / sigma) * (i / sigma));
  double sum = mask[0];
  for (int i = 1; i < len; ++i) sum += 2.0 * mask[i];
  for (auto& m : mask) m /= sum;

  std::vector<double> tmp(src.size());
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < 3; ++c) {
        double acc = mask[0] * src[(y * w + x) * 3 + c];
        for (int i = 1; i < len; ++i) {
          const int xl = std::max(x - i, 0);
          const int xr = std::min(x + i, w - 1);
          acc += mask[i] * (src[(y * w + xl) * 3 + c] + src[(y * w + xr) * 3 + c]);
        }
        tmp[(y * w + x) * 3 + c] = acc;
      }
    }
  }
  std::vector<double> out(src.size());
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < 3; ++c) {
        double acc = mask[0] * tmp[(y * w + x) * 3 + c];
        for (int i = 1; i < len; ++i) {
          const int yu = std::max(y - i, 0);
          const int yd = std::min(y + i, h - 1);
          acc += mask[i] * (tmp[(yu * w + x) * 3 + c] + tmp[(yd * w + x) * 3 + c]);
        }
        out[(y * w + x) * 3 + c] = acc;
      }
    }
  }
  return out;
}

}  // namespace

SuperpixelMap segment_fh(const RgbImage& image, const SuperpixelParams& params) {
  validate(params);
  const int w = image.width;
  const int h = image.height;
  const int n = w * h;
  const auto px = smooth(image, params.sigma);
  auto diff = [&](int p, int q) {
    const double dr = px[3 * p] - px[3 * q];
    const double dg = px[3 * p + 1] - px[3 * q + 1];
    const double db = px[3 * p + 2] - px[3 * q + 2];
    return std::sqrt(dr * dr + dg * dg + db * db);
  };

  std::vector<GridEdge> edges;
  edges.reserve(static_cast<std::size_t>(n) * 4);
  auto add = [&](int p, int q) { edges.push_back({diff(p, q), std::min(p, q), std::max(p, q)}); };
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int p = y * w + x;
      if (x + 1 < w) add(p, p + 1);
      if (y + 1 < h) add(p, p + w);
      if (x + 1 < w && y + 1 < h) add(p, p + w + 1);
      if (x + 1 < w && y > 0) add(p, p - w + 1);
    }
  }
  std::sort(edges.begin(), edges.end(), [](const GridEdge& l, const GridEdge& r) {
    if (l.w != r.w) return l.w < r.w;
    if (l.a != r.a) return l.a < r.a;
    return l.b < r.b;
  });

  DisjointSets sets(n);
  std::vector<double> threshold(n, params.k);
  for (const auto& e : edges) {
    int a = sets.find(e.a);
    int b = sets.find(e.b);
    if (a == b) continue;
    if (e.w <= threshold[a] && e.w <= threshold[b]) {
      const int root = sets.join(a, b);
      threshold[root] = e.w + params.k / sets.size(root);
    }
  }
  // Edges are still ascending, so each small component joins its cheapest neighbour.
  for (const auto& e : edges) {
    int a = sets.find(e.a);
    int b = sets.find(e.b);
    if (a != b && (sets.size(a) < params.min_size || sets.size(b) < params.min_size)) {
      sets.join(a, b);
    }
  }

  SuperpixelMap map;
  map.width = w;
  map.height = h;
  map.ids.assign(n, -1);
  std::vector<int> root_id(n, -1);
  for (int p = 0; p < n; ++p) {
    const int r = sets.find(p);
    if (root_id[r] < 0) root_id[r] = map.count++;
    map.ids[p] = root_id[r];
  }
  return map;
}

std::vector<AdjacencyEdge> adjacency(const SuperpixelMap& map) {
  std::vector<AdjacencyEdge> out;
  auto add = [&](int a, int b) {
    if (a != b) out.push_back({std::min(a, b), std::max(a, b)});
  };
  for (int y = 0; y < map.height; ++y) {
    for (int x = 0; x < map.width; ++x) {
      if (x + 1 < map.width) add(map.at(x, y), map.at(x + 1, y));
      if (y + 1 < map.height) add(map.at(x, y), map.at(x, y + 1));
    }
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::vector<std::vector<CategoryId>> scribble_overlap(const SuperpixelMap& map, const ScribbleSet& scribbles) {
  if (map.width != scribbles.width || map.height != scribbles.height) {
    throw Error(ErrorCode::DimensionMismatch, "scribble set dimensions differ from superpixel map");
  }
  std::vector<std::vector<CategoryId>> out(map.count);
  for (const auto& s : scribbles.scribbles) {
    for (const auto& p : rasterize(s, map.width, map.height)) {
      out[map.at(p.x, p.y)].push_back(s.category);
    }
  }
  for (auto& cats : out) {
    std::sort(cats.begin(), cats.end());
    cats.erase(std::unique(cats.begin(), cats.end()), cats.end());
  }
  return out;
}

bool is_partition(const SuperpixelMap& map) {
  if (map.count < 1 || map.ids.size() != static_cast<std::size_t>(map.width) * map.height) return false;
  std::vector<int> hist(map.count, 0);
  for (int id : map.ids) {
    if (id < 0 || id >= map.count) return false;
    ++hist[id];
  }
  return std::none_of(hist.begin(), hist.end(), [](int c) { return c == 0; });
}

std::string encode_superpixel_ids(const SuperpixelMap& map) {
  std::vector<std::uint16_t> values(map.ids.begin(), map.ids.end());
  return encode_gray16_png(map.width, map.height, values);
}

RgbImage boundary_overlay(const RgbImage& image, const SuperpixelMap& map) {
  RgbImage out = image;
  for (int y = 0; y < map.height; ++y) {
    for (int x = 0; x < map.width; ++x) {
      const int id = map.at(x, y);
      const bool edge = (x + 1 < map.width && map.at(x + 1, y) != id) ||
                        (y + 1 < map.height && map.at(x, y + 1) != id);
      if (edge) {
        out.at(x, y, 0) = 255;
        out.at(x, y, 1) = 0;
        out.at(x, y, 2) = 0;
      }
    }
  }
  return out;
}

}  // namespace scribprop
