#pragma once

#include "scribprop/core.hpp"

#include <vector>

namespace scribprop {

/// Parameters of the graph-based (Felzenszwalb-Huttenlocher) over-segmentation.
struct SuperpixelParams {
  double k = 100.0;     // threshold scale; larger favours bigger components
  double sigma = 0.5;   // Gaussian pre-smoothing std, 0 disables
  int min_size = 50;    // components below this are merged away
};

struct SuperpixelMap {
  int width = 0;
  int height = 0;
  std::vector<int> ids;  // per pixel, in [0, count)
  int count = 0;

  int at(int x, int y) const { return ids[static_cast<std::size_t>(y) * width + x]; }
  std::vector<int> sizes() const;

  friend bool operator==(const SuperpixelMap&, const SuperpixelMap&) = default;
};

struct AdjacencyEdge {
  int i = 0;
  int j = 0;

  friend bool operator==(const AdjacencyEdge&, const AdjacencyEdge&) = default;
  friend auto operator<=>(const AdjacencyEdge&, const AdjacencyEdge&) = default;
};

void validate(const SuperpixelParams& params);

/// Graph-based segmentation on the 8-connected pixel grid. Ids are assigned in
/// raster order of each component's first pixel.
SuperpixelMap segment_fh(const RgbImage& image, const SuperpixelParams& params = {});

/// Unordered superpixel pairs sharing a 4-neighbour boundary, sorted by (i, j).
std::vector<AdjacencyEdge> adjacency(const SuperpixelMap& map);

/// For each superpixel, the ascending set of scribble categories whose raster touches it.
std::vector<std::vector<CategoryId>> scribble_overlap(const SuperpixelMap& map, const ScribbleSet& scribbles);

/// True iff ids are contiguous, every id is used and count matches.
bool is_partition(const SuperpixelMap& map);

/// Ids as a 16-bit grayscale PNG.
std::string encode_superpixel_ids(const SuperpixelMap& map);
/// Copy of the image with superpixel boundary pixels painted red.
RgbImage boundary_overlay(const RgbImage& image, const SuperpixelMap& map);

}  // namespace scribprop
