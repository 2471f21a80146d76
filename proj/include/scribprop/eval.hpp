#pragma once

#include "scribprop/core.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace scribprop {

struct IoUReport {
  std::vector<std::optional<double>> per_class;  // nullopt: class in neither map
  double mean = 0.0;
};

/// Classes 0..num_classes-1; pixels whose ground truth is the sentinel are ignored.
IoUReport miou(const LabelMap& pred, const LabelMap& gt, int num_classes);

/// `{"per_class": {id: iou|null}, "miou": real}`
std::string report_json(const IoUReport& report);

/// Pixel path of a polyline at brush radius 0, in drawing order without
/// repeated junction pixels.
std::vector<Pixel> centerline_path(const std::vector<Pixel>& polyline);

/// Length of a pixel path with unit axis steps and sqrt(2) diagonal steps.
double path_length(const std::vector<Pixel>& path);

/// Keeps a prefix of each scribble of length ratio x its arc length, starting
/// from an endpoint drawn per scribble from a generator seeded with `seed`.
ScribbleSet shorten_scribbles(const ScribbleSet& set, double ratio, std::uint64_t seed);

struct PaletteEntry {
  CategoryId category = 0;
  std::array<std::uint8_t, 3> rgb{};
};

struct SynthSpec {
  int width = 128;
  int height = 96;
  int min_regions = 3;  // including background
  int max_regions = 5;
  /// First entry is the background.
  std::vector<PaletteEntry> palette = default_palette();
  double noise_std = 0.0;
  double scribble_fraction = 0.7;
  std::uint64_t seed = 0;

  static std::vector<PaletteEntry> default_palette();
};

struct SynthSample {
  RgbImage image;
  LabelMap ground_truth;
  ScribbleSet scribbles;
};

void validate(const SynthSpec& spec);

/// Background plus non-overlapping rectangles and ellipses, Gaussian pixel
/// noise, one scribble per region along its major axis.
SynthSample generate_synthetic(const SynthSpec& spec);

/// Portable generator helpers; std:: distributions differ between libraries.
double uniform01(std::mt19937_64& rng);
int uniform_int(std::mt19937_64& rng, int lo, int hi);  // inclusive
double standard_normal(std::mt19937_64& rng);

}  // namespace scribprop
