#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace scribprop {

enum class ErrorCode {
  MissingFile,
  UnsupportedFormat,
  CorruptData,
  SchemaViolation,
  OutOfBoundsCoordinate,
  EmptyPolyline,
  IoFailure,
  ValueOutOfRange,
  InvalidParameter,
  DimensionMismatch,
  EmptyPixelSet,
  OverlapOutsideUniverse,
  NonFiniteLogProb,
  ShapeMismatch,
  InconsistentSizes,
  LengthMismatch,
  InfeasibleCurrent,
  NoFeasibleLabeling,
  UniverseMismatch,
  EmptyTrainingSet,
  LabelOutOfRange,
  NotNormalized,
  NoScribbles,
  EmptyDataset,
  InvalidSpec,
};

const char* to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

using CategoryId = int;

/// Label value marking pixels with no category.
inline constexpr std::uint16_t kUnknownLabel = 255;
/// Largest storable category id; 255 is reserved for the sentinel.
inline constexpr CategoryId kMaxCategory = 254;

struct Pixel {
  int x = 0;
  int y = 0;

  friend bool operator==(const Pixel&, const Pixel&) = default;
  /// Raster order: row first, then column.
  friend bool operator<(const Pixel& a, const Pixel& b) {
    return a.y != b.y ? a.y < b.y : a.x < b.x;
  }
};

using PixelSet = std::vector<Pixel>;

struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> data;  // row-major RGB triplets

  RgbImage() = default;
  RgbImage(int w, int h) : width(w), height(h), data(static_cast<std::size_t>(w) * h * 3, 0) {}

  std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }
  std::uint8_t& at(int x, int y, int c) { return data[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }
  std::uint8_t at(int x, int y, int c) const { return data[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }
  bool contains(int x, int y) const { return x >= 0 && y >= 0 && x < width && y < height; }

  friend bool operator==(const RgbImage&, const RgbImage&) = default;
};

struct LabelMap {
  int width = 0;
  int height = 0;
  std::vector<std::uint16_t> labels;

  LabelMap() = default;
  LabelMap(int w, int h, std::uint16_t fill = kUnknownLabel)
      : width(w), height(h), labels(static_cast<std::size_t>(w) * h, fill) {}

  std::uint16_t& at(int x, int y) { return labels[static_cast<std::size_t>(y) * width + x]; }
  std::uint16_t at(int x, int y) const { return labels[static_cast<std::size_t>(y) * width + x]; }

  friend bool operator==(const LabelMap&, const LabelMap&) = default;
};

struct Scribble {
  CategoryId category = 0;
  std::vector<Pixel> polyline;
  int brush_radius = 0;

  friend bool operator==(const Scribble&, const Scribble&) = default;
};

struct ScribbleSet {
  std::string image_ref;
  int width = 0;
  int height = 0;
  std::vector<Scribble> scribbles;

  /// Distinct categories, ascending.
  std::vector<CategoryId> categories() const;

  friend bool operator==(const ScribbleSet&, const ScribbleSet&) = default;
};

struct DatasetEntry {
  std::filesystem::path image;
  std::optional<std::filesystem::path> scribbles;
  std::optional<std::filesystem::path> mask;
};

struct DatasetIndex {
  std::vector<DatasetEntry> entries;
};

// Raster I/O. PNG (8-bit) and binary PPM are decoded; output is always PNG.
RgbImage load_image(const std::filesystem::path& path);
RgbImage decode_image(const std::string& bytes);
/// Width and height read from the file header without decoding pixel data.
std::pair<int, int> probe_image_size(const std::string& bytes);
void save_image(const RgbImage& image, const std::filesystem::path& path);
std::string encode_png(const RgbImage& image);

void save_labelmap(const LabelMap& map, const std::filesystem::path& path);
LabelMap load_labelmap(const std::filesystem::path& path);
std::string encode_labelmap_png(const LabelMap& map);
LabelMap decode_labelmap_png(const std::string& bytes);

/// 16-bit grayscale PNG of arbitrary per-pixel ids (< 65536).
std::string encode_gray16_png(int width, int height, const std::vector<std::uint16_t>& values);

// Scribble annotations.
ScribbleSet parse_scribbles(const std::string& json_text);
ScribbleSet load_scribbles(const std::filesystem::path& path);
/// Canonical compact serialization with fixed field order.
std::string serialize_scribbles(const ScribbleSet& set);
void save_scribbles(const ScribbleSet& set, const std::filesystem::path& path);
void validate(const ScribbleSet& set);

/// Bresenham segments between consecutive vertices, dilated by a disk of
/// brush_radius, clipped to the image. Sorted in raster order, no duplicates.
PixelSet rasterize(const Scribble& scribble, int width, int height);

/// Pixels of the straight segment a-b, from a to b. Independent of whether the
/// segment is given as (a, b) or (b, a) up to reversal.
std::vector<Pixel> line_pixels(Pixel a, Pixel b);

DatasetIndex load_dataset_index(const std::filesystem::path& path);
void save_dataset_index(const DatasetIndex& index, const std::filesystem::path& path);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& bytes);

}  // namespace scribprop
