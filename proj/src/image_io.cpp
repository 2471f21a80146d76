#include "scribprop/core.hpp"

#include <png.h>

#include <cctype>
#include <cstring>
#include <fstream>
#include <sstream>

namespace scribprop {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::MissingFile: return "MissingFile";
    case ErrorCode::UnsupportedFormat: return "UnsupportedFormat";
    case ErrorCode::CorruptData: return "CorruptData";
    case ErrorCode::SchemaViolation: return "SchemaViolation";
    case ErrorCode::OutOfBoundsCoordinate: return "OutOfBoundsCoordinate";
    case ErrorCode::EmptyPolyline: return "EmptyPolyline";
    case ErrorCode::IoFailure: return "IoFailure";
    case ErrorCode::ValueOutOfRange: return "ValueOutOfRange";
    case ErrorCode::InvalidParameter: return "InvalidParameter";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::EmptyPixelSet: return "EmptyPixelSet";
    case ErrorCode::OverlapOutsideUniverse: return "OverlapOutsideUniverse";
    case ErrorCode::NonFiniteLogProb: return "NonFiniteLogProb";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::InconsistentSizes: return "InconsistentSizes";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::InfeasibleCurrent: return "InfeasibleCurrent";
    case ErrorCode::NoFeasibleLabeling: return "NoFeasibleLabeling";
    case ErrorCode::UniverseMismatch: return "UniverseMismatch";
    case ErrorCode::EmptyTrainingSet: return "EmptyTrainingSet";
    case ErrorCode::LabelOutOfRange: return "LabelOutOfRange";
    case ErrorCode::NotNormalized: return "NotNormalized";
    case ErrorCode::NoScribbles: return "NoScribbles";
    case ErrorCode::EmptyDataset: return "EmptyDataset";
    case ErrorCode::InvalidSpec: return "InvalidSpec";
  }
  return "Unknown";
}

std::string read_file(const std::filesystem::path& path) {
  std::error_code ec;
  if (!std::filesystem::is_regular_file(path, ec)) {
    throw Error(ErrorCode::MissingFile, path.string());
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& bytes) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoFailure, "cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::IoFailure, "short write " + path.string());
}

namespace {

constexpr unsigned char kPngSignature[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};

bool is_png(const std::string& bytes) {
  return bytes.size() >= 8 && std::memcmp(bytes.data(), kPngSignature, 8) == 0;
}

bool is_ppm(const std::string& bytes) {
  return bytes.size() >= 2 && bytes[0] == 'P' && bytes[1] == '6';
}

struct ReadCursor {
  const std::string* bytes;
  std::size_t offset;
};

void png_read_from_memory(png_structp png, png_bytep out, png_size_t count) {
  auto* cursor = static_cast<ReadCursor*>(png_get_io_ptr(png));
  if (cursor->offset + count > cursor->bytes->size()) png_error(png, "truncated");
  std::memcpy(out, cursor->bytes->data() + cursor->offset, count);
  cursor->offset += count;
}

void png_write_to_string(png_structp png, png_bytep data, png_size_t count) {
  auto* out = static_cast<std::string*>(png_get_io_ptr(png));
  out->append(reinterpret_cast<const char*>(data), count);
}

void png_flush_noop(png_structp) {}

void png_error_handler(png_structp png, png_const_charp msg) {
  auto* message = static_cast<std::string*>(png_get_error_ptr(png));
  if (message) *message = msg;
  png_longjmp(png, 1);
}

void png_warning_handler(png_structp, png_const_charp) {}

/// Decoded PNG with its pixels converted to the requested channel layout.
struct DecodedPng {
  int width = 0;
  int height = 0;
  int channels = 0;
  int color_type = 0;
  std::vector<std::uint8_t> pixels;
  std::vector<png_bytep> rows;
};

enum class PngTarget { Rgb, Gray8Only };

// Locals touched after setjmp live behind `state` so longjmp leaves them valid.
void decode_png_into(const std::string& bytes, PngTarget target, DecodedPng* state,
                     std::string* message, bool* unsupported) {
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, message, png_error_handler,
                                           png_warning_handler);
  if (!png) throw Error(ErrorCode::IoFailure, "png_create_read_struct");
  png_infop info = png_create_info_struct(png);
  ReadCursor cursor{&bytes, 0};

  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error(ErrorCode::CorruptData, "png: " + *message);
  }
  png_set_read_fn(png, &cursor, png_read_from_memory);
  png_read_info(png, info);
  state->width = static_cast<int>(png_get_image_width(png, info));
  state->height = static_cast<int>(png_get_image_height(png, info));
  const int bit_depth = png_get_bit_depth(png, info);
  state->color_type = png_get_color_type(png, info);

  if (target == PngTarget::Gray8Only) {
    *unsupported = state->color_type != PNG_COLOR_TYPE_GRAY || bit_depth != 8;
  } else {
    *unsupported = bit_depth > 8;
  }
  if (!*unsupported) {
    if (target == PngTarget::Rgb) {
      if (state->color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
      if (state->color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
      if (state->color_type == PNG_COLOR_TYPE_GRAY || state->color_type == PNG_COLOR_TYPE_GRAY_ALPHA) {
        png_set_gray_to_rgb(png);
      }
      if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
      png_set_strip_alpha(png);
    }
    png_read_update_info(png, info);
    state->channels = png_get_channels(png, info);
    const std::size_t stride = png_get_rowbytes(png, info);
    state->pixels.resize(stride * state->height);
    state->rows.resize(state->height);
    for (int y = 0; y < state->height; ++y) state->rows[y] = state->pixels.data() + stride * y;
    png_read_image(png, state->rows.data());
  }
  png_destroy_read_struct(&png, &info, nullptr);
}

DecodedPng decode_png(const std::string& bytes, PngTarget target) {
  DecodedPng out;
  std::string message;
  bool unsupported = false;
  decode_png_into(bytes, target, &out, &message, &unsupported);
  if (unsupported) throw Error(ErrorCode::UnsupportedFormat, "unsupported PNG layout");
  out.rows.clear();
  return out;
}

void encode_png_into(int width, int height, int color_type, int bit_depth,
                     const std::vector<std::uint8_t>& pixels, std::size_t stride,
                     std::string* out, std::vector<png_bytep>* rows, std::string* message) {
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, message, png_error_handler,
                                            png_warning_handler);
  if (!png) throw Error(ErrorCode::IoFailure, "png_create_write_struct");
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw Error(ErrorCode::IoFailure, "png: " + *message);
  }
  png_set_write_fn(png, out, png_write_to_string, png_flush_noop);
  png_set_compression_level(png, 6);
  png_set_IHDR(png, info, width, height, bit_depth, color_type, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  rows->resize(height);
  for (int y = 0; y < height; ++y) {
    (*rows)[y] = const_cast<png_bytep>(pixels.data() + stride * y);
  }
  png_write_image(png, rows->data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

std::string encode_png_raw(int width, int height, int color_type, int bit_depth,
                           const std::vector<std::uint8_t>& pixels, std::size_t stride) {
  std::string out;
  std::string message;
  std::vector<png_bytep> rows;
  encode_png_into(width, height, color_type, bit_depth, pixels, stride, &out, &rows, &message);
  return out;
}

// Minimal binary PPM (P6, maxval 255) reader.
class PpmReader {
 public:
  explicit PpmReader(const std::string& bytes) : bytes_(bytes) {}

  int next_int() {
    skip_space_and_comments();
    if (pos_ >= bytes_.size() || !std::isdigit(static_cast<unsigned char>(bytes_[pos_]))) {
      throw Error(ErrorCode::CorruptData, "ppm header");
    }
    long value = 0;
    while (pos_ < bytes_.size() && std::isdigit(static_cast<unsigned char>(bytes_[pos_]))) {
      value = value * 10 + (bytes_[pos_++] - '0');
      if (value > (1L << 30)) throw Error(ErrorCode::CorruptData, "ppm header value");
    }
    return static_cast<int>(value);
  }

  void skip_single_whitespace() {
    if (pos_ >= bytes_.size() || !std::isspace(static_cast<unsigned char>(bytes_[pos_]))) {
      throw Error(ErrorCode::CorruptData, "ppm header terminator");
    }
    ++pos_;
  }

  std::size_t pos() const { return pos_; }
  void seek(std::size_t p) { pos_ = p; }

 private:
  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      const char c = bytes_[pos_];
      if (c == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  const std::string& bytes_;
  std::size_t pos_ = 0;
};

struct PpmHeader {
  int width;
  int height;
  std::size_t data_offset;
};

PpmHeader read_ppm_header(const std::string& bytes) {
  PpmReader reader(bytes);
  reader.seek(2);
  const int width = reader.next_int();
  const int height = reader.next_int();
  const int maxval = reader.next_int();
  reader.skip_single_whitespace();
  if (maxval != 255) throw Error(ErrorCode::UnsupportedFormat, "ppm maxval must be 255");
  return {width, height, reader.pos()};
}

}  // namespace

std::pair<int, int> probe_image_size(const std::string& bytes) {
  if (is_png(bytes)) {
    // IHDR is always the first chunk: 8 signature + 4 length + 4 type.
    if (bytes.size() < 24 || std::memcmp(bytes.data() + 12, "IHDR", 4) != 0) {
      throw Error(ErrorCode::CorruptData, "png header");
    }
    auto be32 = [&](std::size_t off) {
      const auto* p = reinterpret_cast<const unsigned char*>(bytes.data() + off);
      return static_cast<std::uint32_t>(p[0]) << 24 | static_cast<std::uint32_t>(p[1]) << 16 |
             static_cast<std::uint32_t>(p[2]) << 8 | p[3];
    };
    const std::uint32_t w = be32(16);
    const std::uint32_t h = be32(20);
    if (w == 0 || h == 0 || w > (1u << 30) || h > (1u << 30)) {
      throw Error(ErrorCode::CorruptData, "png dimensions");
    }
    return {static_cast<int>(w), static_cast<int>(h)};
  }
  if (is_ppm(bytes)) {
    const auto header = read_ppm_header(bytes);
    return {header.width, header.height};
  }
  throw Error(ErrorCode::UnsupportedFormat, "not a PNG or binary PPM");
}

RgbImage decode_image(const std::string& bytes) {
  if (is_png(bytes)) {
    DecodedPng png = decode_png(bytes, PngTarget::Rgb);
    if (png.width < 1 || png.height < 1) throw Error(ErrorCode::CorruptData, "empty image");
    RgbImage image;
    image.width = png.width;
    image.height = png.height;
    image.data = std::move(png.pixels);
    return image;
  }
  if (is_ppm(bytes)) {
    const auto header = read_ppm_header(bytes);
    if (header.width < 1 || header.height < 1) throw Error(ErrorCode::CorruptData, "empty image");
    RgbImage image(header.width, header.height);
    if (bytes.size() - header.data_offset < image.data.size()) {
      throw Error(ErrorCode::CorruptData, "ppm pixel data truncated");
    }
    std::memcpy(image.data.data(), bytes.data() + header.data_offset, image.data.size());
    return image;
  }
  throw Error(ErrorCode::UnsupportedFormat, "not a PNG or binary PPM");
}

RgbImage load_image(const std::filesystem::path& path) { return decode_image(read_file(path)); }

std::string encode_png(const RgbImage& image) {
  return encode_png_raw(image.width, image.height, PNG_COLOR_TYPE_RGB, 8, image.data,
                        static_cast<std::size_t>(image.width) * 3);
}

void save_image(const RgbImage& image, const std::filesystem::path& path) {
  write_file(path, encode_png(image));
}

std::string encode_labelmap_png(const LabelMap& map) {
  if (map.width < 1 || map.height < 1 ||
      map.labels.size() != static_cast<std::size_t>(map.width) * map.height) {
    throw Error(ErrorCode::InconsistentSizes, "label map dimensions");
  }
  std::vector<std::uint8_t> bytes(map.labels.size());
  for (std::size_t i = 0; i < map.labels.size(); ++i) {
    if (map.labels[i] > kUnknownLabel) {
      throw Error(ErrorCode::ValueOutOfRange, "label value " + std::to_string(map.labels[i]));
    }
    bytes[i] = static_cast<std::uint8_t>(map.labels[i]);
  }
  return encode_png_raw(map.width, map.height, PNG_COLOR_TYPE_GRAY, 8, bytes,
                        static_cast<std::size_t>(map.width));
}

LabelMap decode_labelmap_png(const std::string& bytes) {
  if (!is_png(bytes)) throw Error(ErrorCode::UnsupportedFormat, "label map must be PNG");
  DecodedPng png = decode_png(bytes, PngTarget::Gray8Only);
  LabelMap map;
  map.width = png.width;
  map.height = png.height;
  map.labels.assign(png.pixels.begin(), png.pixels.end());
  return map;
}

void save_labelmap(const LabelMap& map, const std::filesystem::path& path) {
  write_file(path, encode_labelmap_png(map));
}

LabelMap load_labelmap(const std::filesystem::path& path) {
  return decode_labelmap_png(read_file(path));
}

std::string encode_gray16_png(int width, int height, const std::vector<std::uint16_t>& values) {
  std::vector<std::uint8_t> bytes(values.size() * 2);
  for (std::size_t i = 0; i < values.size(); ++i) {
    bytes[2 * i] = static_cast<std::uint8_t>(values[i] >> 8);
    bytes[2 * i + 1] = static_cast<std::uint8_t>(values[i] & 0xff);
  }
  return encode_png_raw(width, height, PNG_COLOR_TYPE_GRAY, 16, bytes,
                        static_cast<std::size_t>(width) * 2);
}

}  // namespace scribprop
