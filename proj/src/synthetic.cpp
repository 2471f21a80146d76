#include "scribprop/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace scribprop {

double uniform01(std::mt19937_64& rng) {
  // 53 random mantissa bits in [0, 1).
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

int uniform_int(std::mt19937_64& rng, int lo, int hi) {
  const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
  return lo + static_cast<int>(rng() % span);
}

double standard_normal(std::mt19937_64& rng) {
  // Box-Muller; 1 - u keeps the log argument in (0, 1].
  const double u1 = 1.0 - uniform01(rng);
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::vector<PaletteEntry> SynthSpec::default_palette() {
  return {
      {0, {0, 0, 0}},       {1, {128, 0, 0}},    {2, {0, 128, 0}},     {3, {128, 128, 0}},
      {4, {0, 0, 128}},     {5, {128, 0, 128}},  {6, {0, 128, 128}},   {7, {128, 128, 128}},
      {8, {64, 0, 0}},      {9, {192, 0, 0}},    {10, {64, 128, 0}},   {11, {192, 128, 0}},
      {12, {64, 0, 128}},   {13, {192, 0, 128}}, {14, {64, 128, 128}}, {15, {192, 128, 128}},
      {16, {0, 64, 0}},     {17, {128, 64, 0}},  {18, {0, 192, 0}},    {19, {128, 192, 0}},
      {20, {0, 64, 128}},
  };
}

namespace {

constexpr int kMinObjectSide = 20;
constexpr int kObjectGap = 4;
constexpr int kScribbleMargin = 2;
constexpr int kPlacementAttempts = 2000;

struct Region {
  int x0, y0, w, h;
  bool ellipse;
  CategoryId category;
  std::array<std::uint8_t, 3> rgb;

  bool contains(int x, int y) const {
    if (x < x0 || y < y0 || x >= x0 + w || y >= y0 + h) return false;
    if (!ellipse) return true;
    const double nx = (x + 0.5 - x0 - w / 2.0) / (w / 2.0);
    const double ny = (y + 0.5 - y0 - h / 2.0) / (h / 2.0);
    return nx * nx + ny * ny <= 1.0;
  }
};

bool separated(const Region& a, const Region& b) {
  return a.x0 + a.w + kObjectGap <= b.x0 || b.x0 + b.w + kObjectGap <= a.x0 ||
         a.y0 + a.h + kObjectGap <= b.y0 || b.y0 + b.h + kObjectGap <= a.y0;
}

// Straight scribble through the centre of a box along its longer side.
Scribble axis_scribble(int x0, int y0, int w, int h, double fraction, CategoryId category) {
  Scribble s;
  s.category = category;
  const bool horizontal = w >= h;
  const int longer = horizontal ? w : h;
  const int length = static_cast<int>(std::lround(fraction * longer));
  const int start = (longer - 1 - length) / 2;
  if (horizontal) {
    const int y = y0 + (h - 1) / 2;
    s.polyline = {{x0 + start, y}, {x0 + start + length, y}};
  } else {
    const int x = x0 + (w - 1) / 2;
    s.polyline = {{x, y0 + start}, {x, y0 + start + length}};
  }
  if (length == 0) s.polyline.resize(1);
  return s;
}

bool keeps_margin(const Scribble& s, const LabelMap& gt) {
  for (const auto& p : rasterize(s, gt.width, gt.height)) {
    for (int dy = -kScribbleMargin; dy <= kScribbleMargin; ++dy) {
      for (int dx = -kScribbleMargin; dx <= kScribbleMargin; ++dx) {
        const int x = p.x + dx;
        const int y = p.y + dy;
        if (x < 0 || y < 0 || x >= gt.width || y >= gt.height) continue;
        if (gt.at(x, y) != s.category) return false;
      }
    }
  }
  return true;
}

// Trims both ends one pixel at a time until the margin holds.
void fit_inside(Scribble& s, const LabelMap& gt) {
  while (!keeps_margin(s, gt) && s.polyline.size() == 2) {
    auto& a = s.polyline[0];
    auto& b = s.polyline[1];
    const int sx = (b.x > a.x) - (b.x < a.x);
    const int sy = (b.y > a.y) - (b.y < a.y);
    if (std::abs(b.x - a.x) + std::abs(b.y - a.y) <= 2) {
      s.polyline = {{(a.x + b.x) / 2, (a.y + b.y) / 2}};
      break;
    }
    a.x += sx;
    a.y += sy;
    b.x -= sx;
    b.y -= sy;
  }
}

}  // namespace

void validate(const SynthSpec& spec) {
  if (spec.width < 2 * kMinObjectSide || spec.height < 2 * kMinObjectSide) {
    throw Error(ErrorCode::InvalidSpec, "image must be at least 40x40");
  }
  if (spec.min_regions < 2 || spec.max_regions < spec.min_regions) {
    throw Error(ErrorCode::InvalidSpec, "region count range must satisfy 2 <= min <= max");
  }
  if (static_cast<int>(spec.palette.size()) < spec.max_regions) {
    throw Error(ErrorCode::InvalidSpec, "palette smaller than max region count");
  }
  for (std::size_t i = 0; i < spec.palette.size(); ++i) {
    if (spec.palette[i].category < 0 || spec.palette[i].category > kMaxCategory) {
      throw Error(ErrorCode::InvalidSpec, "palette category out of range");
    }
    for (std::size_t j = 0; j < i; ++j) {
      if (spec.palette[i].category == spec.palette[j].category) {
        throw Error(ErrorCode::InvalidSpec, "duplicate palette category");
      }
    }
  }
  if (!(spec.noise_std >= 0.0) || !(spec.scribble_fraction >= 0.0 && spec.scribble_fraction <= 1.0)) {
    throw Error(ErrorCode::InvalidSpec, "noise must be >= 0 and fraction in [0, 1]");
  }
}

SynthSample generate_synthetic(const SynthSpec& spec) {
  validate(spec);
  std::mt19937_64 rng(spec.seed);
  const int w = spec.width;
  const int h = spec.height;
  const int objects = uniform_int(rng, spec.min_regions, spec.max_regions) - 1;

  // A band along the longer side is kept free of objects for the background scribble.
  const bool horizontal = w >= h;
  const int band = std::max(8, (horizontal ? h : w) / 8);

  std::vector<int> pool;
  for (std::size_t i = 1; i < spec.palette.size(); ++i) pool.push_back(static_cast<int>(i));
  std::vector<Region> regions;
  const int max_w = std::max(kMinObjectSide, static_cast<int>((horizontal ? w : w - band) * 0.45));
  const int max_h = std::max(kMinObjectSide, static_cast<int>((horizontal ? h - band : h) * 0.45));
  for (int attempt = 0; attempt < kPlacementAttempts && static_cast<int>(regions.size()) < objects; ++attempt) {
    Region r{};
    r.w = uniform_int(rng, kMinObjectSide, max_w);
    r.h = uniform_int(rng, kMinObjectSide, max_h);
    const int lo_x = horizontal ? 1 : band;
    const int lo_y = horizontal ? band : 1;
    if (w - 1 - r.w < lo_x || h - 1 - r.h < lo_y) continue;
    r.x0 = uniform_int(rng, lo_x, w - 1 - r.w);
    r.y0 = uniform_int(rng, lo_y, h - 1 - r.h);
    r.ellipse = (rng() & 1u) != 0;
    if (!std::all_of(regions.begin(), regions.end(), [&](const Region& o) { return separated(r, o); })) continue;
    const int pick = uniform_int(rng, 0, static_cast<int>(pool.size()) - 1);
    const auto& entry = spec.palette[pool[pick]];
    pool.erase(pool.begin() + pick);
    r.category = entry.category;
    r.rgb = entry.rgb;
    regions.push_back(r);
  }
  if (regions.empty()) throw Error(ErrorCode::InvalidSpec, "could not place any object");

  SynthSample out;
  const auto& bg = spec.palette.front();
  out.ground_truth = LabelMap(w, h, static_cast<std::uint16_t>(bg.category));
  out.image = RgbImage(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      auto rgb = bg.rgb;
      for (const auto& r : regions) {
        if (r.contains(x, y)) {
          out.ground_truth.at(x, y) = static_cast<std::uint16_t>(r.category);
          rgb = r.rgb;
        }
      }
      for (int c = 0; c < 3; ++c) {
        double v = rgb[c];
        if (spec.noise_std > 0.0) v += spec.noise_std * standard_normal(rng);
        out.image.at(x, y, c) = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
      }
    }
  }

  out.scribbles.image_ref = "synthetic_" + std::to_string(spec.seed);
  out.scribbles.width = w;
  out.scribbles.height = h;
  Scribble background = horizontal ? axis_scribble(0, 0, w, band - kObjectGap, spec.scribble_fraction, bg.category)
                                   : axis_scribble(0, 0, band - kObjectGap, h, spec.scribble_fraction, bg.category);
  fit_inside(background, out.ground_truth);
  out.scribbles.scribbles.push_back(background);
  for (const auto& r : regions) {
    Scribble s = axis_scribble(r.x0, r.y0, r.w, r.h, spec.scribble_fraction, r.category);
    fit_inside(s, out.ground_truth);
    out.scribbles.scribbles.push_back(std::move(s));
  }
  return out;
}

}  // namespace scribprop
