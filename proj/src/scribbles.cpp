#include "scribprop/core.hpp"

#include <json.hpp>

#include <algorithm>
#include <cstdlib>
#include <set>

namespace scribprop {

using nlohmann::json;
using nlohmann::ordered_json;

std::vector<CategoryId> ScribbleSet::categories() const {
  std::set<CategoryId> seen;
  for (const auto& s : scribbles) seen.insert(s.category);
  return {seen.begin(), seen.end()};
}

std::vector<Pixel> line_pixels(Pixel a, Pixel b) {
  // Always trace from the raster-earlier endpoint so (a, b) and (b, a)
  // produce the same pixels.
  const bool reversed = b < a;
  if (reversed) std::swap(a, b);
  std::vector<Pixel> out;
  const int dx = std::abs(b.x - a.x);
  const int dy = -std::abs(b.y - a.y);
  const int sx = a.x < b.x ? 1 : -1;
  const int sy = a.y < b.y ? 1 : -1;
  int err = dx + dy;
  int x = a.x;
  int y = a.y;
  while (true) {
    out.push_back({x, y});
    if (x == b.x && y == b.y) break;
    const int e2 = 2 * err;
    if (e2 >= dy) {
      err += dy;
      x += sx;
    }
    if (e2 <= dx) {
      err += dx;
      y += sy;
    }
  }
  if (reversed) std::reverse(out.begin(), out.end());
  return out;
}

PixelSet rasterize(const Scribble& scribble, int width, int height) {
  std::vector<Pixel> centerline;
  if (scribble.polyline.size() == 1) {
    centerline.push_back(scribble.polyline.front());
  }
  for (std::size_t i = 1; i < scribble.polyline.size(); ++i) {
    auto seg = line_pixels(scribble.polyline[i - 1], scribble.polyline[i]);
    centerline.insert(centerline.end(), seg.begin(), seg.end());
  }
  const int r = std::max(0, scribble.brush_radius);
  std::vector<Pixel> out;
  out.reserve(centerline.size() * static_cast<std::size_t>((2 * r + 1) * (2 * r + 1)));
  for (const auto& c : centerline) {
    for (int oy = -r; oy <= r; ++oy) {
      for (int ox = -r; ox <= r; ++ox) {
        if (ox * ox + oy * oy > r * r) continue;
        const int x = c.x + ox;
        const int y = c.y + oy;
        if (x < 0 || y < 0 || x >= width || y >= height) continue;
        out.push_back({x, y});
      }
    }
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

void validate(const ScribbleSet& set) {
  if (set.width < 1 || set.height < 1) {
    throw Error(ErrorCode::SchemaViolation, "width and height must be >= 1");
  }
  for (const auto& s : set.scribbles) {
    if (s.category < 0 || s.category > kMaxCategory) {
      throw Error(ErrorCode::SchemaViolation, "category out of range: " + std::to_string(s.category));
    }
    if (s.brush_radius < 0) throw Error(ErrorCode::SchemaViolation, "negative brush_radius");
    if (s.polyline.empty()) throw Error(ErrorCode::EmptyPolyline, "scribble has no vertices");
    for (const auto& p : s.polyline) {
      if (p.x < 0 || p.y < 0 || p.x >= set.width || p.y >= set.height) {
        throw Error(ErrorCode::OutOfBoundsCoordinate,
                    "(" + std::to_string(p.x) + ", " + std::to_string(p.y) + ")");
      }
    }
  }
}

namespace {

int require_int(const json& obj, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end() || !it->is_number_integer()) {
    throw Error(ErrorCode::SchemaViolation, std::string("missing integer field '") + key + "'");
  }
  const auto v = it->get<long long>();
  if (v < -(1LL << 30) || v > (1LL << 30)) {
    throw Error(ErrorCode::SchemaViolation, std::string("field '") + key + "' out of range");
  }
  return static_cast<int>(v);
}

}  // namespace

ScribbleSet parse_scribbles(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::SchemaViolation, e.what());
  }
  if (!doc.is_object()) throw Error(ErrorCode::SchemaViolation, "top level must be an object");
  ScribbleSet set;
  auto image = doc.find("image");
  if (image == doc.end() || !image->is_string()) {
    throw Error(ErrorCode::SchemaViolation, "missing string field 'image'");
  }
  set.image_ref = image->get<std::string>();
  set.width = require_int(doc, "width");
  set.height = require_int(doc, "height");
  auto list = doc.find("scribbles");
  if (list == doc.end() || !list->is_array()) {
    throw Error(ErrorCode::SchemaViolation, "missing array field 'scribbles'");
  }
  for (const auto& item : *list) {
    if (!item.is_object()) throw Error(ErrorCode::SchemaViolation, "scribble must be an object");
    Scribble s;
    s.category = require_int(item, "category");
    s.brush_radius = item.contains("brush_radius") ? require_int(item, "brush_radius") : 0;
    auto poly = item.find("polyline");
    if (poly == item.end() || !poly->is_array()) {
      throw Error(ErrorCode::SchemaViolation, "missing array field 'polyline'");
    }
    for (const auto& v : *poly) {
      if (!v.is_array() || v.size() != 2 || !v[0].is_number_integer() || !v[1].is_number_integer()) {
        throw Error(ErrorCode::SchemaViolation, "vertex must be [int, int]");
      }
      const auto x = v[0].get<long long>();
      const auto y = v[1].get<long long>();
      if (x < -(1LL << 30) || x > (1LL << 30) || y < -(1LL << 30) || y > (1LL << 30)) {
        throw Error(ErrorCode::OutOfBoundsCoordinate, "vertex magnitude");
      }
      s.polyline.push_back({static_cast<int>(x), static_cast<int>(y)});
    }
    set.scribbles.push_back(std::move(s));
  }
  validate(set);
  return set;
}

ScribbleSet load_scribbles(const std::filesystem::path& path) {
  return parse_scribbles(read_file(path));
}

std::string serialize_scribbles(const ScribbleSet& set) {
  ordered_json doc;
  doc["image"] = set.image_ref;
  doc["width"] = set.width;
  doc["height"] = set.height;
  doc["scribbles"] = ordered_json::array();
  for (const auto& s : set.scribbles) {
    ordered_json item;
    item["category"] = s.category;
    ordered_json poly = ordered_json::array();
    for (const auto& p : s.polyline) poly.push_back({p.x, p.y});
    item["polyline"] = std::move(poly);
    item["brush_radius"] = s.brush_radius;
    doc["scribbles"].push_back(std::move(item));
  }
  return doc.dump();
}

void save_scribbles(const ScribbleSet& set, const std::filesystem::path& path) {
  write_file(path, serialize_scribbles(set));
}

DatasetIndex load_dataset_index(const std::filesystem::path& path) {
  json doc;
  try {
    doc = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::SchemaViolation, e.what());
  }
  if (!doc.is_array()) throw Error(ErrorCode::SchemaViolation, "dataset index must be a list");
  const auto base = path.parent_path();
  auto resolve = [&](const json& v) -> std::optional<std::filesystem::path> {
    if (v.is_null()) return std::nullopt;
    if (!v.is_string()) throw Error(ErrorCode::SchemaViolation, "path must be string or null");
    std::filesystem::path p = v.get<std::string>();
    if (p.is_relative()) p = base / p;
    std::error_code ec;
    if (!std::filesystem::is_regular_file(p, ec)) throw Error(ErrorCode::MissingFile, p.string());
    return p;
  };
  DatasetIndex index;
  for (const auto& item : doc) {
    if (!item.is_object() || !item.contains("image")) {
      throw Error(ErrorCode::SchemaViolation, "entry needs an 'image' field");
    }
    DatasetEntry entry;
    entry.image = *resolve(item.at("image"));
    entry.scribbles = resolve(item.value("scribbles", json()));
    entry.mask = resolve(item.value("mask", json()));
    if (!entry.scribbles && !entry.mask) {
      throw Error(ErrorCode::SchemaViolation, "entry needs scribbles or mask: " + entry.image.string());
    }
    index.entries.push_back(std::move(entry));
  }
  return index;
}

void save_dataset_index(const DatasetIndex& index, const std::filesystem::path& path) {
  const auto base = path.parent_path();
  auto rel = [&](const std::filesystem::path& p) {
    return p.lexically_relative(base.empty() ? std::filesystem::path(".") : base).generic_string();
  };
  ordered_json doc = ordered_json::array();
  for (const auto& e : index.entries) {
    ordered_json item;
    item["image"] = rel(e.image);
    item["scribbles"] = e.scribbles ? ordered_json(rel(*e.scribbles)) : ordered_json(nullptr);
    item["mask"] = e.mask ? ordered_json(rel(*e.mask)) : ordered_json(nullptr);
    doc.push_back(std::move(item));
  }
  write_file(path, doc.dump(2));
}

}  // namespace scribprop
