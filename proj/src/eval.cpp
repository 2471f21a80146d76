#include "scribprop/eval.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>

namespace scribprop {

IoUReport miou(const LabelMap& pred, const LabelMap& gt, int num_classes) {
  if (pred.width != gt.width || pred.height != gt.height || pred.labels.size() != gt.labels.size()) {
    throw Error(ErrorCode::DimensionMismatch, "prediction and ground truth differ in size");
  }
  if (num_classes < 1) throw Error(ErrorCode::InvalidParameter, "num_classes must be >= 1");
  std::vector<std::size_t> inter(num_classes, 0);
  std::vector<std::size_t> uni(num_classes, 0);
  for (std::size_t p = 0; p < gt.labels.size(); ++p) {
    const int g = gt.labels[p];
    if (g == kUnknownLabel) continue;
    const int q = pred.labels[p];
    if (g == q) {
      if (g < num_classes) {
        ++inter[g];
        ++uni[g];
      }
      continue;
    }
    if (g < num_classes) ++uni[g];
    if (q < num_classes) ++uni[q];
  }
  IoUReport report;
  report.per_class.resize(num_classes);
  double sum = 0.0;
  int present = 0;
  for (int c = 0; c < num_classes; ++c) {
    if (uni[c] == 0) continue;
    report.per_class[c] = static_cast<double>(inter[c]) / static_cast<double>(uni[c]);
    sum += *report.per_class[c];
    ++present;
  }
  report.mean = present ? sum / present : 0.0;
  return report;
}

std::string report_json(const IoUReport& report) {
  nlohmann::ordered_json doc;
  nlohmann::ordered_json per_class = nlohmann::ordered_json::object();
  for (std::size_t c = 0; c < report.per_class.size(); ++c) {
    per_class[std::to_string(c)] =
        report.per_class[c] ? nlohmann::ordered_json(*report.per_class[c]) : nlohmann::ordered_json(nullptr);
  }
  doc["per_class"] = std::move(per_class);
  doc["miou"] = report.mean;
  return doc.dump(2);
}

std::vector<Pixel> centerline_path(const std::vector<Pixel>& polyline) {
  std::vector<Pixel> path;
  if (polyline.empty()) return path;
  path.push_back(polyline.front());
  for (std::size_t i = 1; i < polyline.size(); ++i) {
    const auto seg = line_pixels(polyline[i - 1], polyline[i]);
    path.insert(path.end(), seg.begin() + 1, seg.end());
  }
  return path;
}

namespace {

double step_length(Pixel a, Pixel b) {
  return (a.x != b.x && a.y != b.y) ? std::numbers::sqrt2 : 1.0;
}

// Vertices at every change of step direction; straight runs of axis or
// diagonal steps rasterize back to exactly the same pixels.
std::vector<Pixel> compress_path(const std::vector<Pixel>& path) {
  std::vector<Pixel> out;
  if (path.empty()) return out;
  out.push_back(path.front());
  for (std::size_t i = 1; i + 1 < path.size(); ++i) {
    const int dx0 = path[i].x - path[i - 1].x;
    const int dy0 = path[i].y - path[i - 1].y;
    const int dx1 = path[i + 1].x - path[i].x;
    const int dy1 = path[i + 1].y - path[i].y;
    if (dx0 != dx1 || dy0 != dy1) out.push_back(path[i]);
  }
  if (path.size() > 1) out.push_back(path.back());
  return out;
}

}  // namespace

double path_length(const std::vector<Pixel>& path) {
  double total = 0.0;
  for (std::size_t i = 1; i < path.size(); ++i) total += step_length(path[i - 1], path[i]);
  return total;
}

ScribbleSet shorten_scribbles(const ScribbleSet& set, double ratio, std::uint64_t seed) {
  ratio = std::clamp(ratio, 0.0, 1.0);
  std::mt19937_64 rng(seed);
  ScribbleSet out = set;
  for (auto& s : out.scribbles) {
    const bool from_end = (rng() & 1u) != 0;
    if (ratio >= 1.0) continue;
    auto path = centerline_path(s.polyline);
    if (from_end) std::reverse(path.begin(), path.end());
    const double target = ratio * path_length(path);
    double walked = 0.0;
    std::size_t keep = 1;
    while (keep < path.size()) {
      const double next = walked + step_length(path[keep - 1], path[keep]);
      if (std::abs(next - target) >= std::abs(walked - target)) break;
      walked = next;
      ++keep;
    }
    path.resize(keep);
    s.polyline = compress_path(path);
  }
  return out;
}

}  // namespace scribprop
