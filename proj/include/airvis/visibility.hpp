#pragma once

// Visibility distance from a transmission map and a depth map.

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "airvis/depth.hpp"
#include "airvis/error.hpp"
#include "airvis/pixmap.hpp"

namespace airvis {

enum class VisibilityMethod { kPercentile, kMax };

[[nodiscard]] inline const char* to_string(VisibilityMethod m) {
  return m == VisibilityMethod::kMax ? "max" : "percentile";
}

[[nodiscard]] inline VisibilityMethod parse_visibility_method(const std::string& s) {
  if (s == "percentile") return VisibilityMethod::kPercentile;
  if (s == "max") return VisibilityMethod::kMax;
  throw InvalidArgument("visibility method must be 'percentile' or 'max', got '" + s + "'");
}

struct VisibilityParams {
  double threshold = 0.75;
  VisibilityMethod method = VisibilityMethod::kPercentile;
  double percentile_rank = 99.0;
  double bin_width = 10.0;

  void validate() const {
    if (!(threshold > 0.0 && threshold < 1.0)) throw InvalidArgument("threshold must lie in (0, 1)");
    if (!(percentile_rank > 0.0 && percentile_rank <= 100.0)) {
      throw InvalidArgument("percentile_rank must lie in (0, 100]");
    }
    if (!(bin_width > 0.0)) throw InvalidArgument("bin_width must be > 0");
  }
};

/// Depth histogram. Bin k covers (k * bin_width, (k + 1) * bin_width].
struct DepthHistogram {
  double bin_width = 10.0;
  std::vector<std::uint64_t> counts;  // bin k at index k

  /// Bin boundaries; edges[k] and edges[k + 1] bound counts[k].
  [[nodiscard]] std::vector<double> edges() const {
    std::vector<double> e(counts.size() + 1);
    for (std::size_t k = 0; k < e.size(); ++k) e[k] = static_cast<double>(k) * bin_width;
    return e;
  }

  [[nodiscard]] static std::size_t bin_of(double depth, double bin_width) {
    const double k = std::ceil(depth / bin_width) - 1.0;
    return k <= 0.0 ? 0 : static_cast<std::size_t>(k);
  }
};

struct VisibilityReport {
  double visibility = 0.0;  // meters
  VisibilityParams params;
  std::uint64_t visible_pixels = 0;  // valid depth and mask true
  std::uint64_t valid_pixels = 0;    // valid depth
  DepthHistogram histogram;
};

[[nodiscard]] inline BitMask visibility_mask(const ScalarMap& t, double threshold) {
  BitMask mask(t.width(), t.height());
  for (std::size_t i = 0; i < t.size(); ++i) mask[i] = t[i] >= threshold ? 1 : 0;
  return mask;
}

/// Pixels of the mask with at least one false 4-neighbor; outside the image counts as false.
[[nodiscard]] inline BitMask haze_border(const BitMask& mask) {
  BitMask border(mask.width(), mask.height());
  auto on = [&mask](int x, int y) { return mask.contains(x, y) && mask(x, y) != 0; };
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < mask.width(); ++x) {
      if (!on(x, y)) continue;
      if (!on(x - 1, y) || !on(x + 1, y) || !on(x, y - 1) || !on(x, y + 1)) border(x, y) = 1;
    }
  }
  return border;
}

/// Statistic over depths of pixels that are valid and visible.
///
/// Percentile method: with bins (k w, (k+1) w], returns the upper edge of the
/// first bin whose cumulative count reaches percentile_rank percent, capped at
/// the largest collected depth. Max method: the largest collected depth.
/// Throws NoVisibleSurface when nothing qualifies.
[[nodiscard]] inline VisibilityReport estimate_visibility(const DepthMap& depth, const BitMask& mask,
                                                          const VisibilityParams& params) {
  params.validate();
  require_same_shape(depth.distance, "depth map", mask, "mask");

  VisibilityReport report;
  report.params = params;
  report.histogram.bin_width = params.bin_width;
  std::vector<double> depths;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    const double d = depth.distance[i];
    if (!is_valid(d)) continue;
    ++report.valid_pixels;
    if (mask[i]) depths.push_back(d);
  }
  report.visible_pixels = depths.size();
  if (depths.empty()) {
    throw NoVisibleSurface("no pixel has both a valid depth and transmission >= " +
                           std::to_string(params.threshold));
  }

  const double max_depth = *std::max_element(depths.begin(), depths.end());
  auto& counts = report.histogram.counts;
  counts.assign(DepthHistogram::bin_of(max_depth, params.bin_width) + 1, 0);
  for (double d : depths) ++counts[DepthHistogram::bin_of(d, params.bin_width)];

  if (params.method == VisibilityMethod::kMax) {
    report.visibility = max_depth;
    return report;
  }
  const double n = static_cast<double>(depths.size());
  std::uint64_t cumulative = 0;
  for (std::size_t k = 0; k < counts.size(); ++k) {
    cumulative += counts[k];
    if (static_cast<double>(cumulative) * 100.0 >= params.percentile_rank * n) {
      report.visibility = std::min(static_cast<double>(k + 1) * params.bin_width, max_depth);
      return report;
    }
  }
  report.visibility = max_depth;
  return report;
}

[[nodiscard]] inline nlohmann::ordered_json report_to_json(const VisibilityReport& r) {
  nlohmann::ordered_json j;
  j["visibility_m"] = r.visibility;
  j["method"] = to_string(r.params.method);
  j["threshold"] = r.params.threshold;
  j["percentile_rank"] = r.params.percentile_rank;
  j["bin_width_m"] = r.params.bin_width;
  j["visible_pixels"] = r.visible_pixels;
  j["valid_pixels"] = r.valid_pixels;
  j["histogram"] = {{"edges_m", r.histogram.edges()}, {"counts", r.histogram.counts}};
  return j;
}

inline void save_report(const VisibilityReport& report, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write report '" + path + "'");
  out << report_to_json(report).dump(2) << '\n';
  if (!out) throw IoError("failed writing report '" + path + "'");
}

/// Copy of `img` with border pixels painted pure red.
[[nodiscard]] inline RgbImage overlay_border(const RgbImage& img, const BitMask& border) {
  require_same_shape(img, "image", border, "border mask");
  RgbImage out = img;
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (border[i]) out[i] = Rgb{1.0, 0.0, 0.0};
  }
  return out;
}

}  // namespace airvis
