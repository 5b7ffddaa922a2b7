#pragma once

// Per-pixel line-of-sight distances against a height grid.
//
// Distances are 3D slant ranges from the projection center, in meters.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include "airvis/camera.hpp"
#include "airvis/error.hpp"
#include "airvis/pixmap.hpp"
#include "airvis/terrain.hpp"

namespace airvis {

struct RayCastOptions {
  double max_range = 16000.0;
  double coarse_step = 0.0;  // <= 0 selects half the grid cell size
  int refine_iters = 20;

  [[nodiscard]] double step_for(const HeightGrid& grid) const {
    return coarse_step > 0.0 ? coarse_step : 0.5 * grid.cell_size;
  }

  void validate() const {
    if (!(max_range > 0.0)) throw InvalidArgument("max_range must be > 0");
    if (refine_iters < 0) throw InvalidArgument("refine_iters must be >= 0");
  }
};

/// Sentinel written to depth PFM files for invalid (sky / no intersection) pixels.
inline constexpr double kDepthPfmInvalid = -1.0;

struct DepthMap {
  ScalarMap distance;            // meters; NaN = invalid
  std::vector<int> horizon_row;  // per column; == height when the column never hits terrain

  DepthMap() = default;
  DepthMap(int width, int height)
      : distance(width, height, kInvalid), horizon_row(static_cast<std::size_t>(width), height) {}

  [[nodiscard]] int width() const noexcept { return distance.width(); }
  [[nodiscard]] int height() const noexcept { return distance.height(); }
  [[nodiscard]] double operator()(int x, int y) const noexcept { return distance(x, y); }
  [[nodiscard]] bool valid(int x, int y) const noexcept { return is_valid(distance(x, y)); }

  /// Recomputes horizon rows as the topmost valid pixel of each column.
  void update_horizon() {
    horizon_row.assign(static_cast<std::size_t>(width()), height());
    for (int x = 0; x < width(); ++x) {
      for (int y = 0; y < height(); ++y) {
        if (valid(x, y)) {
          horizon_row[static_cast<std::size_t>(x)] = y;
          break;
        }
      }
    }
  }
};

inline void save_depth_pfm(const DepthMap& depth, const std::string& path) {
  save_pfm(depth.distance, path, kDepthPfmInvalid);
}

/// Loads a depth PFM; negative values are invalid.
[[nodiscard]] inline DepthMap load_depth_pfm(const std::string& path) {
  DepthMap depth;
  depth.distance = load_pfm(path);
  for (double& v : depth.distance.values()) {
    if (v < 0.0) v = kInvalid;
  }
  depth.update_horizon();
  return depth;
}

namespace detail {

// Height of the ray above terrain, or +inf where there is no terrain.
[[nodiscard]] inline double clearance(const HeightGrid& grid, const Ray& ray, double s) {
  const Vec3 p = ray.at(s);
  const auto h = sample_height(grid, p.x(), p.y());
  return h ? p.z() - *h : std::numeric_limits<double>::infinity();
}

// True once the ray can no longer reach terrain: outside the extent and moving
// away from it, or above every cell and not descending.
[[nodiscard]] inline bool ray_escaped(const HeightGrid& grid, const Ray& ray, double s,
                                      double max_height) {
  const Vec3 p = ray.at(s);
  const Vec3& d = ray.direction;
  if (p.z() > max_height && d.z() >= 0.0) return true;
  const double x1 = grid.origin_x + grid.ncols * grid.cell_size;
  const double y1 = grid.origin_y + grid.nrows * grid.cell_size;
  if ((p.x() < grid.origin_x && d.x() <= 0.0) || (p.x() > x1 && d.x() >= 0.0)) return true;
  if ((p.y() < grid.origin_y && d.y() <= 0.0) || (p.y() > y1 && d.y() >= 0.0)) return true;
  return false;
}

}  // namespace detail

/// First crossing of the ray from above terrain to at-or-below terrain.
///
/// Samples at s = k * step. On the first pair (s_k, s_{k+1}) where the
/// clearance goes from positive to non-positive, the bracket is bisected
/// refine_iters times and its midpoint returned. No-data terrain counts as
/// no surface. Crossings beyond max_range are discarded, so raising
/// max_range never moves a crossing that was already found.
///
/// `max_height` is the grid's largest valid height (see HeightGrid::max_height).
[[nodiscard]] inline std::optional<double> cast_ray(const HeightGrid& grid, const Ray& ray,
                                                    const RayCastOptions& opts, double max_height) {
  opts.validate();
  const double step = opts.step_for(grid);
  if (!(step > 0.0)) throw InvalidArgument("coarse_step must be > 0");
  if (!std::isfinite(max_height)) return std::nullopt;

  double prev_s = 0.0;
  double prev_g = detail::clearance(grid, ray, 0.0);
  for (long k = 1;; ++k) {
    if (prev_s > opts.max_range) return std::nullopt;
    if (prev_g > 0.0 && detail::ray_escaped(grid, ray, prev_s, max_height)) return std::nullopt;
    const double s = static_cast<double>(k) * step;
    const double g = detail::clearance(grid, ray, s);
    if (prev_g > 0.0 && g <= 0.0) {
      double lo = prev_s;
      double hi = s;
      for (int i = 0; i < opts.refine_iters; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (detail::clearance(grid, ray, mid) > 0.0) {
          lo = mid;
        } else {
          hi = mid;
        }
      }
      const double hit = 0.5 * (lo + hi);
      if (hit > opts.max_range) return std::nullopt;
      return hit;
    }
    prev_s = s;
    prev_g = g;
  }
}

[[nodiscard]] inline std::optional<double> cast_ray(const HeightGrid& grid, const Ray& ray,
                                                    const RayCastOptions& opts) {
  return cast_ray(grid, ray, opts, grid.max_height());
}

/// Casts one ray per pixel. The horizon row of a column is its topmost pixel
/// with a terrain hit; every pixel above it is invalid by construction.
[[nodiscard]] inline DepthMap build_depth_map(const HeightGrid& grid, const CameraPose& pose, int width,
                                              int height, const RayCastOptions& opts) {
  opts.validate();
  if (width <= 0 || height <= 0) throw InvalidArgument("image dimensions must be positive");
  if (auto ground = sample_height(grid, pose.x0, pose.y0); ground && *ground >= pose.z0) {
    throw NumericError("camera is at or below the terrain surface at its own position");
  }
  const double max_height = grid.max_height();
  DepthMap depth(width, height);
  for (int x = 0; x < width; ++x) {
    for (int y = 0; y < height; ++y) {
      if (auto d = cast_ray(grid, pixel_ray(pose, x, y), opts, max_height)) depth.distance(x, y) = *d;
    }
  }
  depth.update_horizon();
  return depth;
}

/// Running-minimum clamp down each column, starting at the horizon row.
/// Invalid pixels are skipped and do not reset the running minimum.
[[nodiscard]] inline DepthMap correct_depth_map(const DepthMap& raw) {
  DepthMap out = raw;
  for (int x = 0; x < out.width(); ++x) {
    double running = std::numeric_limits<double>::infinity();
    const int start = std::max(0, out.horizon_row[static_cast<std::size_t>(x)]);
    for (int y = start; y < out.height(); ++y) {
      double& d = out.distance(x, y);
      if (!is_valid(d)) continue;
      running = std::min(running, d);
      d = running;
    }
  }
  return out;
}

/// Position in [0, 1] on the log-distance scale between d_min and d_max.
[[nodiscard]] inline double log_depth_position(double d, double d_min, double d_max) {
  const double t = (std::log(d) - std::log(d_min)) / (std::log(d_max) - std::log(d_min));
  return std::clamp(t, 0.0, 1.0);
}

/// Colormap for depth renderings: dark red (near) through red, yellow, green
/// and cyan to dark blue (far). Piecewise linear between six stops.
[[nodiscard]] inline Rgb depth_colormap(double position) {
  static constexpr Rgb kStops[] = {{0.5, 0.0, 0.0}, {1.0, 0.0, 0.0}, {1.0, 1.0, 0.0},
                                   {0.0, 0.8, 0.0}, {0.0, 1.0, 1.0}, {0.0, 0.0, 0.6}};
  constexpr int kSegments = static_cast<int>(std::size(kStops)) - 1;
  const double p = std::clamp(position, 0.0, 1.0) * kSegments;
  const int i = std::min(static_cast<int>(p), kSegments - 1);
  const double t = p - i;
  const Rgb& a = kStops[i];
  const Rgb& b = kStops[i + 1];
  return Rgb{a.r + t * (b.r - a.r), a.g + t * (b.g - a.g), a.b + t * (b.b - a.b)};
}

/// Reserved color for invalid (sky) pixels; never produced by depth_colormap.
inline constexpr Rgb kSkyColor{1.0, 1.0, 1.0};

[[nodiscard]] inline RgbImage render_depth_log(const DepthMap& depth, double d_min, double d_max) {
  if (!(d_min > 0.0 && d_min < d_max)) throw InvalidArgument("render range needs 0 < d_min < d_max");
  RgbImage out(depth.width(), depth.height());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double d = depth.distance[i];
    out[i] = is_valid(d) ? depth_colormap(log_depth_position(d, d_min, d_max)) : kSkyColor;
  }
  return out;
}

}  // namespace airvis
