#pragma once

// Synthetic scenes with known geometry, and the forward haze model.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <variant>
#include <vector>

#include "airvis/camera.hpp"
#include "airvis/dehaze.hpp"
#include "airvis/depth.hpp"
#include "airvis/error.hpp"
#include "airvis/pixmap.hpp"
#include "airvis/terrain.hpp"

namespace airvis {

struct Atmosphere {
  double beta = 0.0;  // scattering coefficient, 1/m
  AtmosphericLight airlight{0.8, 0.8, 0.8};
};

/// t = exp(-beta d); invalid depth (sky) is infinitely far, t = 0.
[[nodiscard]] inline ScalarMap transmission_from_depth(const DepthMap& depth, double beta) {
  if (!(beta >= 0.0)) throw InvalidArgument("beta must be >= 0");
  ScalarMap t(depth.width(), depth.height());
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double d = depth.distance[i];
    t[i] = is_valid(d) ? std::exp(-beta * d) : 0.0;
  }
  return t;
}

/// I = J t + A (1 - t), clamped to [0, 1].
[[nodiscard]] inline RgbImage apply_haze_with_transmission(const RgbImage& radiance, const ScalarMap& t,
                                                           const AtmosphericLight& A) {
  require_same_shape(radiance, "radiance", t, "transmission");
  RgbImage out(radiance.width(), radiance.height());
  for (std::size_t i = 0; i < out.size(); ++i) {
    for (int c = 0; c < 3; ++c) {
      out[i][c] = std::clamp(radiance[i][c] * t[i] + A[c] * (1.0 - t[i]), 0.0, 1.0);
    }
  }
  return out;
}

[[nodiscard]] inline RgbImage apply_haze(const RgbImage& radiance, const DepthMap& depth,
                                         const Atmosphere& atm) {
  require_same_shape(radiance, "radiance", depth.distance, "depth");
  return apply_haze_with_transmission(radiance, transmission_from_depth(depth, atm.beta), atm.airlight);
}

/// Per-pixel choice between two renders: `where` true picks `a`.
[[nodiscard]] inline RgbImage composite(const RgbImage& a, const RgbImage& b, const BitMask& where) {
  require_same_shape(a, "first image", b, "second image");
  require_same_shape(a, "image", where, "mask");
  RgbImage out = b;
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (where[i]) out[i] = a[i];
  }
  return out;
}

// ---------------------------------------------------------------------------
// Scene description

struct FlatTerrain {
  double height = 0.0;
};

/// Inclined plane z = base + slope * ((x, y) - anchor) . dir(heading).
struct RampTerrain {
  double base = 0.0;
  double slope = 0.0;
  double heading_deg = 180.0;  // direction of steepest ascent, clockwise from north
  double anchor_x = 0.0;
  double anchor_y = 0.0;
};

struct Box {
  double x = 0.0;  // south-west corner
  double y = 0.0;
  double w = 0.0;  // extent along x
  double d = 0.0;  // extent along y
  double height = 0.0;
};

struct BoxesTerrain {
  double ground = 0.0;
  std::vector<Box> boxes;
};

using TerrainKind = std::variant<FlatTerrain, RampTerrain, BoxesTerrain>;

struct CheckerTexture {
  double period = 5.0;  // meters
  Rgb color_a{0.9, 0.9, 0.9};
  Rgb color_b{0.05, 0.05, 0.05};
};

struct RandomTexture {
  std::uint64_t seed = 1;
  double texel = 5.0;  // meters
};

using TextureKind = std::variant<CheckerTexture, RandomTexture>;

struct SceneSpec {
  TerrainKind terrain = FlatTerrain{};
  GridSpec grid{400, 400, -2000.0, -4000.0, 10.0};
  CameraPose camera;  // principal point is reset to the image center
  int image_width = 320;
  int image_height = 240;
  TextureKind texture = CheckerTexture{};
  bool ensure_dark_pixels = true;
  Rgb sky{0.85, 0.9, 1.0};
  double max_range = 16000.0;

  void validate() const {
    if (image_width <= 0 || image_height <= 0) throw InvalidArgument("scene image size must be positive");
    if (grid.ncols < 2 || grid.nrows < 2 || !(grid.cell_size > 0.0)) {
      throw InvalidArgument("scene grid needs at least 2x2 cells and a positive cell size");
    }
    if (!(camera.f > 0.0)) throw InvalidArgument("scene focal length must be > 0");
    if (!(max_range > 0.0)) throw InvalidArgument("scene max_range must be > 0");
    if (const auto* checker = std::get_if<CheckerTexture>(&texture)) {
      if (!(checker->period > 0.0)) throw InvalidArgument("checker period must be > 0");
      for (const Rgb& c : {checker->color_a, checker->color_b}) {
        for (int k = 0; k < 3; ++k) {
          if (!(c[k] >= 0.0 && c[k] <= 1.0)) throw InvalidArgument("texture colors must lie in [0, 1]");
        }
      }
      if (ensure_dark_pixels &&
          std::min(checker->color_a.min_channel(), checker->color_b.min_channel()) > 0.1) {
        throw InvalidArgument("dark pixels requested but no checker color has a channel <= 0.1");
      }
    } else if (const auto* random = std::get_if<RandomTexture>(&texture)) {
      if (!(random->texel > 0.0)) throw InvalidArgument("random texel size must be > 0");
    }
  }
};

struct Scene {
  RgbImage radiance;
  HeightGrid grid;
  CameraPose pose;
  DepthMap true_depth;
};

namespace detail {

[[nodiscard]] inline Vec3 horizontal_dir(double heading_deg) {
  return rotation::heading_pitch_direction(heading_deg, 0.0);
}

[[nodiscard]] inline double terrain_height(const TerrainKind& kind, double x, double y) {
  return std::visit(
      [&](const auto& t) -> double {
        using T = std::decay_t<decltype(t)>;
        if constexpr (std::is_same_v<T, FlatTerrain>) {
          return t.height;
        } else if constexpr (std::is_same_v<T, RampTerrain>) {
          const Vec3 dir = horizontal_dir(t.heading_deg);
          return t.base + t.slope * ((x - t.anchor_x) * dir.x() + (y - t.anchor_y) * dir.y());
        } else {
          double h = t.ground;
          for (const Box& b : t.boxes) {
            if (x >= b.x && x <= b.x + b.w && y >= b.y && y <= b.y + b.d) h = std::max(h, t.ground + b.height);
          }
          return h;
        }
      },
      kind);
}

// Ray/plane intersection for planar terrain kinds; nullopt for boxes.
[[nodiscard]] inline std::optional<std::optional<double>> analytic_hit(const TerrainKind& kind,
                                                                       const Ray& ray) {
  Vec3 normal;
  double offset = 0.0;  // plane: normal . p = offset
  if (const auto* flat = std::get_if<FlatTerrain>(&kind)) {
    normal = Vec3::UnitZ();
    offset = flat->height;
  } else if (const auto* ramp = std::get_if<RampTerrain>(&kind)) {
    const Vec3 dir = horizontal_dir(ramp->heading_deg);
    // z - slope * (dir . p_xy) = base - slope * (dir . anchor)
    normal = Vec3(-ramp->slope * dir.x(), -ramp->slope * dir.y(), 1.0);
    offset = ramp->base - ramp->slope * (dir.x() * ramp->anchor_x + dir.y() * ramp->anchor_y);
  } else {
    return std::nullopt;
  }
  const double denom = normal.dot(ray.direction);
  const double above = normal.dot(ray.origin) - offset;
  if (!(denom < 0.0) || !(above > 0.0)) return std::make_optional(std::optional<double>{});
  return std::make_optional(std::optional<double>{-above / denom});
}

[[nodiscard]] inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

[[nodiscard]] inline double unit_from_bits(std::uint64_t bits) {
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

[[nodiscard]] inline Rgb texture_color(const TextureKind& texture, bool ensure_dark, const Vec3& p) {
  if (const auto* checker = std::get_if<CheckerTexture>(&texture)) {
    const auto cell = [&](double v) { return static_cast<long long>(std::floor(v / checker->period)); };
    const long long parity = (cell(p.x()) + cell(p.y()) + cell(p.z())) & 1LL;
    return parity == 0 ? checker->color_a : checker->color_b;
  }
  const auto& random = std::get<RandomTexture>(texture);
  const auto ix = static_cast<std::int64_t>(std::floor(p.x() / random.texel));
  const auto iy = static_cast<std::int64_t>(std::floor(p.y() / random.texel));
  const auto iz = static_cast<std::int64_t>(std::floor(p.z() / random.texel));
  std::uint64_t h = splitmix64(random.seed);
  h = splitmix64(h ^ static_cast<std::uint64_t>(ix));
  h = splitmix64(h ^ static_cast<std::uint64_t>(iy));
  h = splitmix64(h ^ static_cast<std::uint64_t>(iz));
  Rgb c{unit_from_bits(splitmix64(h + 1)), unit_from_bits(splitmix64(h + 2)),
        unit_from_bits(splitmix64(h + 3))};
  if (ensure_dark && ((ix + iy + iz) & 1) == 0) {
    const int channel = static_cast<int>(splitmix64(h + 4) % 3);
    c[channel] = 0.05 * unit_from_bits(splitmix64(h + 5));
  }
  return c;
}

}  // namespace detail

[[nodiscard]] inline HeightGrid make_terrain_grid(const TerrainKind& kind, const GridSpec& spec) {
  HeightGrid grid(spec, 0.0);
  for (int row = 0; row < grid.nrows; ++row) {
    for (int col = 0; col < grid.ncols; ++col) {
      grid.at(col, row) = detail::terrain_height(kind, grid.center_x(col), grid.center_y(row));
    }
  }
  return grid;
}

/// Builds the grid, renders radiance by texturing each pixel's terrain hit,
/// and records the true slant depth. Planar terrain uses the exact ray/plane
/// solution (limited to the grid extent); boxes use fine-step ray casting.
[[nodiscard]] inline Scene make_test_scene(const SceneSpec& spec) {
  spec.validate();
  Scene scene;
  scene.grid = make_terrain_grid(spec.terrain, spec.grid);
  scene.pose = spec.camera;
  scene.pose.center_principal_point(spec.image_width, spec.image_height);
  if (auto ground = sample_height(scene.grid, scene.pose.x0, scene.pose.y0);
      ground && *ground >= scene.pose.z0) {
    throw InvalidArgument("scene camera is inside the terrain");
  }

  RayCastOptions fine;
  fine.max_range = spec.max_range;
  fine.coarse_step = scene.grid.cell_size / 20.0;
  fine.refine_iters = 40;
  const double max_height = scene.grid.max_height();

  scene.radiance = RgbImage(spec.image_width, spec.image_height, spec.sky);
  scene.true_depth = DepthMap(spec.image_width, spec.image_height);
  for (int y = 0; y < spec.image_height; ++y) {
    for (int x = 0; x < spec.image_width; ++x) {
      const Ray ray = pixel_ray(scene.pose, x, y);
      std::optional<double> hit;
      if (auto analytic = detail::analytic_hit(spec.terrain, ray)) {
        hit = *analytic;
        if (hit) {
          const Vec3 p = ray.at(*hit);
          if (*hit > spec.max_range || !scene.grid.in_extent(p.x(), p.y())) hit.reset();
        }
      } else {
        hit = cast_ray(scene.grid, ray, fine, max_height);
      }
      if (!hit) continue;
      scene.true_depth.distance(x, y) = *hit;
      scene.radiance(x, y) = detail::texture_color(spec.texture, spec.ensure_dark_pixels, ray.at(*hit));
    }
  }
  scene.true_depth.update_horizon();
  return scene;
}

/// Control points at randomly chosen pixels with a valid true depth. World
/// coordinates are the exact hit points, so the scene pose reprojects them
/// with zero residual.
[[nodiscard]] inline GcpSet synthesize_gcps(const Scene& scene, int count, std::uint64_t seed) {
  std::vector<std::pair<int, int>> candidates;
  for (int y = 0; y < scene.true_depth.height(); ++y) {
    for (int x = 0; x < scene.true_depth.width(); ++x) {
      if (scene.true_depth.valid(x, y)) candidates.emplace_back(x, y);
    }
  }
  if (candidates.size() < static_cast<std::size_t>(count)) {
    throw InvalidArgument("scene has fewer terrain pixels than requested control points");
  }
  std::mt19937_64 rng(seed);
  GcpSet gcps;
  for (int i = 0; i < count; ++i) {
    std::uniform_int_distribution<std::size_t> pick(static_cast<std::size_t>(i), candidates.size() - 1);
    std::swap(candidates[static_cast<std::size_t>(i)], candidates[pick(rng)]);
    const auto [x, y] = candidates[static_cast<std::size_t>(i)];
    const Vec3 world = pixel_ray(scene.pose, x, y).at(scene.true_depth(x, y));
    gcps.push_back(Gcp{"P" + std::to_string(i + 1), world, project(scene.pose, world)});
  }
  return gcps;
}

}  // namespace airvis
