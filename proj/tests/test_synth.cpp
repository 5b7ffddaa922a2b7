#include <gtest/gtest.h>

#include <cmath>

#include "airvis/synth.hpp"

using namespace airvis;

namespace {

SceneSpec small_scene() {
  SceneSpec s;
  s.terrain = FlatTerrain{0};
  s.camera = CameraPose::looking(Vec3(0, 0, 20), 180, -6, 400, 64, 48);
  s.image_width = 64;
  s.image_height = 48;
  s.texture = CheckerTexture{2, {0.9, 0.9, 0.9}, {0.02, 0.02, 0.02}};
  return s;
}

}  // namespace

TEST(Haze, ZeroBetaIsIdentity) {
  const Scene s = make_test_scene(small_scene());
  const RgbImage hazy = apply_haze(s.radiance, s.true_depth, Atmosphere{0.0, {0.8, 0.8, 0.8}});
  for (std::size_t i = 0; i < hazy.size(); ++i) {
    if (is_valid(s.true_depth.distance[i])) {
      EXPECT_EQ(hazy[i], s.radiance[i]);
    }
  }
}

TEST(Haze, SkyBecomesAirlight) {
  SceneSpec spec = small_scene();
  spec.camera = CameraPose::looking(Vec3(0, 0, 20), 180, -2, 400, 64, 48);
  const Scene s = make_test_scene(spec);
  const AtmosphericLight A{0.7, 0.75, 0.8};
  const RgbImage hazy = apply_haze(s.radiance, s.true_depth, Atmosphere{0.001, A});
  ASSERT_FALSE(s.true_depth.valid(0, 0));
  EXPECT_EQ(hazy(0, 0), A.rgb());
}

TEST(Haze, SinglePixelValue) {
  DepthMap d(1, 1);
  d.distance(0, 0) = 1000;
  const RgbImage j(1, 1, Rgb{1, 1, 1});
  const RgbImage i = apply_haze(j, d, Atmosphere{0.001, {0.8, 0.8, 0.8}});
  const double expected = std::exp(-1.0) + 0.8 * (1 - std::exp(-1.0));
  EXPECT_NEAR(i(0, 0).r, expected, 1e-12);
  EXPECT_NEAR(i(0, 0).r, 0.87358, 1e-4);
}

TEST(HazeProperty, MonotoneInBetaTowardAirlight) {
  const Scene s = make_test_scene(small_scene());
  const AtmosphericLight A{0.8, 0.8, 0.8};
  RgbImage prev = s.radiance;
  for (double beta : {0.0005, 0.001, 0.002, 0.004}) {
    const RgbImage cur = apply_haze(s.radiance, s.true_depth, Atmosphere{beta, A});
    for (std::size_t i = 0; i < cur.size(); ++i) {
      for (int c = 0; c < 3; ++c) {
        EXPECT_LE(std::abs(cur[i][c] - A[c]), std::abs(prev[i][c] - A[c]) + 1e-15);
      }
    }
    prev = cur;
  }
}

TEST(Scene, FortyFiveDegreeCenterDepth) {
  SceneSpec spec = small_scene();
  spec.image_width = 31;
  spec.image_height = 31;
  spec.camera = CameraPose::looking(Vec3(0, -2000, 100), 180, -45, 300, 31, 31);
  const Scene s = make_test_scene(spec);
  EXPECT_NEAR(s.true_depth(15, 15), 100 * std::sqrt(2.0), 1e-9);
}

TEST(Scene, DepthMatchesRayCast) {
  SceneSpec spec = small_scene();
  spec.terrain = RampTerrain{0, 0.02, 180, 0, 0};
  const Scene s = make_test_scene(spec);
  RayCastOptions opts;
  for (int y = 0; y < s.true_depth.height(); y += 5) {
    for (int x = 0; x < s.true_depth.width(); x += 5) {
      const auto hit = cast_ray(s.grid, pixel_ray(s.pose, x, y), opts);
      if (!s.true_depth.valid(x, y) || !hit) continue;
      EXPECT_NEAR(*hit, s.true_depth(x, y), 0.05 + 1e-4 * *hit) << x << "," << y;
    }
  }
}

TEST(Scene, CheckerLeavesDarkPixelsInMostWindows) {
  SceneSpec spec = small_scene();
  const Scene s = make_test_scene(spec);
  int windows = 0, dark = 0;
  for (int y0 = 0; y0 + 15 <= s.radiance.height(); y0 += 15) {
    for (int x0 = 0; x0 + 15 <= s.radiance.width(); x0 += 15) {
      bool all_ground = true, has_dark = false;
      for (int y = y0; y < y0 + 15; ++y) {
        for (int x = x0; x < x0 + 15; ++x) {
          all_ground = all_ground && s.true_depth.valid(x, y);
          has_dark = has_dark || s.radiance(x, y).min_channel() <= 0.1;
        }
      }
      if (!all_ground) continue;
      ++windows;
      dark += has_dark;
    }
  }
  ASSERT_GT(windows, 0);
  EXPECT_GE(dark * 4, windows);
}

TEST(Scene, RandomTextureIsDeterministic) {
  SceneSpec spec = small_scene();
  spec.texture = RandomTexture{42, 3};
  const Scene a = make_test_scene(spec);
  const Scene b = make_test_scene(spec);
  EXPECT_TRUE(a.radiance == b.radiance);
  spec.texture = RandomTexture{43, 3};
  EXPECT_FALSE(make_test_scene(spec).radiance == a.radiance);
}

TEST(Scene, CameraInsideTerrainThrows) {
  SceneSpec spec = small_scene();
  spec.terrain = FlatTerrain{50};
  EXPECT_THROW((void)make_test_scene(spec), InvalidArgument);
}

TEST(Scene, InvalidSpecs) {
  SceneSpec spec = small_scene();
  spec.image_width = 0;
  EXPECT_THROW((void)make_test_scene(spec), InvalidArgument);
  spec = small_scene();
  spec.texture = CheckerTexture{2, {0.9, 0.9, 0.9}, {0.5, 0.5, 0.5}};
  EXPECT_THROW((void)make_test_scene(spec), InvalidArgument);
}

TEST(Scene, BoxesUseFineCasting) {
  SceneSpec spec = small_scene();
  spec.terrain = BoxesTerrain{0, {Box{-50, -400, 100, 50, 30}}};
  const Scene s = make_test_scene(spec);
  // Some column hits the box face nearer than the flat ground behind it would be.
  const Scene flat = make_test_scene(small_scene());
  bool nearer = false;
  for (std::size_t i = 0; i < s.true_depth.distance.size(); ++i) {
    const double a = s.true_depth.distance[i], b = flat.true_depth.distance[i];
    if (is_valid(a) && (!is_valid(b) || a < b - 1)) nearer = true;
  }
  EXPECT_TRUE(nearer);
}

TEST(Gcps, SynthesizedPointsReprojectExactly) {
  const Scene s = make_test_scene(small_scene());
  const GcpSet g = synthesize_gcps(s, 12, 7);
  ASSERT_EQ(g.size(), 12u);
  EXPECT_LT(*reprojection_rmse(s.pose, g), 1e-9);
  const GcpSet again = synthesize_gcps(s, 12, 7);
  for (std::size_t i = 0; i < g.size(); ++i) EXPECT_EQ(g[i].world, again[i].world);
}
