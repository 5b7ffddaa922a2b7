// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <iterator>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "airvis/airvis.hpp"
#include "airvis/cli.hpp"
#include "oracles.hpp"

using namespace airvis;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double percentile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  const auto k = static_cast<std::size_t>(std::ceil(q * static_cast<double>(v.size())));
  return v[std::clamp<std::size_t>(k, 1, v.size()) - 1];
}

Outcome dark_channel_oracle() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(101);
  int mismatches = 0;
  for (int i = 0; i < 50; ++i) {
    const RgbImage img = oracle::random_image(32, 32, rng);
    for (int r : {0, 1, 3, 7}) {
      const ScalarMap got = dark_channel(img, r);
      const ScalarMap want = oracle::dark_channel(img, r);
      for (std::size_t k = 0; k < got.size(); ++k) mismatches += got[k] != want[k];
    }
  }
  const double secs = seconds_since(t0);
  return {mismatches == 0 && secs < 5.0, fmt("mismatches=%d time=%.3fs", mismatches, secs)};
}

Outcome guided_filter_oracle() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(102);
  double worst = 0.0;
  for (int i = 0; i < 20; ++i) {
    const RgbImage guide = oracle::random_image(16, 16, rng);
    const ScalarMap input = oracle::random_map(16, 16, rng);
    const ScalarMap got = guided_filter(guide, input, 3, 1e-4);
    const ScalarMap want = oracle::guided_filter(guide, input, 3, 1e-4);
    for (std::size_t k = 0; k < got.size(); ++k) worst = std::max(worst, std::abs(got[k] - want[k]));
  }
  const double secs = seconds_since(t0);
  return {worst <= 1e-6 && secs < 5.0, fmt("max_abs=%.3g time=%.3fs", worst, secs)};
}

Outcome transmission_recovery() {
  const auto t0 = std::chrono::steady_clock::now();
  SceneSpec spec;
  spec.terrain = RampTerrain{0.0, 0.02, 180.0, 0.0, -300.0};
  spec.image_width = 640;
  spec.image_height = 480;
  spec.camera = CameraPose::looking(Vec3(0, 0, 30), 180, -3, 1000, 640, 480);
  spec.texture = CheckerTexture{2.0, {0.9, 0.9, 0.9}, {0.02, 0.02, 0.02}};
  spec.max_range = 2000.0;
  const Scene scene = make_test_scene(spec);
  const double beta = 0.002;
  const RgbImage hazy = apply_haze(scene.radiance, scene.true_depth, Atmosphere{beta, {0.8, 0.8, 0.8}});
  DehazeParams params;
  params.omega = 1.0;
  const TransmissionResult t = compute_transmission(hazy, params);

  std::vector<double> err;
  double dmin = 1e300, dmax = 0.0;
  for (std::size_t i = 0; i < hazy.size(); ++i) {
    const double d = scene.true_depth.distance[i];
    if (!is_valid(d)) continue;
    dmin = std::min(dmin, d);
    dmax = std::max(dmax, d);
    err.push_back(std::abs(t.refined[i] - std::exp(-beta * d)));
  }
  const double med = percentile(err, 0.5), p90 = percentile(err, 0.9);
  const double secs = seconds_since(t0);
  return {med <= 0.05 && p90 <= 0.12 && secs < 30.0,
          fmt("median=%.4f p90=%.4f depths=[%.0f,%.0f]m pixels=%zu time=%.2fs", med, p90, dmin, dmax,
              err.size(), secs)};
}

GcpSet resection_gcps(const CameraPose& truth, int n, std::mt19937_64& rng, double sigma) {
  std::uniform_real_distribution<double> ux(0, 639), uy(0, 479), ud(150, 3000);
  std::normal_distribution<double> noise(0.0, sigma > 0 ? sigma : 1.0);
  GcpSet gcps;
  for (int i = 0; i < n; ++i) {
    const Vec3 w = pixel_ray(truth, ux(rng), uy(rng)).at(ud(rng));
    PixelCoord px = project(truth, w);
    if (sigma > 0) {
      px.x += noise(rng);
      px.y += noise(rng);
    }
    gcps.push_back(Gcp{"G" + std::to_string(i), w, px});
  }
  return gcps;
}

CameraPose perturbed(const CameraPose& truth, std::mt19937_64& rng) {
  constexpr double deg = std::numbers::pi / 180.0;
  std::uniform_real_distribution<double> dp(-50, 50), da(-5 * deg, 5 * deg), df(-0.1, 0.1);
  CameraPose p = truth;
  p.x0 += dp(rng);
  p.y0 += dp(rng);
  p.z0 += dp(rng);
  p.omega += da(rng);
  p.phi += da(rng);
  p.kappa += da(rng);
  p.f *= 1.0 + df(rng);
  return p;
}

CameraPose resection_truth(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> hdg(0, 360), pitch(-12, -2), fl(800, 2000);
  return CameraPose::looking(Vec3(0, 0, 120), hdg(rng), pitch(rng), fl(rng), 640, 480);
}

Outcome resection() {
  std::mt19937_64 rng(103);
  int converged = 0;
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const CameraPose truth = resection_truth(rng);
    const GcpSet gcps = resection_gcps(truth, 16, rng, 0.0);
    const CameraPose start = perturbed(truth, rng);
    try {
      const ResectResult r = resect(gcps, start);
      worst = std::max(worst, r.rmse);
      converged += r.rmse < 1e-6;
    } catch (const Error&) {
      worst = std::numeric_limits<double>::infinity();
    }
  }
  double sum = 0.0;
  int noisy_ok = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const CameraPose truth = resection_truth(rng);
    const GcpSet gcps = resection_gcps(truth, 16, rng, 1.0);
    try {
      sum += resect(gcps, perturbed(truth, rng)).rmse;
      ++noisy_ok;
    } catch (const Error&) {
    }
  }
  const double mean = noisy_ok == 20 ? sum / 20.0 : std::numeric_limits<double>::quiet_NaN();
  return {converged == 20 && mean >= 0.6 && mean <= 2.0,
          fmt("noiseless=%d/20 worst_rmse=%.3g noisy_mean_rmse=%.3f", converged, worst, mean)};
}

Outcome ray_casting() {
  std::mt19937_64 rng(104);
  const HeightGrid flat(GridSpec{600, 600, -3000, -3000, 10}, 12.0);
  const RayCastOptions opts;
  std::uniform_real_distribution<double> pos(-500, 500), z(30, 400), hdg(0, 360), pitch(-30, -5), f(500, 2000),
      ux(0, 639), uy(0, 479);
  double worst_rel = 0.0;
  int misses = 0;
  for (int i = 0; i < 100; ++i) {
    const CameraPose pose = CameraPose::looking(Vec3(pos(rng), pos(rng), 12 + z(rng)), hdg(rng), pitch(rng),
                                                f(rng), 640, 480);
    const Ray ray = pixel_ray(pose, ux(rng), uy(rng));
    if (ray.direction.z() >= 0) {
      --i;
      continue;
    }
    const double exact = (12.0 - ray.origin.z()) / ray.direction.z();
    const Vec3 p = ray.at(exact);
    if (!flat.in_extent(p.x(), p.y())) {
      --i;
      continue;
    }
    const auto hit = cast_ray(flat, ray, opts);
    if (!hit) {
      ++misses;
      continue;
    }
    worst_rel = std::max(worst_rel, std::abs(*hit - exact) / exact);
  }

  const BoxesTerrain boxes{0.0, {Box{-150, 150, 100, 80, 40}, Box{60, 300, 120, 60, 90},
                                 Box{-300, 500, 200, 100, 25}}};
  const HeightGrid grid = make_terrain_grid(boxes, GridSpec{120, 120, -600, -100, 10});
  const double bound = opts.step_for(grid) / std::pow(2.0, opts.refine_iters) + 0.02;
  std::uniform_real_distribution<double> bh(-40, 40), bp(-8, 3);
  double worst_box = 0.0;
  int disagreements = 0, box_hits = 0;
  for (int i = 0; i < 100; ++i) {
    const Ray ray{Vec3(0, 0, 20), rotation::heading_pitch_direction(bh(rng), bp(rng))};
    const auto got = cast_ray(grid, ray, opts);
    const auto want = oracle::fine_march(grid, ray, 0.01, opts.max_range);
    if (got.has_value() != want.has_value()) {
      ++disagreements;
      continue;
    }
    if (got) {
      ++box_hits;
      worst_box = std::max(worst_box, std::abs(*got - *want));
    }
  }
  return {misses == 0 && worst_rel <= 1e-3 && disagreements == 0 && worst_box <= bound,
          fmt("flat_worst_rel=%.2g misses=%d box_worst=%.4fm bound=%.4fm box_hits=%d disagreements=%d",
              worst_rel, misses, worst_box, bound, box_hits, disagreements)};
}

Outcome monotone_correction() {
  std::mt19937_64 rng(105);
  std::uniform_real_distribution<double> u(1, 8000), coin(0, 1);
  std::uniform_int_distribution<int> len(1, 120);
  int violations = 0;
  for (int c = 0; c < 1000; ++c) {
    DepthMap d(1, len(rng));
    for (double& v : d.distance.values()) v = coin(rng) < 0.25 ? kInvalid : u(rng);
    d.update_horizon();
    const DepthMap once = correct_depth_map(d);
    const DepthMap twice = correct_depth_map(once);
    double prev = std::numeric_limits<double>::infinity();
    for (int y = 0; y < d.height(); ++y) {
      const double a = once(0, y), b = twice(0, y);
      if (is_valid(a) != d.valid(0, y) || is_valid(a) != is_valid(b)) {
        ++violations;
        continue;
      }
      if (!is_valid(a)) continue;
      if (a != b || a > prev || a > d(0, y)) ++violations;
      prev = a;
    }
  }
  DepthMap pinned(1, 3);
  pinned.distance(0, 0) = 100;
  pinned.distance(0, 1) = 500;
  pinned.distance(0, 2) = 90;
  pinned.update_horizon();
  const DepthMap fixed = correct_depth_map(pinned);
  const bool pinned_ok = fixed(0, 0) == 100 && fixed(0, 1) == 100 && fixed(0, 2) == 90;
  return {violations == 0 && pinned_ok,
          fmt("columns=1000 violations=%d pinned=%s", violations, pinned_ok ? "ok" : "wrong")};
}

// Flat ground seen from 5 m through a long lens, closed by a wall about 2 km out.
SceneSpec end_to_end_scene() {
  SceneSpec spec;
  spec.terrain = BoxesTerrain{0.0, {Box{-400, -2040, 800, 40, 400}}};
  spec.grid = GridSpec{200, 460, -500, -2200, 5};
  spec.image_width = 640;
  spec.image_height = 480;
  spec.camera = CameraPose::looking(Vec3(0, 0, 5), 180, -3, 3200, 640, 480);
  spec.texture = CheckerTexture{2.0, {0.9, 0.9, 0.9}, {0.02, 0.02, 0.02}};
  return spec;
}

Outcome end_to_end() {
  const auto t0 = std::chrono::steady_clock::now();
  const Scene scene = make_test_scene(end_to_end_scene());
  double dmin = 1e300;
  for (double d : scene.true_depth.distance.values()) {
    if (is_valid(d)) dmin = std::min(dmin, d);
  }
  const DepthMap depth = correct_depth_map(build_depth_map(scene.grid, scene.pose, 640, 480, RayCastOptions{}));
  double max_depth = 0.0;
  for (double d : depth.distance.values()) {
    if (is_valid(d)) max_depth = std::max(max_depth, d);
  }
  const VisibilityParams params;  // threshold 0.75, 99th percentile, 10 m bins

  auto visibility_for = [&](double beta) {
    const RgbImage hazy = apply_haze(scene.radiance, scene.true_depth, Atmosphere{beta, {0.8, 0.8, 0.8}});
    const TransmissionResult t = compute_transmission(hazy, DehazeParams{});
    return estimate_visibility(depth, visibility_mask(t.refined, params.threshold), params).visibility;
  };
  const double expected = -std::log(0.75) / 0.001;
  const double hazy_vis = visibility_for(0.001);
  const double clear_vis = visibility_for(0.0);
  const double secs = seconds_since(t0);
  const bool hazy_ok = std::abs(hazy_vis - expected) <= 0.15 * expected;
  const bool clear_ok = std::abs(clear_vis - max_depth) <= params.bin_width;
  return {hazy_ok && clear_ok && secs < 60.0,
          fmt("beta=0.001: %.1fm vs %.1fm (%+.1f%%); beta=0: %.1fm vs max %.1fm; nearest=%.0fm time=%.1fs",
              hazy_vis, expected, 100.0 * (hazy_vis - expected) / expected, clear_vis, max_depth, dmin, secs)};
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Outcome determinism() {
  const fs::path root = fs::temp_directory_path() / "airvis_acceptance_determinism";
  fs::remove_all(root);
  std::ostringstream sink;
  const std::string scene = (root / "scene").string();
  if (run_cli({"airvis", "synth", "--output", scene, "--synth.beta", "0.001", "--synth.gcp_count", "12"}, sink,
              sink) != 0) {
    return {false, "synth failed: " + sink.str()};
  }
  for (const char* run : {"a", "b"}) {
    const std::string out = (root / run).string();
    const int code = run_cli({"airvis", "pipeline", "--image", scene + "/hazy.png", "--dsm", scene + "/dsm.asc",
                              "--gcp", scene + "/gcps.txt", "--orient.z0", "22", "--orient.f", "1200",
                              "--output", out, "--save-intermediates"},
                             sink, sink);
    if (code != 0) return {false, "pipeline failed: " + sink.str()};
  }
  int files = 0, differing = 0;
  for (const auto& entry : fs::directory_iterator(root / "a")) {
    const auto ext = entry.path().extension();
    if (ext != ".pfm" && ext != ".json" && ext != ".png" && ext != ".txt") continue;
    ++files;
    differing += slurp(entry.path()) != slurp(root / "b" / entry.path().filename());
  }
  return {files >= 10 && differing == 0, fmt("files_compared=%d differing=%d", files, differing)};
}

Outcome jacobian_check() {
  std::mt19937_64 rng(106);
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const CameraPose pose = resection_truth(rng);
    for (const Gcp& g : resection_gcps(pose, 4, rng, 0.0)) {
      const auto j = projection_jacobian(pose, g.world);
      const auto base = pose_params(pose);
      for (int k = 0; k < kPoseParamCount; ++k) {
        const double h = (k >= kOmega && k <= kKappa) ? 1e-6 : 1e-4;
        auto plus = base, minus = base;
        plus[static_cast<std::size_t>(k)] += h;
        minus[static_cast<std::size_t>(k)] -= h;
        CameraPose pp = pose, pm = pose;
        set_pose_params(pp, plus);
        set_pose_params(pm, minus);
        const PixelCoord a = project(pp, g.world), b = project(pm, g.world);
        const double fd[2] = {(a.x - b.x) / (2 * h), (a.y - b.y) / (2 * h)};
        for (int row = 0; row < 2; ++row) {
          const double rel = std::abs(j(row, k) - fd[row]) / std::max(1.0, std::abs(fd[row]));
          worst = std::max(worst, rel);
        }
      }
    }
  }
  return {worst <= 1e-6, fmt("poses=20 worst_rel=%.2g", worst)};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"dark_channel_oracle", dark_channel_oracle},
      {"guided_filter_oracle", guided_filter_oracle},
      {"transmission_recovery", transmission_recovery},
      {"resection", resection},
      {"ray_casting", ray_casting},
      {"monotone_correction", monotone_correction},
      {"end_to_end_visibility", end_to_end},
      {"determinism", determinism},
      {"jacobian_check", jacobian_check},
  };
  int failed = 0;
  for (const auto& [name, check] : criteria) {
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail << std::endl;
  }
  std::cout << (failed == 0 ? "all criteria passed" : std::to_string(failed) + " criteria failed") << std::endl;
  return failed == 0 ? 0 : 1;
}
