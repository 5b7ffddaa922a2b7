#pragma once

// Single-image transmission estimation with the dark channel prior, refined
// by a color-guided filter.
//
// Haze model: I = J * t + A * (1 - t), with t = exp(-beta * d) in a
// homogeneous atmosphere. Every window below is a (2r+1)^2 square clipped to
// the image; no padding values are invented at the borders.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <vector>

#include "airvis/error.hpp"
#include "airvis/pixmap.hpp"

namespace airvis {

struct AtmosphericLight {
  double r = 1.0;
  double g = 1.0;
  double b = 1.0;

  [[nodiscard]] Rgb rgb() const noexcept { return {r, g, b}; }
  [[nodiscard]] double operator[](int c) const noexcept { return c == 0 ? r : (c == 1 ? g : b); }

  friend bool operator==(const AtmosphericLight&, const AtmosphericLight&) = default;
};

struct DehazeParams {
  int patch_radius = 7;  // 15x15 dark-channel window
  double omega = 0.95;
  int guided_radius = 30;
  double guided_eps = 1e-4;
  double bright_fraction = 0.001;

  void validate() const {
    if (patch_radius < 0) throw InvalidArgument("patch_radius must be >= 0");
    if (!(omega > 0.0 && omega <= 1.0)) throw InvalidArgument("omega must lie in (0, 1]");
    if (guided_radius < 0) throw InvalidArgument("guided_radius must be >= 0");
    if (!(guided_eps > 0.0)) throw InvalidArgument("guided_eps must be > 0");
    if (!(bright_fraction > 0.0 && bright_fraction <= 1.0)) {
      throw InvalidArgument("bright_fraction must lie in (0, 1]");
    }
  }
};

/// Lower bound applied to every atmospheric-light channel.
inline constexpr double kAtmosphericLightFloor = 0.05;

/// Windowed minimum with border clipping, computed separably (rows, then
/// columns). Exact: min is order independent.
[[nodiscard]] inline ScalarMap min_filter(const ScalarMap& in, int radius) {
  if (radius < 0) throw InvalidArgument("window radius must be >= 0");
  if (radius == 0) return in;
  const int w = in.width();
  const int h = in.height();
  ScalarMap rows(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double m = in(x, y);
      const int x1 = std::min(w - 1, x + radius);
      for (int k = std::max(0, x - radius); k <= x1; ++k) m = std::min(m, in(k, y));
      rows(x, y) = m;
    }
  }
  ScalarMap out(w, h);
  for (int y = 0; y < h; ++y) {
    const int y0 = std::max(0, y - radius);
    const int y1 = std::min(h - 1, y + radius);
    for (int x = 0; x < w; ++x) {
      double m = rows(x, y0);
      for (int k = y0 + 1; k <= y1; ++k) m = std::min(m, rows(x, k));
      out(x, y) = m;
    }
  }
  return out;
}

[[nodiscard]] inline ScalarMap dark_channel(const RgbImage& img, int patch_radius) {
  ScalarMap channel_min(img.width(), img.height());
  for (std::size_t i = 0; i < img.size(); ++i) channel_min[i] = img[i].min_channel();
  return min_filter(channel_min, patch_radius);
}

/// Picks A among the ceil(bright_fraction * N) pixels with the largest dark
/// channel: the candidate with the largest channel sum wins. Both rankings
/// break ties by row-major order. Each channel is clamped to
/// [kAtmosphericLightFloor, 1].
[[nodiscard]] inline AtmosphericLight estimate_atmospheric_light(const RgbImage& img,
                                                                 const ScalarMap& dark,
                                                                 double bright_fraction) {
  require_same_shape(img, "image", dark, "dark channel");
  if (!(bright_fraction > 0.0 && bright_fraction <= 1.0)) {
    throw InvalidArgument("bright_fraction must lie in (0, 1]");
  }
  const std::size_t n = img.size();
  std::size_t count = static_cast<std::size_t>(std::ceil(bright_fraction * static_cast<double>(n) - 1e-9));
  count = std::clamp<std::size_t>(count, 1, n);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto brighter = [&dark](std::size_t a, std::size_t b) {
    if (dark[a] != dark[b]) return dark[a] > dark[b];
    return a < b;
  };
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(count), order.end(),
                    brighter);

  std::size_t best = order[0];
  for (std::size_t k = 1; k < count; ++k) {
    const std::size_t i = order[k];
    const double s = img[i].sum();
    const double sb = img[best].sum();
    if (s > sb || (s == sb && i < best)) best = i;
  }
  const Rgb a = img[best];
  const auto clamp = [](double v) { return std::clamp(v, kAtmosphericLightFloor, 1.0); };
  return AtmosphericLight{clamp(a.r), clamp(a.g), clamp(a.b)};
}

/// Coarse transmission t = 1 - omega * min_window min_c min(I^c / A^c, 1).
/// Output lies in [1 - omega, 1].
[[nodiscard]] inline ScalarMap estimate_transmission(const RgbImage& img, const AtmosphericLight& A,
                                                     const DehazeParams& params) {
  params.validate();
  if (!(A.r > 0.0 && A.g > 0.0 && A.b > 0.0)) {
    throw InvalidArgument("atmospheric light components must be > 0");
  }
  ScalarMap normalized(img.width(), img.height());
  for (std::size_t i = 0; i < img.size(); ++i) {
    const Rgb& p = img[i];
    normalized[i] = std::min({p.r / A.r, p.g / A.g, p.b / A.b, 1.0});
  }
  ScalarMap t = min_filter(normalized, params.patch_radius);
  for (double& v : t.values()) v = 1.0 - params.omega * v;
  return t;
}

/// Mean over the border-clipped (2r+1)^2 window, via a summed-area table.
class BoxMean {
 public:
  BoxMean(int width, int height, int radius) : width_(width), height_(height), radius_(radius) {
    if (radius < 0) throw InvalidArgument("window radius must be >= 0");
    sat_.assign(static_cast<std::size_t>(width + 1) * static_cast<std::size_t>(height + 1), 0.0);
  }

  template <typename Fn>
  [[nodiscard]] ScalarMap of(Fn&& value_at) {
    const std::size_t stride = static_cast<std::size_t>(width_) + 1;
    for (int y = 0; y < height_; ++y) {
      double row = 0.0;
      for (int x = 0; x < width_; ++x) {
        row += value_at(static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
                        static_cast<std::size_t>(x));
        sat_[(static_cast<std::size_t>(y) + 1) * stride + static_cast<std::size_t>(x) + 1] =
            sat_[static_cast<std::size_t>(y) * stride + static_cast<std::size_t>(x) + 1] + row;
      }
    }
    ScalarMap out(width_, height_);
    for (int y = 0; y < height_; ++y) {
      const std::size_t y0 = static_cast<std::size_t>(std::max(0, y - radius_));
      const std::size_t y1 = static_cast<std::size_t>(std::min(height_ - 1, y + radius_)) + 1;
      for (int x = 0; x < width_; ++x) {
        const std::size_t x0 = static_cast<std::size_t>(std::max(0, x - radius_));
        const std::size_t x1 = static_cast<std::size_t>(std::min(width_ - 1, x + radius_)) + 1;
        const double sum = sat_[y1 * stride + x1] - sat_[y0 * stride + x1] -
                           sat_[y1 * stride + x0] + sat_[y0 * stride + x0];
        out(x, y) = sum / static_cast<double>((y1 - y0) * (x1 - x0));
      }
    }
    return out;
  }

  [[nodiscard]] ScalarMap operator()(const ScalarMap& in) {
    return of([&in](std::size_t i) { return in[i]; });
  }

 private:
  int width_;
  int height_;
  int radius_;
  std::vector<double> sat_;
};

[[nodiscard]] inline ScalarMap box_mean(const ScalarMap& in, int radius) {
  BoxMean box(in.width(), in.height(), radius);
  return box(in);
}

/// Color-guided filter. Per window k the input is modelled as
/// q = a_k . I + b_k with a_k = (Sigma_k + eps Id)^-1 cov_k(I, p) and
/// b_k = mean_k(p) - a_k . mean_k(I); the output averages the models of all
/// windows covering each pixel.
[[nodiscard]] inline ScalarMap guided_filter(const RgbImage& guide, const ScalarMap& input, int radius,
                                             double eps) {
  require_same_shape(guide, "guide", input, "input");
  if (!(eps > 0.0)) throw InvalidArgument("guided filter eps must be > 0");
  const int w = guide.width();
  const int h = guide.height();
  BoxMean box(w, h, radius);

  const ScalarMap mean_r = box.of([&](std::size_t i) { return guide[i].r; });
  const ScalarMap mean_g = box.of([&](std::size_t i) { return guide[i].g; });
  const ScalarMap mean_b = box.of([&](std::size_t i) { return guide[i].b; });
  const ScalarMap mean_p = box(input);
  const ScalarMap mean_rp = box.of([&](std::size_t i) { return guide[i].r * input[i]; });
  const ScalarMap mean_gp = box.of([&](std::size_t i) { return guide[i].g * input[i]; });
  const ScalarMap mean_bp = box.of([&](std::size_t i) { return guide[i].b * input[i]; });
  const ScalarMap mean_rr = box.of([&](std::size_t i) { return guide[i].r * guide[i].r; });
  const ScalarMap mean_rg = box.of([&](std::size_t i) { return guide[i].r * guide[i].g; });
  const ScalarMap mean_rb = box.of([&](std::size_t i) { return guide[i].r * guide[i].b; });
  const ScalarMap mean_gg = box.of([&](std::size_t i) { return guide[i].g * guide[i].g; });
  const ScalarMap mean_gb = box.of([&](std::size_t i) { return guide[i].g * guide[i].b; });
  const ScalarMap mean_bb = box.of([&](std::size_t i) { return guide[i].b * guide[i].b; });

  ScalarMap a_r(w, h), a_g(w, h), a_b(w, h), b(w, h);
  for (std::size_t i = 0; i < guide.size(); ++i) {
    const Eigen::Vector3d mu(mean_r[i], mean_g[i], mean_b[i]);
    Eigen::Matrix3d sigma;
    sigma << mean_rr[i], mean_rg[i], mean_rb[i],
             mean_rg[i], mean_gg[i], mean_gb[i],
             mean_rb[i], mean_gb[i], mean_bb[i];
    sigma -= mu * mu.transpose();
    sigma.diagonal().array() += eps;
    const Eigen::Vector3d cov_ip = Eigen::Vector3d(mean_rp[i], mean_gp[i], mean_bp[i]) - mu * mean_p[i];
    const Eigen::Vector3d a = sigma.ldlt().solve(cov_ip);
    a_r[i] = a.x();
    a_g[i] = a.y();
    a_b[i] = a.z();
    b[i] = mean_p[i] - a.dot(mu);
  }

  const ScalarMap mean_ar = box(a_r);
  const ScalarMap mean_ag = box(a_g);
  const ScalarMap mean_ab = box(a_b);
  const ScalarMap mean_bias = box(b);
  ScalarMap out(w, h);
  for (std::size_t i = 0; i < guide.size(); ++i) {
    out[i] = mean_ar[i] * guide[i].r + mean_ag[i] * guide[i].g + mean_ab[i] * guide[i].b + mean_bias[i];
  }
  return out;
}

/// Guided-filter refinement of a coarse transmission map, clamped to [0, 1].
[[nodiscard]] inline ScalarMap refine_transmission(const RgbImage& img, const ScalarMap& coarse,
                                                   const DehazeParams& params) {
  params.validate();
  ScalarMap refined = guided_filter(img, coarse, params.guided_radius, params.guided_eps);
  for (double& v : refined.values()) v = std::clamp(v, 0.0, 1.0);
  return refined;
}

/// Inverts the haze model: J = (I - A) / max(t, t_floor) + A, clamped to [0, 1].
[[nodiscard]] inline RgbImage recover_radiance(const RgbImage& img, const AtmosphericLight& A,
                                               const ScalarMap& t, double t_floor = 0.1) {
  require_same_shape(img, "image", t, "transmission");
  if (!(t_floor > 0.0)) throw InvalidArgument("t_floor must be > 0");
  RgbImage out(img.width(), img.height());
  for (std::size_t i = 0; i < img.size(); ++i) {
    const double tt = std::max(t[i], t_floor);
    for (int c = 0; c < 3; ++c) {
      out[i][c] = std::clamp((img[i][c] - A[c]) / tt + A[c], 0.0, 1.0);
    }
  }
  return out;
}

/// Output of the full transmission stage.
struct TransmissionResult {
  ScalarMap dark;
  AtmosphericLight airlight;
  ScalarMap coarse;
  ScalarMap refined;
};

[[nodiscard]] inline TransmissionResult compute_transmission(const RgbImage& img,
                                                             const DehazeParams& params) {
  params.validate();
  TransmissionResult result;
  result.dark = dark_channel(img, params.patch_radius);
  result.airlight = estimate_atmospheric_light(img, result.dark, params.bright_fraction);
  result.coarse = estimate_transmission(img, result.airlight, params);
  result.refined = refine_transmission(img, result.coarse, params);
  return result;
}

}  // namespace airvis
