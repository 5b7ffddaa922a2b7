#pragma once

// Pinhole camera with photogrammetric exterior orientation and space
// resection from ground control points.
//
// Conventions
//   World frame: local metric x east, y north, z up (same as HeightGrid).
//   Rotation:    R = Rz(kappa) * Ry(phi) * Rx(omega), with the elementary
//                matrices being active right-handed rotations. R maps a world
//                offset (P - C) into the camera frame.
//   Camera:      u right, v down, w forward (along the optical axis).
//   Pixels:      px = cx + f * u / w, py = cy + f * v / w; pixel centers sit
//                on integer coordinates, row 0 at the top.
//
// With all three angles zero the camera looks straight up (w = +z).
// A horizontal camera looking south is omega = -pi/2, phi = 0, kappa = pi.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <optional>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "airvis/error.hpp"
#include "airvis/terrain.hpp"

namespace airvis {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

struct PixelCoord {
  double x = 0.0;
  double y = 0.0;
};

struct Ray {
  Vec3 origin = Vec3::Zero();
  Vec3 direction = Vec3::UnitZ();  // unit length

  [[nodiscard]] Vec3 at(double s) const { return origin + s * direction; }
};

namespace rotation {

[[nodiscard]] inline Mat3 rx(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Mat3 m;
  m << 1, 0, 0, 0, c, -s, 0, s, c;
  return m;
}
[[nodiscard]] inline Mat3 ry(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Mat3 m;
  m << c, 0, s, 0, 1, 0, -s, 0, c;
  return m;
}
[[nodiscard]] inline Mat3 rz(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Mat3 m;
  m << c, -s, 0, s, c, 0, 0, 0, 1;
  return m;
}
// Derivatives of the elementary rotations with respect to their angle.
[[nodiscard]] inline Mat3 drx(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Mat3 m;
  m << 0, 0, 0, 0, -s, -c, 0, c, -s;
  return m;
}
[[nodiscard]] inline Mat3 dry(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Mat3 m;
  m << -s, 0, c, 0, 0, 0, -c, 0, -s;
  return m;
}
[[nodiscard]] inline Mat3 drz(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Mat3 m;
  m << -s, -c, 0, c, -s, 0, 0, 0, 0;
  return m;
}

[[nodiscard]] inline Mat3 from_angles(double omega, double phi, double kappa) {
  return rz(kappa) * ry(phi) * rx(omega);
}

struct Angles {
  double omega = 0.0;
  double phi = 0.0;
  double kappa = 0.0;
};

/// Inverse of from_angles for a proper rotation (phi in [-pi/2, pi/2]).
[[nodiscard]] inline Angles to_angles(const Mat3& r) {
  Angles a;
  a.phi = std::asin(std::clamp(-r(2, 0), -1.0, 1.0));
  if (std::abs(r(2, 0)) < 1.0 - 1e-12) {
    a.omega = std::atan2(r(2, 1), r(2, 2));
    a.kappa = std::atan2(r(1, 0), r(0, 0));
  } else {
    // Gimbal lock: only omega - kappa (or omega + kappa) is determined.
    a.kappa = 0.0;
    a.omega = std::atan2(-r(1, 2), r(1, 1));
  }
  return a;
}

/// Rotation whose camera w axis points along `forward` with v (image down)
/// aligned with world down. A vertical `forward` uses north as image-up.
[[nodiscard]] inline Mat3 look_along(const Vec3& forward) {
  const Vec3 w = forward.normalized();
  Vec3 up = Vec3::UnitZ();
  if (w.cross(up).norm() < 1e-9) up = Vec3::UnitY();
  const Vec3 u = w.cross(up).normalized();
  const Vec3 v = w.cross(u);
  Mat3 r;
  r.row(0) = u.transpose();
  r.row(1) = v.transpose();
  r.row(2) = w.transpose();
  return r;
}

/// Forward direction for a compass heading (degrees clockwise from north)
/// and pitch (degrees, negative looks down).
[[nodiscard]] inline Vec3 heading_pitch_direction(double heading_deg, double pitch_deg) {
  const double h = heading_deg * std::numbers::pi / 180.0;
  const double p = pitch_deg * std::numbers::pi / 180.0;
  return Vec3(std::sin(h) * std::cos(p), std::cos(h) * std::cos(p), std::sin(p));
}

}  // namespace rotation

struct CameraPose {
  double x0 = 0.0;
  double y0 = 0.0;
  double z0 = 0.0;
  double omega = 0.0;  // rotation angles, radians
  double phi = 0.0;
  double kappa = 0.0;
  double f = 1000.0;  // focal length, pixels
  double cx = 0.0;    // principal point, pixels
  double cy = 0.0;

  [[nodiscard]] Vec3 center() const { return Vec3(x0, y0, z0); }
  [[nodiscard]] Mat3 rotation() const { return rotation::from_angles(omega, phi, kappa); }

  /// Principal point at the center of a width x height image.
  void center_principal_point(int width, int height) {
    cx = 0.5 * (width - 1);
    cy = 0.5 * (height - 1);
  }

  /// Pose at `center` looking along a compass heading and pitch.
  [[nodiscard]] static CameraPose looking(const Vec3& center, double heading_deg, double pitch_deg,
                                          double focal, int width, int height) {
    CameraPose pose;
    pose.x0 = center.x();
    pose.y0 = center.y();
    pose.z0 = center.z();
    const auto a = rotation::to_angles(
        rotation::look_along(rotation::heading_pitch_direction(heading_deg, pitch_deg)));
    pose.omega = a.omega;
    pose.phi = a.phi;
    pose.kappa = a.kappa;
    pose.f = focal;
    pose.center_principal_point(width, height);
    return pose;
  }
};

/// Minimum forward distance (meters) for a point to count as in front of the camera.
inline constexpr double kMinForward = 1e-9;

[[nodiscard]] inline std::optional<PixelCoord> try_project(const CameraPose& pose, const Vec3& p) {
  const Vec3 c = pose.rotation() * (p - pose.center());
  if (!(c.z() > kMinForward)) return std::nullopt;
  return PixelCoord{pose.cx + pose.f * c.x() / c.z(), pose.cy + pose.f * c.y() / c.z()};
}

/// Projects a world point; throws BehindCamera when it is not in front.
[[nodiscard]] inline PixelCoord project(const CameraPose& pose, const Vec3& p) {
  if (auto px = try_project(pose, p)) return *px;
  throw BehindCamera("point is at or behind the camera projection plane");
}

[[nodiscard]] inline Ray pixel_ray(const CameraPose& pose, double px, double py) {
  if (!(pose.f > 0.0)) throw InvalidArgument("focal length must be > 0");
  const Vec3 cam = Vec3(px - pose.cx, py - pose.cy, pose.f).normalized();
  return Ray{pose.center(), pose.rotation().transpose() * cam};
}

// ---------------------------------------------------------------------------
// Ground control points

struct Gcp {
  std::string id;
  Vec3 world = Vec3::Zero();
  PixelCoord pixel;
};

using GcpSet = std::vector<Gcp>;

[[nodiscard]] inline GcpSet parse_gcps(std::istream& in, const std::string& name = "<gcps>") {
  GcpSet gcps;
  std::set<std::string> ids;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream tokens(line);
    std::vector<std::string> fields;
    for (std::string t; tokens >> t;) fields.push_back(t);
    if (fields.empty()) continue;
    const std::string where = name + ":" + std::to_string(line_no) + ": ";
    if (fields.size() != 6) throw ParseError(where + "expected 'id X Y Z px py'");
    double v[5];
    for (int i = 0; i < 5; ++i) {
      auto parsed = detail::parse_double(fields[static_cast<std::size_t>(i) + 1]);
      if (!parsed) throw ParseError(where + "'" + fields[static_cast<std::size_t>(i) + 1] + "' is not a number");
      v[i] = *parsed;
    }
    if (!ids.insert(fields[0]).second) throw ParseError(where + "duplicate GCP id '" + fields[0] + "'");
    gcps.push_back(Gcp{fields[0], Vec3(v[0], v[1], v[2]), PixelCoord{v[3], v[4]}});
  }
  return gcps;
}

[[nodiscard]] inline GcpSet load_gcps(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open GCP file '" + path + "'");
  return parse_gcps(in, path);
}

inline void save_gcps(const GcpSet& gcps, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write GCP file '" + path + "'");
  out << "# id X Y Z px py\n";
  for (const Gcp& g : gcps) {
    out << g.id << ' ' << detail::format_double(g.world.x()) << ' '
        << detail::format_double(g.world.y()) << ' ' << detail::format_double(g.world.z()) << ' '
        << detail::format_double(g.pixel.x) << ' ' << detail::format_double(g.pixel.y) << '\n';
  }
  if (!out) throw IoError("failed writing GCP file '" + path + "'");
}

// ---------------------------------------------------------------------------
// Pose file: key=value lines (x0 y0 z0 omega phi kappa f cx cy rmse)

inline void write_pose(std::ostream& out, const CameraPose& pose, double rmse) {
  out << "# exterior orientation; angles in radians, R = Rz(kappa) Ry(phi) Rx(omega)\n"
      << "x0=" << detail::format_double(pose.x0) << "\n"
      << "y0=" << detail::format_double(pose.y0) << "\n"
      << "z0=" << detail::format_double(pose.z0) << "\n"
      << "omega=" << detail::format_double(pose.omega) << "\n"
      << "phi=" << detail::format_double(pose.phi) << "\n"
      << "kappa=" << detail::format_double(pose.kappa) << "\n"
      << "f=" << detail::format_double(pose.f) << "\n"
      << "cx=" << detail::format_double(pose.cx) << "\n"
      << "cy=" << detail::format_double(pose.cy) << "\n"
      << "rmse=" << detail::format_double(rmse) << "\n";
}

inline void save_pose(const CameraPose& pose, double rmse, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write pose file '" + path + "'");
  write_pose(out, pose, rmse);
  if (!out) throw IoError("failed writing pose file '" + path + "'");
}

struct PoseFile {
  CameraPose pose;
  double rmse = 0.0;
};

[[nodiscard]] inline PoseFile parse_pose(std::istream& in, const std::string& name = "<pose>") {
  std::map<std::string, double> values;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto eq = line.find('=');
    const std::string where = name + ":" + std::to_string(line_no) + ": ";
    if (eq == std::string::npos) throw ParseError(where + "expected key=value");
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    auto parsed = detail::parse_double(value);
    if (!parsed) throw ParseError(where + "value of '" + key + "' is not a number");
    if (!values.emplace(key, *parsed).second) throw ParseError(where + "duplicate key '" + key + "'");
  }
  auto get = [&](const char* key) {
    auto it = values.find(key);
    if (it == values.end()) throw ParseError(name + ": missing key '" + std::string(key) + "'");
    return it->second;
  };
  PoseFile pf;
  pf.pose.x0 = get("x0");
  pf.pose.y0 = get("y0");
  pf.pose.z0 = get("z0");
  pf.pose.omega = get("omega");
  pf.pose.phi = get("phi");
  pf.pose.kappa = get("kappa");
  pf.pose.f = get("f");
  pf.pose.cx = get("cx");
  pf.pose.cy = get("cy");
  if (values.count("rmse")) pf.rmse = values["rmse"];
  if (!(pf.pose.f > 0.0)) throw ParseError(name + ": focal length must be > 0");
  return pf;
}

[[nodiscard]] inline PoseFile load_pose(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open pose file '" + path + "'");
  return parse_pose(in, path);
}

// ---------------------------------------------------------------------------
// Resection

/// Parameter order used by the resection Jacobian.
enum PoseParam { kX0 = 0, kY0, kZ0, kOmega, kPhi, kKappa, kFocal, kPoseParamCount };

[[nodiscard]] inline std::array<double, kPoseParamCount> pose_params(const CameraPose& p) {
  return {p.x0, p.y0, p.z0, p.omega, p.phi, p.kappa, p.f};
}

inline void set_pose_params(CameraPose& p, std::span<const double> v) {
  p.x0 = v[kX0];
  p.y0 = v[kY0];
  p.z0 = v[kZ0];
  p.omega = v[kOmega];
  p.phi = v[kPhi];
  p.kappa = v[kKappa];
  p.f = v[kFocal];
}

/// Closed-form partial derivatives of (px, py) with respect to the seven pose
/// parameters at world point `p`. Rows: px, py. Throws BehindCamera.
[[nodiscard]] inline Eigen::Matrix<double, 2, kPoseParamCount> projection_jacobian(
    const CameraPose& pose, const Vec3& p) {
  const Mat3 rx = rotation::rx(pose.omega);
  const Mat3 ry = rotation::ry(pose.phi);
  const Mat3 rz = rotation::rz(pose.kappa);
  const Mat3 r = rz * ry * rx;
  const Vec3 d = p - pose.center();
  const Vec3 c = r * d;
  if (!(c.z() > kMinForward)) throw BehindCamera("control point is behind the camera");

  Eigen::Matrix<double, 3, kPoseParamCount> dc;
  dc.block<3, 3>(0, kX0) = -r;
  dc.col(kOmega) = rz * ry * rotation::drx(pose.omega) * d;
  dc.col(kPhi) = rz * rotation::dry(pose.phi) * rx * d;
  dc.col(kKappa) = rotation::drz(pose.kappa) * ry * rx * d;
  dc.col(kFocal).setZero();

  const double w = c.z();
  const double fw2 = pose.f / (w * w);
  Eigen::Matrix<double, 2, kPoseParamCount> j;
  for (int k = 0; k < kPoseParamCount; ++k) {
    j(0, k) = fw2 * (dc(0, k) * w - c.x() * dc(2, k));
    j(1, k) = fw2 * (dc(1, k) * w - c.y() * dc(2, k));
  }
  j(0, kFocal) = c.x() / w;
  j(1, kFocal) = c.y() / w;
  return j;
}

struct ResectOptions {
  bool estimate_f = true;
  int max_iters = 200;
  double tol = 1e-12;             // relative RMSE change that counts as converged
  double initial_damping = 1e-3;
  double max_damping = 1e12;
};

struct ResectResult {
  CameraPose pose;
  double rmse = 0.0;  // pixels, over all 2N residual components
  int iterations = 0;
};

/// Reprojection RMSE (pixels), or nullopt when a point is behind the camera.
[[nodiscard]] inline std::optional<double> reprojection_rmse(const CameraPose& pose, const GcpSet& gcps) {
  if (gcps.empty()) return 0.0;
  double sum = 0.0;
  for (const Gcp& g : gcps) {
    auto px = try_project(pose, g.world);
    if (!px) return std::nullopt;
    const double dx = px->x - g.pixel.x;
    const double dy = px->y - g.pixel.y;
    sum += dx * dx + dy * dy;
  }
  return std::sqrt(sum / (2.0 * static_cast<double>(gcps.size())));
}

[[nodiscard]] inline std::size_t min_gcps(bool estimate_f) { return estimate_f ? 5 : 4; }

/// Levenberg-damped Gauss-Newton on the collinearity residuals.
///
/// The damped normal equations are (J^T J + lambda diag(J^T J)) delta = -J^T r.
/// A step that lowers the RMSE is accepted and lambda shrinks tenfold; any
/// other step is rejected and lambda grows tenfold. Iteration stops when an
/// accepted step changes the RMSE by less than `tol` relatively, when lambda
/// exceeds max_damping (no descent left), or after max_iters trials. Hitting
/// max_damping away from a stationary point and above the rounding floor is
/// reported as divergence.
[[nodiscard]] inline ResectResult resect(const GcpSet& gcps, const CameraPose& initial,
                                         const ResectOptions& options = {}) {
  if (gcps.size() < min_gcps(options.estimate_f)) {
    throw InvalidArgument("insufficient control points: " + std::to_string(gcps.size()) +
                          " given, at least " + std::to_string(min_gcps(options.estimate_f)) +
                          " required");
  }
  {
    std::set<std::string> ids;
    for (const Gcp& g : gcps) {
      if (!ids.insert(g.id).second) throw InvalidArgument("duplicate GCP id '" + g.id + "'");
    }
  }
  if (!(initial.f > 0.0)) throw InvalidArgument("initial focal length must be > 0");

  const int nparams = options.estimate_f ? kPoseParamCount : kPoseParamCount - 1;
  const int nres = 2 * static_cast<int>(gcps.size());

  CameraPose pose = initial;
  auto current = reprojection_rmse(pose, gcps);
  if (!current) throw BehindCamera("a control point lies behind the camera at the initial pose");
  double rmse = *current;

  Eigen::MatrixXd jac(nres, nparams);
  Eigen::VectorXd res(nres);
  auto linearize = [&]() {
    for (std::size_t i = 0; i < gcps.size(); ++i) {
      const auto j = projection_jacobian(pose, gcps[i].world);
      const PixelCoord px = project(pose, gcps[i].world);
      const auto row = static_cast<Eigen::Index>(2 * i);
      jac.row(row) = j.row(0).head(nparams);
      jac.row(row + 1) = j.row(1).head(nparams);
      res(row) = px.x - gcps[i].pixel.x;
      res(row + 1) = px.y - gcps[i].pixel.y;
    }
  };

  linearize();
  {
    // Rank check on the column-normalized Jacobian.
    Eigen::MatrixXd scaled = jac;
    for (int k = 0; k < nparams; ++k) {
      const double n = scaled.col(k).norm();
      if (n > 0.0) scaled.col(k) /= n;
    }
    const Eigen::JacobiSVD<Eigen::MatrixXd> svd(scaled);
    const auto& s = svd.singularValues();
    if (s(s.size() - 1) <= 1e-10 * s(0)) {
      throw NumericError("rank-deficient resection Jacobian: degenerate control point configuration");
    }
  }

  double pixel_scale = 0.0;
  for (const Gcp& g : gcps) pixel_scale = std::max({pixel_scale, std::abs(g.pixel.x), std::abs(g.pixel.y)});

  double lambda = options.initial_damping;
  int iterations = 0;
  bool needs_linearize = false;
  while (iterations < options.max_iters && rmse > 0.0) {
    if (needs_linearize) linearize();
    needs_linearize = false;
    ++iterations;

    const Eigen::MatrixXd jtj = jac.transpose() * jac;
    const Eigen::VectorXd jtr = jac.transpose() * res;
    Eigen::MatrixXd damped = jtj;
    damped.diagonal() += lambda * jtj.diagonal();
    const Eigen::VectorXd delta = damped.ldlt().solve(-jtr);

    auto params = pose_params(pose);
    for (int k = 0; k < nparams; ++k) params[static_cast<std::size_t>(k)] += delta(k);
    CameraPose trial = pose;
    set_pose_params(trial, params);

    const auto trial_rmse = (trial.f > 0.0 && delta.allFinite()) ? reprojection_rmse(trial, gcps)
                                                                 : std::nullopt;
    if (trial_rmse && *trial_rmse < rmse) {
      const double change = (rmse - *trial_rmse) / rmse;
      pose = trial;
      rmse = *trial_rmse;
      lambda = std::max(lambda / 10.0, 1e-15);
      needs_linearize = true;
      if (change < options.tol) break;
    } else {
      lambda *= 10.0;
      if (lambda > options.max_damping) {
        // No descent direction left even for tiny gradient steps: a
        // stationary point, the rounding floor of an exact fit, or a
        // numerically broken problem.
        const double grad = jtr.norm();
        const double scale = jac.norm() * res.norm();
        const bool at_floor = rmse <= 1e-9 * (1.0 + pixel_scale);
        if (!std::isfinite(rmse) || (!at_floor && scale > 0.0 && grad > 1e-6 * scale)) {
          throw NumericError("resection diverged: RMSE does not decrease even at maximum damping");
        }
        break;
      }
    }
  }
  if (!std::isfinite(rmse)) throw NumericError("resection diverged: non-finite RMSE");
  return ResectResult{pose, rmse, iterations};
}

}  // namespace airvis
