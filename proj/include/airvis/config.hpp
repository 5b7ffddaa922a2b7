#pragma once

// Flat key=value configuration shared by the command-line tool.
//
//   # comment
//   image = frames/0815.png
//   dehaze.omega = 0.95
//
// Keys are grouped by a section prefix. Every key has a same-named command
// line flag (--dehaze.omega) that overrides the file.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "airvis/camera.hpp"
#include "airvis/dehaze.hpp"
#include "airvis/depth.hpp"
#include "airvis/error.hpp"
#include "airvis/synth.hpp"
#include "airvis/visibility.hpp"

namespace airvis {

/// Bad configuration value or unknown key (usage error).
class ConfigError : public Error {
 public:
  using Error::Error;
};

using ConfigValues = std::map<std::string, std::string>;

namespace detail {

[[nodiscard]] inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace detail

[[nodiscard]] inline ConfigValues parse_config(std::istream& in, const std::string& name = "<config>") {
  ConfigValues values;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const std::string where = name + ":" + std::to_string(line_no) + ": ";
    if (eq == std::string::npos) throw ConfigError(where + "expected key=value");
    const std::string key = detail::trim(line.substr(0, eq));
    if (key.empty()) throw ConfigError(where + "empty key");
    if (!values.emplace(key, detail::trim(line.substr(eq + 1))).second) {
      throw ConfigError(where + "duplicate key '" + key + "'");
    }
  }
  return values;
}

[[nodiscard]] inline ConfigValues load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  return parse_config(in, path);
}

/// Typed accessors over resolved string values.
class ConfigReader {
 public:
  explicit ConfigReader(const ConfigValues& values) : values_(values) {}

  [[nodiscard]] const std::string& str(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError("missing config key '" + key + "'");
    return it->second;
  }

  [[nodiscard]] double num(const std::string& key) const {
    const std::string& s = str(key);
    auto v = detail::parse_double(s);
    if (!v) throw ConfigError("config key '" + key + "' expects a number, got '" + s + "'");
    return *v;
  }

  [[nodiscard]] int integer(const std::string& key) const {
    const double v = num(key);
    if (v != std::floor(v) || v < -2147483648.0 || v > 2147483647.0) {
      throw ConfigError("config key '" + key + "' expects an integer, got '" + str(key) + "'");
    }
    return static_cast<int>(v);
  }

  [[nodiscard]] bool flag(const std::string& key) const {
    const std::string s = detail::lower(str(key));
    if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
    if (s == "false" || s == "0" || s == "no" || s == "off") return false;
    throw ConfigError("config key '" + key + "' expects true/false, got '" + str(key) + "'");
  }

  [[nodiscard]] Rgb color(const std::string& key) const {
    const std::string& s = str(key);
    std::vector<double> parts;
    std::stringstream ss(s);
    for (std::string item; std::getline(ss, item, ',');) {
      auto v = detail::parse_double(detail::trim(item));
      if (!v) throw ConfigError("config key '" + key + "' expects r,g,b, got '" + s + "'");
      parts.push_back(*v);
    }
    if (parts.size() != 3) throw ConfigError("config key '" + key + "' expects r,g,b, got '" + s + "'");
    return Rgb{parts[0], parts[1], parts[2]};
  }

 private:
  const ConfigValues& values_;
};

/// One configurable key with its default and help text.
struct KeySpec {
  const char* key;
  const char* default_value;
  const char* help;
};

// clang-format off
inline const std::vector<KeySpec>& path_keys() {
  static const std::vector<KeySpec> keys = {
      {"image", "", "input RGB image (PNG, 8 or 16 bit)"},
      {"dsm", "", "digital surface model, ESRI ASCII grid (fine grid when dsm_coarse is set)"},
      {"dsm_coarse", "", "optional coarse DSM used where the fine DSM has no data"},
      {"gcp", "", "ground control point file (id X Y Z px py per line)"},
      {"pose", "", "pose file (default <output>/pose.txt)"},
      {"output", "out", "output directory"},
      {"save_intermediates", "false", "also write dark channel, coarse transmission and depth maps"},
  };
  return keys;
}

inline const std::vector<KeySpec>& dehaze_keys() {
  static const std::vector<KeySpec> keys = {
      {"dehaze.patch_radius", "7", "dark channel window radius (15x15 window)"},
      {"dehaze.omega", "0.95", "fraction of haze removed, in (0, 1]"},
      {"dehaze.guided_radius", "30", "guided filter window radius"},
      {"dehaze.guided_eps", "0.0001", "guided filter regularizer"},
      {"dehaze.bright_fraction", "0.001", "fraction of brightest dark-channel pixels searched for the atmospheric light"},
  };
  return keys;
}

inline const std::vector<KeySpec>& raycast_keys() {
  static const std::vector<KeySpec> keys = {
      {"raycast.max_range", "16000", "maximum line-of-sight distance, meters"},
      {"raycast.coarse_step", "0", "ray marching step, meters (0 = half the DSM cell size)"},
      {"raycast.refine_iters", "20", "bisection iterations per intersection"},
  };
  return keys;
}

inline const std::vector<KeySpec>& visibility_keys() {
  static const std::vector<KeySpec> keys = {
      {"visibility.threshold", "0.75", "transmission threshold for visible pixels"},
      {"visibility.method", "percentile", "percentile or max"},
      {"visibility.percentile_rank", "99", "percentile rank in (0, 100]"},
      {"visibility.bin_width", "10", "depth histogram bin width, meters"},
      {"visibility.render_min", "60", "near end of the log depth rendering, meters"},
      {"visibility.render_max", "16000", "far end of the log depth rendering, meters"},
  };
  return keys;
}

inline const std::vector<KeySpec>& orient_keys() {
  static const std::vector<KeySpec> keys = {
      {"orient.x0", "0", "initial camera x, meters"},
      {"orient.y0", "0", "initial camera y, meters"},
      {"orient.z0", "0", "initial camera z, meters"},
      {"orient.heading", "180", "initial viewing heading, degrees clockwise from north (180 = south)"},
      {"orient.pitch", "0", "initial viewing pitch, degrees (negative looks down)"},
      {"orient.f", "1000", "initial focal length, pixels"},
      {"orient.estimate_f", "true", "estimate the focal length"},
      {"orient.max_iters", "200", "maximum resection iterations"},
      {"orient.tol", "1e-12", "relative RMSE change that stops the resection"},
      {"orient.width", "0", "image width when no image is given"},
      {"orient.height", "0", "image height when no image is given"},
  };
  return keys;
}

inline const std::vector<KeySpec>& synth_keys() {
  static const std::vector<KeySpec> keys = {
      {"synth.terrain", "flat", "flat, ramp or boxes"},
      {"synth.ground", "0", "flat height, ramp base height or box ground height, meters"},
      {"synth.slope", "0.05", "ramp slope (rise over run)"},
      {"synth.ramp_heading", "180", "ramp ascent direction, degrees clockwise from north"},
      {"synth.ramp_anchor_x", "0", "x where the ramp has its base height"},
      {"synth.ramp_anchor_y", "0", "y where the ramp has its base height"},
      {"synth.boxes", "", "boxes as x,y,w,d,height;... (south-west corner, size, height)"},
      {"synth.grid_ncols", "400", "DSM columns"},
      {"synth.grid_nrows", "400", "DSM rows"},
      {"synth.grid_origin_x", "-2000", "DSM lower-left x, meters"},
      {"synth.grid_origin_y", "-4000", "DSM lower-left y, meters"},
      {"synth.cell_size", "10", "DSM cell size, meters"},
      {"synth.width", "320", "image width, pixels"},
      {"synth.height", "240", "image height, pixels"},
      {"synth.camera_x", "0", "camera x, meters"},
      {"synth.camera_y", "0", "camera y, meters"},
      {"synth.camera_z", "20", "camera z, meters"},
      {"synth.heading", "180", "viewing heading, degrees clockwise from north"},
      {"synth.pitch", "-6", "viewing pitch, degrees"},
      {"synth.focal", "1250", "focal length, pixels"},
      {"synth.texture", "checker", "checker or random"},
      {"synth.checker_period", "2", "checker period, meters"},
      {"synth.color_a", "0.9,0.9,0.9", "first checker color"},
      {"synth.color_b", "0.02,0.02,0.02", "second checker color"},
      {"synth.seed", "1", "random texture seed"},
      {"synth.texel", "5", "random texture texel size, meters"},
      {"synth.ensure_dark", "true", "guarantee dark texels"},
      {"synth.beta", "0.002", "scattering coefficient, 1/m"},
      {"synth.airlight", "0.8,0.8,0.8", "atmospheric light color"},
      {"synth.max_range", "16000", "maximum scene depth, meters"},
      {"synth.gcp_count", "0", "also write this many exact control points to gcps.txt"},
  };
  return keys;
}
// clang-format on

[[nodiscard]] inline const std::vector<const std::vector<KeySpec>*>& all_key_groups() {
  static const std::vector<const std::vector<KeySpec>*> groups = {
      &path_keys(), &dehaze_keys(), &raycast_keys(), &visibility_keys(), &orient_keys(), &synth_keys()};
  return groups;
}

[[nodiscard]] inline bool is_known_key(const std::string& key) {
  for (const auto* group : all_key_groups()) {
    for (const KeySpec& k : *group) {
      if (key == k.key) return true;
    }
  }
  return false;
}

/// Every key at its default value.
[[nodiscard]] inline ConfigValues default_config() {
  ConfigValues values;
  for (const auto* group : all_key_groups()) {
    for (const KeySpec& k : *group) values[k.key] = k.default_value;
  }
  return values;
}

// ---------------------------------------------------------------------------
// Typed configuration

struct OrientSettings {
  Vec3 position = Vec3::Zero();
  double heading_deg = 180.0;
  double pitch_deg = 0.0;
  double f = 1000.0;
  ResectOptions resect;
  int width = 0;
  int height = 0;
};

struct PipelineConfig {
  std::string image;
  std::string dsm;
  std::string dsm_coarse;
  std::string gcp;
  std::string pose;
  std::string output = "out";
  bool save_intermediates = false;
  DehazeParams dehaze;
  RayCastOptions raycast;
  VisibilityParams visibility;
  double render_min = 60.0;
  double render_max = 16000.0;
  OrientSettings orient;

  [[nodiscard]] std::string pose_path() const {
    return pose.empty() ? (std::filesystem::path(output) / "pose.txt").string() : pose;
  }
  [[nodiscard]] std::string out(const std::string& file) const {
    return (std::filesystem::path(output) / file).string();
  }
};

struct SynthConfig {
  SceneSpec scene;
  Atmosphere atmosphere;
  int gcp_count = 0;
  std::uint64_t gcp_seed = 1;
  std::string output = "out";
};

namespace detail {

template <typename Fn>
void as_config_error(Fn&& fn) {
  try {
    fn();
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
}

}  // namespace detail

[[nodiscard]] inline PipelineConfig pipeline_config(const ConfigValues& values) {
  const ConfigReader r(values);
  PipelineConfig c;
  c.image = r.str("image");
  c.dsm = r.str("dsm");
  c.dsm_coarse = r.str("dsm_coarse");
  c.gcp = r.str("gcp");
  c.pose = r.str("pose");
  c.output = r.str("output");
  c.save_intermediates = r.flag("save_intermediates");

  c.dehaze.patch_radius = r.integer("dehaze.patch_radius");
  c.dehaze.omega = r.num("dehaze.omega");
  c.dehaze.guided_radius = r.integer("dehaze.guided_radius");
  c.dehaze.guided_eps = r.num("dehaze.guided_eps");
  c.dehaze.bright_fraction = r.num("dehaze.bright_fraction");

  c.raycast.max_range = r.num("raycast.max_range");
  c.raycast.coarse_step = r.num("raycast.coarse_step");
  c.raycast.refine_iters = r.integer("raycast.refine_iters");

  c.visibility.threshold = r.num("visibility.threshold");
  c.visibility.percentile_rank = r.num("visibility.percentile_rank");
  c.visibility.bin_width = r.num("visibility.bin_width");
  c.render_min = r.num("visibility.render_min");
  c.render_max = r.num("visibility.render_max");

  c.orient.position = Vec3(r.num("orient.x0"), r.num("orient.y0"), r.num("orient.z0"));
  c.orient.heading_deg = r.num("orient.heading");
  c.orient.pitch_deg = r.num("orient.pitch");
  c.orient.f = r.num("orient.f");
  c.orient.resect.estimate_f = r.flag("orient.estimate_f");
  c.orient.resect.max_iters = r.integer("orient.max_iters");
  c.orient.resect.tol = r.num("orient.tol");
  c.orient.width = r.integer("orient.width");
  c.orient.height = r.integer("orient.height");

  detail::as_config_error([&] {
    c.visibility.method = parse_visibility_method(r.str("visibility.method"));
    c.dehaze.validate();
    c.raycast.validate();
    c.visibility.validate();
  });
  if (c.output.empty()) throw ConfigError("output directory must not be empty");
  if (c.raycast.coarse_step < 0.0) throw ConfigError("raycast.coarse_step must be >= 0");
  if (!(c.render_min > 0.0 && c.render_min < c.render_max)) {
    throw ConfigError("visibility.render_min/render_max need 0 < min < max");
  }
  if (!(c.orient.f > 0.0)) throw ConfigError("orient.f must be > 0");
  if (c.orient.resect.max_iters <= 0) throw ConfigError("orient.max_iters must be > 0");
  return c;
}

[[nodiscard]] inline std::vector<Box> parse_boxes(const std::string& s) {
  std::vector<Box> boxes;
  std::stringstream all(s);
  for (std::string item; std::getline(all, item, ';');) {
    if (detail::trim(item).empty()) continue;
    std::vector<double> v;
    std::stringstream fields(item);
    for (std::string f; std::getline(fields, f, ',');) {
      auto parsed = detail::parse_double(detail::trim(f));
      if (!parsed) throw ConfigError("bad box specification '" + item + "'");
      v.push_back(*parsed);
    }
    if (v.size() != 5) throw ConfigError("box needs x,y,w,d,height: '" + item + "'");
    boxes.push_back(Box{v[0], v[1], v[2], v[3], v[4]});
  }
  return boxes;
}

/// Synthetic scene settings. Geometry problems are left to SceneSpec::validate
/// so callers can report them as invalid specs.
[[nodiscard]] inline SynthConfig synth_config(const ConfigValues& values) {
  const ConfigReader r(values);
  SynthConfig c;
  c.output = r.str("output");
  SceneSpec& s = c.scene;

  const std::string terrain = r.str("synth.terrain");
  const double ground = r.num("synth.ground");
  if (terrain == "flat") {
    s.terrain = FlatTerrain{ground};
  } else if (terrain == "ramp") {
    s.terrain = RampTerrain{ground, r.num("synth.slope"), r.num("synth.ramp_heading"),
                            r.num("synth.ramp_anchor_x"), r.num("synth.ramp_anchor_y")};
  } else if (terrain == "boxes") {
    s.terrain = BoxesTerrain{ground, parse_boxes(r.str("synth.boxes"))};
  } else {
    throw ConfigError("synth.terrain must be flat, ramp or boxes, got '" + terrain + "'");
  }

  s.grid = GridSpec{r.integer("synth.grid_ncols"), r.integer("synth.grid_nrows"),
                    r.num("synth.grid_origin_x"), r.num("synth.grid_origin_y"), r.num("synth.cell_size")};
  s.image_width = r.integer("synth.width");
  s.image_height = r.integer("synth.height");
  s.camera = CameraPose::looking(Vec3(r.num("synth.camera_x"), r.num("synth.camera_y"), r.num("synth.camera_z")),
                                 r.num("synth.heading"), r.num("synth.pitch"), r.num("synth.focal"),
                                 std::max(1, s.image_width), std::max(1, s.image_height));

  const std::string texture = r.str("synth.texture");
  if (texture == "checker") {
    s.texture = CheckerTexture{r.num("synth.checker_period"), r.color("synth.color_a"), r.color("synth.color_b")};
  } else if (texture == "random") {
    const double seed = r.num("synth.seed");
    if (seed < 0 || seed != std::floor(seed)) throw ConfigError("synth.seed must be a non-negative integer");
    s.texture = RandomTexture{static_cast<std::uint64_t>(seed), r.num("synth.texel")};
    c.gcp_seed = static_cast<std::uint64_t>(seed);
  } else {
    throw ConfigError("synth.texture must be checker or random, got '" + texture + "'");
  }
  s.ensure_dark_pixels = r.flag("synth.ensure_dark");
  s.max_range = r.num("synth.max_range");

  c.atmosphere.beta = r.num("synth.beta");
  const Rgb a = r.color("synth.airlight");
  c.atmosphere.airlight = AtmosphericLight{a.r, a.g, a.b};
  c.gcp_count = r.integer("synth.gcp_count");
  return c;
}

}  // namespace airvis
