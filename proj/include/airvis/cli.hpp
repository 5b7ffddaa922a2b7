#pragma once

// Command-line front end: orient, transmission, visibility, pipeline, synth.
//
// Exit codes: 0 success, 1 usage or configuration error, 2 I/O or numeric
// failure, 3 no visible surface.

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "airvis/camera.hpp"
#include "airvis/config.hpp"
#include "airvis/dehaze.hpp"
#include "airvis/depth.hpp"
#include "airvis/error.hpp"
#include "airvis/pixmap.hpp"
#include "airvis/synth.hpp"
#include "airvis/terrain.hpp"
#include "airvis/visibility.hpp"

namespace airvis {

enum ExitCode : int { kExitOk = 0, kExitUsage = 1, kExitFailure = 2, kExitNoVisible = 3 };

namespace detail {

inline void ensure_output_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory '" + dir + "': " + ec.message());
}

inline void require_path(const std::string& value, const char* key) {
  if (value.empty()) throw ConfigError(std::string("missing required setting '") + key + "'");
}

[[nodiscard]] inline std::string format_rgb(const AtmosphericLight& a) {
  return format_double(a.r) + "," + format_double(a.g) + "," + format_double(a.b);
}

[[nodiscard]] inline HeightGrid load_dsm(const PipelineConfig& cfg) {
  require_path(cfg.dsm, "dsm");
  HeightGrid grid = load_grid(cfg.dsm);
  if (!cfg.dsm_coarse.empty()) grid = merge_grids(grid, load_grid(cfg.dsm_coarse));
  return grid;
}

}  // namespace detail

/// Resects the camera from control points and writes the pose file.
inline ResectResult cmd_orient(const PipelineConfig& cfg, std::ostream& out) {
  detail::require_path(cfg.gcp, "gcp");
  int width = cfg.orient.width;
  int height = cfg.orient.height;
  if (!cfg.image.empty()) {
    const RgbImage img = load_image(cfg.image);
    width = img.width();
    height = img.height();
  }
  if (width <= 0 || height <= 0) {
    throw ConfigError("image size unknown: set 'image' or 'orient.width'/'orient.height'");
  }
  const GcpSet gcps = load_gcps(cfg.gcp);
  const CameraPose initial = CameraPose::looking(cfg.orient.position, cfg.orient.heading_deg,
                                                 cfg.orient.pitch_deg, cfg.orient.f, width, height);
  const ResectResult result = resect(gcps, initial, cfg.orient.resect);

  const std::string path = cfg.pose_path();
  if (auto parent = std::filesystem::path(path).parent_path(); !parent.empty()) {
    detail::ensure_output_dir(parent.string());
  }
  save_pose(result.pose, result.rmse, path);
  out << "rmse_px=" << detail::format_double(result.rmse) << " iterations=" << result.iterations
      << " pose=" << path << "\n";
  return result;
}

/// Transmission stage; writes coarse and refined maps plus an 8-bit preview.
inline TransmissionResult cmd_transmission(const PipelineConfig& cfg, const RgbImage& img,
                                           std::ostream& out) {
  detail::ensure_output_dir(cfg.output);
  TransmissionResult t = compute_transmission(img, cfg.dehaze);
  save_pfm(t.coarse, cfg.out("transmission_coarse.pfm"));
  save_pfm(t.refined, cfg.out("transmission.pfm"));
  save_scalar_map(t.refined, cfg.out("transmission.png"), {MapEncoding::kPng8, 0.0, 1.0});
  if (cfg.save_intermediates) save_pfm(t.dark, cfg.out("dark_channel.pfm"));
  out << "airlight=" << detail::format_rgb(t.airlight) << "\n";
  return t;
}

inline TransmissionResult cmd_transmission(const PipelineConfig& cfg, std::ostream& out) {
  detail::require_path(cfg.image, "image");
  return cmd_transmission(cfg, load_image(cfg.image), out);
}

/// Depth, mask and visibility stages for an image whose transmission is known.
inline VisibilityReport cmd_visibility(const PipelineConfig& cfg, const RgbImage& img,
                                       const TransmissionResult& t, std::ostream& out) {
  detail::ensure_output_dir(cfg.output);
  const PoseFile pose = load_pose(cfg.pose_path());
  const HeightGrid grid = detail::load_dsm(cfg);

  const DepthMap raw = build_depth_map(grid, pose.pose, img.width(), img.height(), cfg.raycast);
  const DepthMap depth = correct_depth_map(raw);
  const BitMask mask = visibility_mask(t.refined, cfg.visibility.threshold);
  save_image(overlay_border(img, haze_border(mask)), cfg.out("overlay.png"), 8);
  if (cfg.save_intermediates) {
    save_depth_pfm(raw, cfg.out("depth_raw.pfm"));
    save_depth_pfm(depth, cfg.out("depth.pfm"));
    save_image(render_depth_log(depth, cfg.render_min, cfg.render_max), cfg.out("depth_log.png"), 8);
    ScalarMap mask_map(mask.width(), mask.height());
    for (std::size_t i = 0; i < mask.size(); ++i) mask_map[i] = mask[i] ? 1.0 : 0.0;
    save_scalar_map(mask_map, cfg.out("mask.png"), {MapEncoding::kPng8, 0.0, 1.0});
  }
  const VisibilityReport report = estimate_visibility(depth, mask, cfg.visibility);
  save_report(report, cfg.out("report.json"));
  out << "visibility_m=" << detail::format_double(report.visibility)
      << " visible_pixels=" << report.visible_pixels << " valid_pixels=" << report.valid_pixels << "\n";
  return report;
}

inline VisibilityReport cmd_visibility(const PipelineConfig& cfg, std::ostream& out) {
  detail::require_path(cfg.image, "image");
  const RgbImage img = load_image(cfg.image);
  const TransmissionResult t = compute_transmission(img, cfg.dehaze);
  out << "airlight=" << detail::format_rgb(t.airlight) << "\n";
  return cmd_visibility(cfg, img, t, out);
}

/// Orient (when a GCP file is configured), transmission, then visibility.
inline VisibilityReport cmd_pipeline(const PipelineConfig& cfg, std::ostream& out) {
  detail::require_path(cfg.image, "image");
  if (!cfg.gcp.empty()) cmd_orient(cfg, out);
  const RgbImage img = load_image(cfg.image);
  const TransmissionResult t = cmd_transmission(cfg, img, out);
  return cmd_visibility(cfg, img, t, out);
}

/// Writes radiance.png, hazy.png, dsm.asc, pose.txt, true_depth.pfm (and
/// gcps.txt when requested).
inline Scene cmd_synth(const SynthConfig& cfg, std::ostream& out) {
  if (!(cfg.atmosphere.beta >= 0.0)) throw InvalidArgument("synth.beta must be >= 0");
  for (int c = 0; c < 3; ++c) {
    const double a = cfg.atmosphere.airlight[c];
    if (!(a > 0.0 && a <= 1.0)) throw InvalidArgument("synth.airlight components must lie in (0, 1]");
  }
  if (cfg.gcp_count < 0) throw InvalidArgument("synth.gcp_count must be >= 0");
  Scene scene = make_test_scene(cfg.scene);
  const RgbImage hazy = apply_haze(scene.radiance, scene.true_depth, cfg.atmosphere);

  detail::ensure_output_dir(cfg.output);
  const std::filesystem::path dir(cfg.output);
  save_image(scene.radiance, (dir / "radiance.png").string(), 16);
  save_image(hazy, (dir / "hazy.png").string(), 16);
  save_grid(scene.grid, (dir / "dsm.asc").string());
  save_pose(scene.pose, 0.0, (dir / "pose.txt").string());
  save_depth_pfm(scene.true_depth, (dir / "true_depth.pfm").string());
  if (cfg.gcp_count > 0) {
    save_gcps(synthesize_gcps(scene, cfg.gcp_count, cfg.gcp_seed), (dir / "gcps.txt").string());
  }
  out << "scene=" << cfg.output << " size=" << scene.radiance.width() << "x" << scene.radiance.height()
      << "\n";
  return scene;
}

namespace detail {

// Registers one --key option per KeySpec; values land in `store`.
inline std::vector<CLI::Option*> add_keys(CLI::App* app, const std::vector<KeySpec>& keys,
                                          std::map<std::string, std::string>& store,
                                          const std::string& group) {
  std::vector<CLI::Option*> options;
  for (const KeySpec& k : keys) {
    CLI::Option* opt = app->add_option(std::string("--") + k.key, store[k.key], k.help);
    opt->default_str(k.default_value)->group(group);
    options.push_back(opt);
  }
  return options;
}

}  // namespace detail

/// Runs the tool with argv-style arguments (args[0] is the program name).
inline int run_cli(const std::vector<std::string>& args, std::ostream& out = std::cout,
                   std::ostream& err = std::cerr) {
  CLI::App app{"Airport visibility estimation from a single camera image and a surface model", "airvis"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "airvis 0.1.0");

  struct Command {
    CLI::App* app = nullptr;
    std::string config_file;
    bool save_flag = false;
    std::map<std::string, std::string> store;
    std::vector<CLI::Option*> options;
  };
  std::map<std::string, Command> commands;

  auto add_command = [&](const std::string& name, const std::string& description,
                         std::vector<std::pair<const std::vector<KeySpec>*, std::string>> groups) {
    Command& cmd = commands[name];
    cmd.app = app.add_subcommand(name, description);
    cmd.app->add_option("--config", cmd.config_file, "key=value configuration file");
    for (auto& [keys, group] : groups) {
      auto opts = detail::add_keys(cmd.app, *keys, cmd.store, group);
      cmd.options.insert(cmd.options.end(), opts.begin(), opts.end());
    }
    if (name != "synth" && name != "orient") {
      cmd.app->add_flag("--save-intermediates", cmd.save_flag, "same as --save_intermediates=true");
    }
  };

  add_command("orient", "Resect the camera pose and focal length from ground control points",
              {{&path_keys(), "Paths"}, {&orient_keys(), "Orientation"}});
  add_command("transmission", "Estimate the per-pixel atmospheric transmission of an image",
              {{&path_keys(), "Paths"}, {&dehaze_keys(), "Dehazing"}});
  add_command("visibility", "Compute depth, haze border and visibility distance for an oriented image",
              {{&path_keys(), "Paths"}, {&dehaze_keys(), "Dehazing"}, {&raycast_keys(), "Ray casting"},
               {&visibility_keys(), "Visibility"}});
  add_command("pipeline", "Run orient (if a GCP file is set), transmission and visibility",
              {{&path_keys(), "Paths"}, {&dehaze_keys(), "Dehazing"}, {&raycast_keys(), "Ray casting"},
               {&visibility_keys(), "Visibility"}, {&orient_keys(), "Orientation"}});
  add_command("synth", "Generate a synthetic hazy scene with known geometry",
              {{&path_keys(), "Paths"}, {&synth_keys(), "Scene"}});

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  if (!reversed.empty()) reversed.pop_back();  // program name
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kExitOk : kExitUsage;
  }

  try {
    for (auto& [name, cmd] : commands) {
      if (!cmd.app->parsed()) continue;

      ConfigValues values = default_config();
      if (!cmd.config_file.empty()) {
        for (const auto& [key, value] : load_config(cmd.config_file)) {
          if (!is_known_key(key)) throw ConfigError("unknown config key '" + key + "'");
          values[key] = value;
        }
      }
      for (CLI::Option* opt : cmd.options) {
        if (opt->count() == 0) continue;
        const std::string key = opt->get_name().substr(2);
        values[key] = cmd.store[key];
      }
      if (cmd.save_flag) values["save_intermediates"] = "true";

      if (name == "synth") {
        SynthConfig cfg = synth_config(values);
        try {
          cmd_synth(cfg, out);
        } catch (const InvalidArgument& e) {
          err << "error: invalid scene: " << e.what() << "\n";
          return kExitFailure;
        }
        return kExitOk;
      }
      const PipelineConfig cfg = pipeline_config(values);
      if (name == "orient") {
        cmd_orient(cfg, out);
      } else if (name == "transmission") {
        cmd_transmission(cfg, out);
      } else if (name == "visibility") {
        cmd_visibility(cfg, out);
      } else {
        cmd_pipeline(cfg, out);
      }
      return kExitOk;
    }
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const NoVisibleSurface& e) {
    err << "error: fog at lens: " << e.what() << "\n";
    return kExitNoVisible;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace airvis
