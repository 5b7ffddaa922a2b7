#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>

#include "airvis/cli.hpp"

using namespace airvis;
namespace fs = std::filesystem;

namespace {

struct CliRun {
  int code = 0;
  std::string out;
  std::string err;
};

CliRun run(std::vector<std::string> args) {
  args.insert(args.begin(), "airvis");
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::string fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "airvis_cli_tests" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir.string();
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Small flat scene: 96x72 pixels, a few hundred meters deep.
CliRun synth(const std::string& dir, std::vector<std::string> extra = {}) {
  std::vector<std::string> args{"synth",           "--output",         dir,       "--synth.width", "96",
                                "--synth.height",  "72",               "--synth.focal", "380",
                                "--synth.pitch",   "-4"};
  args.insert(args.end(), extra.begin(), extra.end());
  return run(args);
}

}  // namespace

TEST(Cli, HelpListsDefaults) {
  const CliRun r = run({"visibility", "--help"});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("--visibility.threshold"), std::string::npos);
  EXPECT_NE(r.out.find("0.75"), std::string::npos);
}

TEST(Cli, NoSubcommandIsUsageError) { EXPECT_EQ(run({}).code, 1); }

TEST(Cli, UnknownConfigKeyIsUsageError) {
  const std::string dir = fresh_dir("badkey");
  std::ofstream(dir + "/c.cfg") << "image = x.png\nvisibility.treshold = 0.5\n";
  const CliRun r = run({"transmission", "--config", dir + "/c.cfg"});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("treshold"), std::string::npos);
}

TEST(Cli, MissingImageIsIoFailure) {
  const CliRun r = run({"transmission", "--image", "/nonexistent/x.png", "--output", fresh_dir("noimg")});
  EXPECT_EQ(r.code, 2);
}

TEST(Cli, SynthWritesDeterministicAssets) {
  const std::string a = fresh_dir("synth_a"), b = fresh_dir("synth_b");
  ASSERT_EQ(synth(a).code, 0);
  ASSERT_EQ(synth(b).code, 0);
  for (const char* f : {"radiance.png", "hazy.png", "dsm.asc", "pose.txt", "true_depth.pfm"}) {
    ASSERT_TRUE(fs::exists(fs::path(a) / f)) << f;
    EXPECT_EQ(slurp(a + "/" + f), slurp(b + "/" + f)) << f;
  }
}

TEST(Cli, SynthZeroBetaHazyEqualsRadiance) {
  const std::string dir = fresh_dir("synth_clear");
  ASSERT_EQ(synth(dir, {"--synth.beta", "0"}).code, 0);
  const RgbImage radiance = load_image(dir + "/radiance.png");
  const RgbImage hazy = load_image(dir + "/hazy.png");
  const DepthMap depth = load_depth_pfm(dir + "/true_depth.pfm");
  for (std::size_t i = 0; i < hazy.size(); ++i) {
    if (is_valid(depth.distance[i])) {
      EXPECT_EQ(hazy[i], radiance[i]);
    }
  }
}

TEST(Cli, SynthInvalidSpecIsFailure) {
  EXPECT_EQ(synth(fresh_dir("synth_bad"), {"--synth.camera_z", "-5"}).code, 2);
  EXPECT_EQ(synth(fresh_dir("synth_bad2"), {"--synth.texture", "plaid"}).code, 1);
}

TEST(Cli, OrientHappyPathAndTooFewPoints) {
  const std::string dir = fresh_dir("orient");
  ASSERT_EQ(synth(dir, {"--synth.gcp_count", "10"}).code, 0);
  const CliRun ok = run({"orient", "--gcp", dir + "/gcps.txt", "--image", dir + "/hazy.png", "--output", dir,
                      "--pose", dir + "/solved.txt", "--orient.z0", "25", "--orient.f", "420",
                      "--orient.heading", "182", "--orient.pitch", "-5"});
  ASSERT_EQ(ok.code, 0) << ok.err;
  EXPECT_NE(ok.out.find("rmse_px="), std::string::npos);
  const PoseFile solved = load_pose(dir + "/solved.txt");
  EXPECT_LT(solved.rmse, 1e-6);
  EXPECT_NEAR(solved.pose.f, 380, 1e-3);

  std::ifstream in(dir + "/gcps.txt");
  std::string line, three;
  for (int kept = 0; std::getline(in, line) && kept < 3;) {
    if (line.empty() || line[0] == '#') continue;
    three += line + "\n";
    ++kept;
  }
  std::ofstream(dir + "/three.txt") << three;
  const CliRun bad = run({"orient", "--gcp", dir + "/three.txt", "--orient.width", "96", "--orient.height",
                       "72", "--output", dir});
  EXPECT_EQ(bad.code, 2);
  EXPECT_NE(bad.err.find("insufficient control points"), std::string::npos);
}

TEST(Cli, TransmissionOutputs) {
  const std::string dir = fresh_dir("trans");
  ASSERT_EQ(synth(dir).code, 0);
  const CliRun r = run({"transmission", "--image", dir + "/hazy.png", "--output", dir, "--save-intermediates"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("airlight="), std::string::npos);
  for (const char* f : {"transmission.pfm", "transmission_coarse.pfm", "transmission.png", "dark_channel.pfm"}) {
    EXPECT_TRUE(fs::exists(fs::path(dir) / f)) << f;
  }
}

TEST(Cli, BlackImageHasUnitTransmission) {
  const std::string dir = fresh_dir("black");
  save_image(RgbImage(40, 30, Rgb{0, 0, 0}), dir + "/black.png", 8);
  ASSERT_EQ(run({"transmission", "--image", dir + "/black.png", "--output", dir}).code, 0);
  const ScalarMap t = load_pfm(dir + "/transmission.pfm");
  for (double v : t.values()) EXPECT_NEAR(v, 1.0, 1e-6);
}

TEST(Cli, PipelineWritesReport) {
  const std::string dir = fresh_dir("pipeline");
  ASSERT_EQ(synth(dir, {"--synth.beta", "0.001"}).code, 0);
  const CliRun r = run({"pipeline", "--image", dir + "/hazy.png", "--dsm", dir + "/dsm.asc", "--pose",
                     dir + "/pose.txt", "--output", dir + "/out", "--save-intermediates"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("visibility_m="), std::string::npos);
  for (const char* f : {"report.json", "overlay.png", "depth.pfm", "depth_raw.pfm", "depth_log.png", "mask.png"}) {
    EXPECT_TRUE(fs::exists(fs::path(dir) / "out" / f)) << f;
  }
  const auto report = nlohmann::json::parse(slurp(dir + "/out/report.json"));
  EXPECT_GT(report["visibility_m"].get<double>(), 0.0);
}

TEST(Cli, OpaqueHazeExitsThree) {
  const std::string dir = fresh_dir("opaque");
  ASSERT_EQ(synth(dir).code, 0);
  // Uniform bright image: transmission estimate is 1 - omega everywhere.
  save_image(RgbImage(96, 72, Rgb{0.8, 0.8, 0.8}), dir + "/white.png", 8);
  const CliRun r = run({"visibility", "--image", dir + "/white.png", "--dsm", dir + "/dsm.asc", "--pose",
                     dir + "/pose.txt", "--output", dir});
  EXPECT_EQ(r.code, 3) << r.err;
}

TEST(Cli, ConfigFileAndOverride) {
  const std::string dir = fresh_dir("cfg");
  ASSERT_EQ(synth(dir, {"--synth.beta", "0.001"}).code, 0);
  std::ofstream(dir + "/run.cfg") << "# test\nimage = " << dir << "/hazy.png\ndsm = " << dir
                                  << "/dsm.asc\npose = " << dir << "/pose.txt\noutput = " << dir
                                  << "/o1\nvisibility.method = max\n";
  ASSERT_EQ(run({"visibility", "--config", dir + "/run.cfg"}).code, 0);
  ASSERT_EQ(run({"visibility", "--config", dir + "/run.cfg", "--visibility.method", "percentile", "--output",
                 dir + "/o2"})
                .code,
            0);
  const auto a = nlohmann::json::parse(slurp(dir + "/o1/report.json"));
  const auto b = nlohmann::json::parse(slurp(dir + "/o2/report.json"));
  EXPECT_EQ(a["method"], "max");
  EXPECT_EQ(b["method"], "percentile");
}
