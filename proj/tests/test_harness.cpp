#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <sys/wait.h>

#include <json.hpp>

#include "fieldvision/config.hpp"
#include "fieldvision/harness.hpp"
#include "fieldvision/image.hpp"

using namespace fv;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string fresh_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / "fieldvision_harness_tests" / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p.string();
}

std::string slurp(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  REQUIRE(bool(is));
  return std::string(std::istreambuf_iterator<char>(is), {});
}

json read_json(const std::string& path) { return json::parse(slurp(path)); }

int line_count(const std::string& path) {
  std::ifstream is(path);
  REQUIRE(bool(is));
  int n = 0;
  std::string line;
  while (std::getline(is, line))
    if (!line.empty()) ++n;
  return n;
}

std::string hex64(uint64_t h) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "0x%016llx", static_cast<unsigned long long>(h));
  return buf;
}

RunConfig tiny_static_config() {
  RunConfig cfg = default_config();
  cfg.seed = 11;
  ScenarioConfig s;
  s.name = "tiny";
  s.kind = "static";
  s.frames = 2;
  s.start_pose = {-2.0, 0.0, 0.0};
  s.with_ball = true;
  s.ball = {-0.5, 0.3};
  cfg.scenarios = {s};
  return cfg;
}

#ifdef FIELDVISION_CLI_PATH
int run_cli(const std::string& args) {
  const std::string cmd = std::string(FIELDVISION_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  REQUIRE(rc != -1);
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}
#endif

}  // namespace

TEST_CASE("config serialization round trips losslessly") {
  RunConfig cfg = default_config();
  cfg.seed = 42;
  cfg.camera.k1 = -0.21;
  cfg.camera.mount_height = 0.85;
  cfg.detector.canny_low = 33.0;
  cfg.detector.green[0] = 30;
  cfg.localization.xy_gain = 0.25;
  cfg.calib.nm_max_iter = 123;
  cfg.render.grass_noise = 7.5;
  cfg.scenarios[0].kidnap_frame = 40;
  cfg.scenarios[0].injected_correction = {0.001, 0, 0, 0, 0.02, 0};

  const json j1 = config_to_json(cfg);
  const RunConfig back = config_from_json(j1);
  const json j2 = config_to_json(back);
  CHECK(j1 == j2);
  CHECK(back.seed == 42);
  CHECK(back.camera.k1 == -0.21);
  CHECK(back.scenarios[0].kidnap_frame == 40);
}

TEST_CASE("config files survive a save and load cycle") {
  const std::string dir = fresh_dir("config_file");
  RunConfig cfg = tiny_static_config();
  save_config(cfg, dir + "/cfg.json");
  const RunConfig back = load_config(dir + "/cfg.json");
  CHECK(config_to_json(back) == config_to_json(cfg));
}

TEST_CASE("unknown keys are rejected in every section") {
  const std::vector<json> bad = {
      json{{"bogus", 1}},
      json{{"camera", {{"zoom", 1.0}}}},
      json{{"detector", {{"cany_low", 1.0}}}},
      json{{"localization", {{"gain", 1.0}}}},
      json{{"calib", {{"speed", 1.0}}}},
      json{{"render", {{"shadows", true}}}},
      json{{"field", {{"diameter", 9.0}}}},
      json{{"scenarios", json::array({json{{"warp", 1}}})}},
  };
  for (const json& j : bad) CHECK_THROWS_AS(config_from_json(j), ConfigError);

  CHECK_THROWS_AS(config_from_json(json{{"scenarios", json{{"name", "x"}}}}), ConfigError);
  CHECK_THROWS_AS(config_from_json(json{{"camera", 3}}), ConfigError);
  CHECK_THROWS_AS(
      config_from_json(json{{"scenarios", json::array({json{{"kind", "flight"}}})}}),
      ConfigError);
  CHECK_THROWS_AS(
      config_from_json(json{{"scenarios", json::array({json{{"frames", -1}}})}}),
      ConfigError);
}

TEST_CASE("missing keys fall back to documented defaults") {
  const RunConfig cfg = config_from_json(json::object());
  CHECK(cfg.camera.focal_x == 560.0);
  CHECK(cfg.camera.k1 == -0.3);
  CHECK(cfg.field_length == 9.0);
  CHECK(cfg.seed == 1);
  REQUIRE(cfg.scenarios.size() == 1);
  CHECK(cfg.scenarios[0].name == "benign-orbit");
}

TEST_CASE("dataset hashes ignore detector and localization tuning") {
  const RunConfig base = default_config();
  const uint64_t h0 = dataset_hash(base, base.scenarios[0]);
  CHECK(dataset_hash(base, base.scenarios[0]) == h0);

  RunConfig tuned = base;
  tuned.detector.canny_low = 55.0;
  tuned.detector.hough_votes = 77;
  tuned.detector.hist_distance_threshold = 0.5;
  tuned.localization.xy_gain = 0.11;
  tuned.calib.nm_max_iter = 17;
  CHECK(dataset_hash(tuned, tuned.scenarios[0]) == h0);

  RunConfig lens = base;
  lens.camera.k1 = -0.25;
  CHECK(dataset_hash(lens, lens.scenarios[0]) != h0);

  RunConfig grass = base;
  grass.render.grass_noise = 3.0;
  CHECK(dataset_hash(grass, grass.scenarios[0]) != h0);

  RunConfig seeded = base;
  seeded.seed = 2;
  CHECK(dataset_hash(seeded, seeded.scenarios[0]) != h0);

  RunConfig longer = base;
  longer.scenarios[0].frames = 10;
  CHECK(dataset_hash(longer, longer.scenarios[0]) != h0);
}

TEST_CASE("rendering zero frames leaves only the records") {
  const std::string dir = fresh_dir("zero_frames");
  const RunConfig cfg = tiny_static_config();
  cmd_render(cfg, "", 0, dir);

  const json manifest = read_json(dir + "/manifest.json");
  CHECK(manifest.at("frames").get<int>() == 0);
  CHECK(manifest.at("scenario_name").get<std::string>() == "tiny");
  CHECK(line_count(dir + "/truth.jsonl") == 0);
  CHECK(!fs::exists(dir + "/frame_0000.ppm"));

  // The embedded config is the run config, verbatim.
  const RunConfig echo = config_from_json(manifest.at("config"));
  CHECK(config_to_json(echo) == config_to_json(cfg));
  CHECK(manifest.at("dataset_hash").get<std::string>() ==
        hex64(dataset_hash(cfg, cfg.scenarios[0])));
}

TEST_CASE("rendered datasets are bytewise reproducible") {
  const RunConfig cfg = tiny_static_config();
  const std::string a = fresh_dir("repro_a");
  const std::string b = fresh_dir("repro_b");
  cmd_render(cfg, "tiny", -1, a);
  cmd_render(cfg, "tiny", -1, b);

  for (const char* f : {"frame_0000.ppm", "frame_0001.ppm", "mask_0000.pgm", "mask_0001.pgm",
                        "truth.jsonl", "manifest.json"}) {
    CHECK(slurp(a + "/" + f) == slurp(b + "/" + f));
  }

  CHECK(line_count(a + "/truth.jsonl") == 2);
  std::ifstream ts(a + "/truth.jsonl");
  std::string line;
  REQUIRE(std::getline(ts, line));
  const json t0 = json::parse(line);
  CHECK(t0.at("frame").get<int>() == 0);
  CHECK(t0.at("pose").size() == 3);
  CHECK(t0.at("odometry").size() == 3);
  CHECK(t0.contains("magnetometer"));
  CHECK(!t0.at("ball_ego").is_null());

  const Image img = read_pnm(a + "/frame_0000.ppm");
  CHECK(img.width == cfg.camera.width);
  CHECK(img.height == cfg.camera.height);
  CHECK(img.format == PixelFormat::rgb8);
}

TEST_CASE("scenario selection honors names and rejects strangers") {
  RunConfig cfg = default_config();
  ScenarioConfig a, b;
  a.name = "first";
  a.frames = 0;
  b.name = "second";
  b.kind = "boundary";
  b.frames = 0;
  cfg.scenarios = {a, b};

  const std::string da = fresh_dir("sel_a");
  const std::string db = fresh_dir("sel_b");
  cmd_render(cfg, "", 0, da);
  CHECK(read_json(da + "/manifest.json").at("scenario_name") == "first");
  cmd_render(cfg, "second", 0, db);
  CHECK(read_json(db + "/manifest.json").at("scenario_name") == "second");
  CHECK_THROWS_AS(cmd_render(cfg, "third", 0, da), ConfigError);

  RunConfig empty = cfg;
  empty.scenarios.clear();
  CHECK_THROWS_AS(cmd_render(empty, "", 0, da), ConfigError);
}

TEST_CASE("calibration datasets hold observations and recover the correction") {
  RunConfig cfg = default_config();
  ScenarioConfig s;
  s.name = "rig";
  s.kind = "calib";
  s.frames = 1;
  s.chain_states = 4;
  s.points_per_state = 8;
  s.injected_correction = {0.004, -0.002, 0.005, 0.01, 0.035, -0.015};
  cfg.scenarios = {s};

  const std::string ds = fresh_dir("calib_ds");
  cmd_render(cfg, "rig", -1, ds);
  CHECK(!fs::exists(ds + "/frame_0000.ppm"));
  CHECK(!fs::exists(ds + "/truth.jsonl"));
  const json manifest = read_json(ds + "/manifest.json");
  const int n_obs = manifest.at("observations").get<int>();
  // Points that fall off-image in some chain states are dropped, so the
  // count is bounded by the grid but stays large enough to calibrate from.
  CHECK(n_obs <= 4 * 8);
  CHECK(n_obs >= 12);
  CHECK(line_count(ds + "/observations.jsonl") == n_obs);

  const std::string out = fresh_dir("calib_out");
  cmd_calibrate(cfg, ds, out);
  const json c = read_json(out + "/correction.json");
  CHECK(c.at("after_cost").get<double>() <= c.at("before_cost").get<double>());
  const auto fitted = c.at("correction").get<std::array<double, 6>>();
  for (int k = 0; k < 3; ++k) {
    CHECK(std::abs(fitted[size_t(k)] - s.injected_correction[size_t(k)]) < 0.01);
    CHECK(std::abs(fitted[size_t(k + 3)] - s.injected_correction[size_t(k + 3)]) < 0.015);
  }

  // Image-oriented commands refuse a calibration dataset up front.
  CHECK_THROWS_AS(cmd_detect(cfg, ds, "", out), ConfigError);
  CHECK_THROWS_AS(cmd_localize(cfg, ds, out), ConfigError);
}

TEST_CASE("detect requires an existing dataset and classifier") {
  const RunConfig cfg = default_config();
  const std::string out = fresh_dir("missing_out");
  CHECK_THROWS_AS(cmd_detect(cfg, "/nonexistent/dataset", "", out), ConfigError);
  CHECK_THROWS_AS(cmd_localize(cfg, "/nonexistent/dataset", out), ConfigError);
  CHECK_THROWS_AS(cmd_calibrate(cfg, "/nonexistent/dataset", out), ConfigError);
  CHECK_THROWS_AS(cmd_train_ball(cfg, "/nonexistent/dataset", out), ConfigError);
}

#ifdef FIELDVISION_CLI_PATH
TEST_CASE("the command line maps errors onto exit codes") {
  const std::string dir = fresh_dir("cli");

  CHECK(run_cli("--help") == 0);
  CHECK(run_cli("levitate") == 2);
  CHECK(run_cli("train-ball") == 2);  // missing required --dataset

  {
    std::ofstream os(dir + "/bad.json");
    os << "{\"bogus\": 1}\n";
  }
  CHECK(run_cli("--config " + dir + "/bad.json --out " + dir + "/o render") == 2);

  {
    std::ofstream os(dir + "/broken.json");
    os << "{nope";
  }
  CHECK(run_cli("--config " + dir + "/broken.json --out " + dir + "/o render") == 2);

  CHECK(run_cli("--out " + dir + "/o detect --dataset /nonexistent") == 2);

  RunConfig cfg = tiny_static_config();
  save_config(cfg, dir + "/tiny.json");
  CHECK(run_cli("--config " + dir + "/tiny.json --out " + dir + "/ds render --count 0") == 0);
  const json manifest = read_json(dir + "/ds/manifest.json");
  CHECK(manifest.at("dataset_hash").get<std::string>() ==
        hex64(dataset_hash(cfg, cfg.scenarios[0])));

  // A seed override changes the dataset identity.
  CHECK(run_cli("--config " + dir + "/tiny.json --seed 99 --out " + dir +
                "/ds2 render --count 0") == 0);
  const json manifest2 = read_json(dir + "/ds2/manifest.json");
  CHECK(manifest2.at("dataset_hash") != manifest.at("dataset_hash"));
  RunConfig reseeded = cfg;
  reseeded.seed = 99;
  CHECK(manifest2.at("dataset_hash").get<std::string>() ==
        hex64(dataset_hash(reseeded, reseeded.scenarios[0])));
}
#endif
