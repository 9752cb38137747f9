#pragma once

#include <array>
#include <string>
#include <vector>

#include <json.hpp>

#include "fieldvision/camera.hpp"
#include "fieldvision/detect.hpp"
#include "fieldvision/geometry.hpp"
#include "fieldvision/localize.hpp"
#include "fieldvision/synth.hpp"

namespace fv {

struct CameraSettings {
  double focal_x = 560.0;
  double focal_y = 560.0;
  double center_x = 320.0;
  double center_y = 240.0;
  int width = 640;
  int height = 480;
  double k1 = -0.3;
  double k2 = 0.0;
  double k3 = 0.0;
  double mount_height = 0.9;
  double camera_tilt = 0.5;  // radians down from level
  double mount_forward = 0.0;
};

struct DetectorSettings {
  std::array<int, 6> green{35, 85, 60, 255, 40, 220};   // h min/max, s min/max, v min/max
  std::array<int, 6> white{0, 179, 0, 70, 160, 255};
  double canny_low = 40.0;
  double canny_high = 90.0;
  double canny_sigma = 1.0;
  int hough_min_length = 25;
  int hough_max_gap = 4;
  int hough_votes = 20;
  double hist_distance_threshold = 0.35;
  double radius_tol = 0.5;
  double min_arc_coverage = 1.0 / 3.0;
  int post_min_pixels = 80;
};

struct CalibSettings {
  double trust_translation = 0.05;
  double trust_rotation = 15.0 * M_PI / 180.0;
  double miss_penalty = 10.0;
  double nm_tol = 1e-12;
  int nm_max_iter = 4000;
};

struct RenderSettings {
  double grass_noise = 10.0;
  double line_wear = 0.25;
  double border_margin = 0.7;
  double post_radius = 0.06;
  double post_height = 0.9;
  double ball_radius = 0.07;
  bool draw_posts = true;
  double lighting_gain = 1.0;
  double lighting_offset = 0.0;
};

// One dataset recipe. Which keys matter depends on kind:
//   static     - start_pose, frames, optional ball, blur_radius, occluders
//   orbit      - circular walk of orbit_radius at step_angle per frame
//   ball_sweep - static robot, ball marched from sweep_min to sweep_max ahead
//   clutter    - no ball, occluder boxes scattered near the field
//   boundary   - static poses stepped around the field for boundary scoring
//   calib      - chain-state grid with an injected extrinsic correction
struct ScenarioConfig {
  std::string name = "default";
  std::string kind = "static";
  int frames = 1;
  std::array<double, 3> start_pose{0.0, 0.0, 0.0};
  double orbit_radius = 2.0;
  double step_angle = 0.02;
  bool with_ball = false;
  std::array<double, 2> ball{1.5, 0.0};
  double sweep_min = 1.0;
  double sweep_max = 7.0;
  double odo_noise = 0.0;
  double mag_bias = 0.0;
  double mag_noise = 0.0;
  bool use_magnetometer = true;
  int kidnap_frame = -1;
  std::array<double, 2> kidnap_offset{0.0, 0.0};
  std::array<double, 2> initial_offset{2.0, 0.0};  // localization start error
  int blur_radius = 0;
  int occluders = 0;
  std::array<double, 6> injected_correction{0, 0, 0, 0, 0, 0};
  double pixel_noise = 0.0;
  int chain_states = 4;
  int points_per_state = 8;
};

struct RunConfig {
  double field_length = 9.0;
  double field_width = 6.0;
  double line_width = 0.05;
  double circle_radius = 0.75;
  double goal_area_length = 1.0;
  double goal_area_width = 4.0;
  double goal_width = 2.6;
  double penalty_mark_x = 2.4;
  CameraSettings camera;
  DetectorSettings detector;
  LocConfig localization;
  CalibSettings calib;
  RenderSettings render;
  std::vector<ScenarioConfig> scenarios;
  uint64_t seed = 1;
};

RunConfig default_config();

// Strict parse: unknown keys anywhere raise ConfigError, missing keys take
// defaults. Serialization writes every key, so save -> load is lossless.
RunConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const RunConfig& c);
RunConfig load_config(const std::string& path);
void save_config(const RunConfig& c, const std::string& path);

FieldSpec make_field_spec(const RunConfig& c);
CameraModel make_camera(const RunConfig& c);
DetectorConfig make_detector_config(const RunConfig& c);
CalibOptions make_calib_options(const RunConfig& c);
SceneConfig make_scene_defaults(const RunConfig& c);

uint64_t fnv1a64(const void* data, size_t size);
// Hash of everything that determines a rendered dataset: field, camera,
// render settings, the scenario itself, and the seed. Detector and
// localization tuning deliberately do not participate.
uint64_t dataset_hash(const RunConfig& c, const ScenarioConfig& s);

}  // namespace fv
