#include <fstream>
#include <set>

#include "fieldvision/config.hpp"

namespace fv {

namespace {

using nlohmann::json;

// Tracks which keys a section consumed so leftovers can be rejected.
class Section {
 public:
  Section(const json& j, std::string name) : j_(j), name_(std::move(name)) {
    if (!j_.is_object()) throw ConfigError("config section '" + name_ + "' must be an object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      out = it->get<T>();
    } catch (const json::exception& e) {
      throw ConfigError("config key '" + name_ + "." + key + "': " + e.what());
    }
  }

  template <typename T, size_t N>
  void get(const char* key, std::array<T, N>& out) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    if (!it->is_array() || it->size() != N)
      throw ConfigError("config key '" + name_ + "." + key + "' must be an array of " +
                        std::to_string(N));
    for (size_t i = 0; i < N; ++i) {
      try {
        out[i] = (*it)[i].get<T>();
      } catch (const json::exception& e) {
        throw ConfigError("config key '" + name_ + "." + key + "': " + e.what());
      }
    }
  }

  const json* sub(const char* key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key()))
        throw ConfigError("unknown config key '" + name_ + "." + it.key() + "'");
  }

 private:
  const json& j_;
  std::string name_;
  std::set<std::string> seen_;
};

CameraSettings camera_from_json(const json& j) {
  CameraSettings c;
  Section s(j, "camera");
  s.get("focal_x", c.focal_x);
  s.get("focal_y", c.focal_y);
  s.get("center_x", c.center_x);
  s.get("center_y", c.center_y);
  s.get("width", c.width);
  s.get("height", c.height);
  s.get("k1", c.k1);
  s.get("k2", c.k2);
  s.get("k3", c.k3);
  s.get("mount_height", c.mount_height);
  s.get("camera_tilt", c.camera_tilt);
  s.get("mount_forward", c.mount_forward);
  s.finish();
  return c;
}

json camera_to_json(const CameraSettings& c) {
  return {{"focal_x", c.focal_x},           {"focal_y", c.focal_y},
          {"center_x", c.center_x},         {"center_y", c.center_y},
          {"width", c.width},               {"height", c.height},
          {"k1", c.k1},                     {"k2", c.k2},
          {"k3", c.k3},                     {"mount_height", c.mount_height},
          {"camera_tilt", c.camera_tilt},   {"mount_forward", c.mount_forward}};
}

DetectorSettings detector_from_json(const json& j) {
  DetectorSettings d;
  Section s(j, "detector");
  s.get("green", d.green);
  s.get("white", d.white);
  s.get("canny_low", d.canny_low);
  s.get("canny_high", d.canny_high);
  s.get("canny_sigma", d.canny_sigma);
  s.get("hough_min_length", d.hough_min_length);
  s.get("hough_max_gap", d.hough_max_gap);
  s.get("hough_votes", d.hough_votes);
  s.get("hist_distance_threshold", d.hist_distance_threshold);
  s.get("radius_tol", d.radius_tol);
  s.get("min_arc_coverage", d.min_arc_coverage);
  s.get("post_min_pixels", d.post_min_pixels);
  s.finish();
  return d;
}

json detector_to_json(const DetectorSettings& d) {
  return {{"green", d.green},
          {"white", d.white},
          {"canny_low", d.canny_low},
          {"canny_high", d.canny_high},
          {"canny_sigma", d.canny_sigma},
          {"hough_min_length", d.hough_min_length},
          {"hough_max_gap", d.hough_max_gap},
          {"hough_votes", d.hough_votes},
          {"hist_distance_threshold", d.hist_distance_threshold},
          {"radius_tol", d.radius_tol},
          {"min_arc_coverage", d.min_arc_coverage},
          {"post_min_pixels", d.post_min_pixels}};
}

LocConfig localization_from_json(const json& j) {
  LocConfig l;
  Section s(j, "localization");
  s.get("theta_gain", l.theta_gain);
  s.get("xy_gain", l.xy_gain);
  s.get("xy_clamp", l.xy_clamp);
  s.get("confidence_decay", l.confidence_decay);
  s.get("min_sideline_length", l.min_sideline_length);
  s.finish();
  return l;
}

json localization_to_json(const LocConfig& l) {
  return {{"theta_gain", l.theta_gain},
          {"xy_gain", l.xy_gain},
          {"xy_clamp", l.xy_clamp},
          {"confidence_decay", l.confidence_decay},
          {"min_sideline_length", l.min_sideline_length}};
}

CalibSettings calib_from_json(const json& j) {
  CalibSettings c;
  Section s(j, "calib");
  s.get("trust_translation", c.trust_translation);
  s.get("trust_rotation", c.trust_rotation);
  s.get("miss_penalty", c.miss_penalty);
  s.get("nm_tol", c.nm_tol);
  s.get("nm_max_iter", c.nm_max_iter);
  s.finish();
  return c;
}

json calib_to_json(const CalibSettings& c) {
  return {{"trust_translation", c.trust_translation},
          {"trust_rotation", c.trust_rotation},
          {"miss_penalty", c.miss_penalty},
          {"nm_tol", c.nm_tol},
          {"nm_max_iter", c.nm_max_iter}};
}

RenderSettings render_from_json(const json& j) {
  RenderSettings r;
  Section s(j, "render");
  s.get("grass_noise", r.grass_noise);
  s.get("line_wear", r.line_wear);
  s.get("border_margin", r.border_margin);
  s.get("post_radius", r.post_radius);
  s.get("post_height", r.post_height);
  s.get("ball_radius", r.ball_radius);
  s.get("draw_posts", r.draw_posts);
  s.get("lighting_gain", r.lighting_gain);
  s.get("lighting_offset", r.lighting_offset);
  s.finish();
  return r;
}

json render_to_json(const RenderSettings& r) {
  return {{"grass_noise", r.grass_noise},   {"line_wear", r.line_wear},
          {"border_margin", r.border_margin}, {"post_radius", r.post_radius},
          {"post_height", r.post_height},   {"ball_radius", r.ball_radius},
          {"draw_posts", r.draw_posts},     {"lighting_gain", r.lighting_gain},
          {"lighting_offset", r.lighting_offset}};
}

ScenarioConfig scenario_from_json(const json& j, size_t index) {
  ScenarioConfig sc;
  Section s(j, "scenarios[" + std::to_string(index) + "]");
  s.get("name", sc.name);
  s.get("kind", sc.kind);
  s.get("frames", sc.frames);
  s.get("start_pose", sc.start_pose);
  s.get("orbit_radius", sc.orbit_radius);
  s.get("step_angle", sc.step_angle);
  s.get("with_ball", sc.with_ball);
  s.get("ball", sc.ball);
  s.get("sweep_min", sc.sweep_min);
  s.get("sweep_max", sc.sweep_max);
  s.get("odo_noise", sc.odo_noise);
  s.get("mag_bias", sc.mag_bias);
  s.get("mag_noise", sc.mag_noise);
  s.get("use_magnetometer", sc.use_magnetometer);
  s.get("kidnap_frame", sc.kidnap_frame);
  s.get("kidnap_offset", sc.kidnap_offset);
  s.get("initial_offset", sc.initial_offset);
  s.get("blur_radius", sc.blur_radius);
  s.get("occluders", sc.occluders);
  s.get("injected_correction", sc.injected_correction);
  s.get("pixel_noise", sc.pixel_noise);
  s.get("chain_states", sc.chain_states);
  s.get("points_per_state", sc.points_per_state);
  s.finish();
  static const std::set<std::string> kinds{"static", "orbit", "ball_sweep",
                                           "clutter", "boundary", "calib"};
  if (!kinds.count(sc.kind))
    throw ConfigError("unknown scenario kind '" + sc.kind + "'");
  if (sc.frames < 0) throw ConfigError("scenario frames must be non-negative");
  return sc;
}

json scenario_to_json(const ScenarioConfig& sc) {
  return {{"name", sc.name},
          {"kind", sc.kind},
          {"frames", sc.frames},
          {"start_pose", sc.start_pose},
          {"orbit_radius", sc.orbit_radius},
          {"step_angle", sc.step_angle},
          {"with_ball", sc.with_ball},
          {"ball", sc.ball},
          {"sweep_min", sc.sweep_min},
          {"sweep_max", sc.sweep_max},
          {"odo_noise", sc.odo_noise},
          {"mag_bias", sc.mag_bias},
          {"mag_noise", sc.mag_noise},
          {"use_magnetometer", sc.use_magnetometer},
          {"kidnap_frame", sc.kidnap_frame},
          {"kidnap_offset", sc.kidnap_offset},
          {"initial_offset", sc.initial_offset},
          {"blur_radius", sc.blur_radius},
          {"occluders", sc.occluders},
          {"injected_correction", sc.injected_correction},
          {"pixel_noise", sc.pixel_noise},
          {"chain_states", sc.chain_states},
          {"points_per_state", sc.points_per_state}};
}

json field_to_json(const RunConfig& c) {
  return {{"length", c.field_length},
          {"width", c.field_width},
          {"line_width", c.line_width},
          {"circle_radius", c.circle_radius},
          {"goal_area_length", c.goal_area_length},
          {"goal_area_width", c.goal_area_width},
          {"goal_width", c.goal_width},
          {"penalty_mark_x", c.penalty_mark_x}};
}

}  // namespace

RunConfig default_config() {
  RunConfig c;
  ScenarioConfig benign;
  benign.name = "benign-orbit";
  benign.kind = "orbit";
  benign.frames = 120;
  benign.start_pose = {-2.0, 0.0, 0.0};
  benign.orbit_radius = 2.0;
  benign.odo_noise = 0.02;
  c.scenarios.push_back(benign);
  return c;
}

RunConfig config_from_json(const nlohmann::json& j) {
  RunConfig c;
  Section root(j, "root");
  if (const json* f = root.sub("field")) {
    Section s(*f, "field");
    s.get("length", c.field_length);
    s.get("width", c.field_width);
    s.get("line_width", c.line_width);
    s.get("circle_radius", c.circle_radius);
    s.get("goal_area_length", c.goal_area_length);
    s.get("goal_area_width", c.goal_area_width);
    s.get("goal_width", c.goal_width);
    s.get("penalty_mark_x", c.penalty_mark_x);
    s.finish();
  }
  if (const json* s = root.sub("camera")) c.camera = camera_from_json(*s);
  if (const json* s = root.sub("detector")) c.detector = detector_from_json(*s);
  if (const json* s = root.sub("localization")) c.localization = localization_from_json(*s);
  if (const json* s = root.sub("calib")) c.calib = calib_from_json(*s);
  if (const json* s = root.sub("render")) c.render = render_from_json(*s);
  if (const json* s = root.sub("scenarios")) {
    if (!s->is_array()) throw ConfigError("config key 'scenarios' must be an array");
    c.scenarios.clear();
    for (size_t i = 0; i < s->size(); ++i) c.scenarios.push_back(scenario_from_json((*s)[i], i));
  } else {
    c.scenarios = default_config().scenarios;
  }
  root.get("seed", c.seed);
  root.finish();
  make_field_spec(c);  // validates the geometry
  return c;
}

nlohmann::json config_to_json(const RunConfig& c) {
  json scenarios = json::array();
  for (const auto& s : c.scenarios) scenarios.push_back(scenario_to_json(s));
  return {{"field", field_to_json(c)},
          {"camera", camera_to_json(c.camera)},
          {"detector", detector_to_json(c.detector)},
          {"localization", localization_to_json(c.localization)},
          {"calib", calib_to_json(c.calib)},
          {"render", render_to_json(c.render)},
          {"scenarios", scenarios},
          {"seed", c.seed}};
}

RunConfig load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config file: " + path);
  json j;
  try {
    is >> j;
  } catch (const json::exception& e) {
    throw ConfigError("config parse error in " + path + ": " + e.what());
  }
  return config_from_json(j);
}

void save_config(const RunConfig& c, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write config file: " + path);
  os << config_to_json(c).dump(2) << "\n";
}

FieldSpec make_field_spec(const RunConfig& c) {
  FieldSpec f;
  f.length = c.field_length;
  f.width = c.field_width;
  f.line_width = c.line_width;
  f.circle_radius = c.circle_radius;
  f.goal_area_length = c.goal_area_length;
  f.goal_area_width = c.goal_area_width;
  f.penalty_mark_x = c.penalty_mark_x;
  const double hx = f.length * 0.5, hy = c.goal_width * 0.5;
  f.goal_post_positions = {{hx, hy}, {hx, -hy}, {-hx, hy}, {-hx, -hy}};
  f.validate();
  return f;
}

CameraModel make_camera(const RunConfig& c) {
  Intrinsics intr;
  intr.focal_x = c.camera.focal_x;
  intr.focal_y = c.camera.focal_y;
  intr.principal_point = {c.camera.center_x, c.camera.center_y};
  intr.image_width = c.camera.width;
  intr.image_height = c.camera.height;
  DistortionModel dist(c.camera.k1, c.camera.k2, c.camera.k3);
  ExtrinsicChain chain;
  chain.neck_tilt = c.camera.camera_tilt;
  chain.camera_mount = ExtrinsicChain::level_mount(c.camera.mount_height, 0.0,
                                                   c.camera.mount_forward);
  return CameraModel(intr, dist, chain);
}

DetectorConfig make_detector_config(const RunConfig& c) {
  DetectorConfig d;
  const auto& g = c.detector.green;
  const auto& w = c.detector.white;
  d.colors.green = {g[0], g[1], g[2], g[3], g[4], g[5]};
  d.colors.white = {w[0], w[1], w[2], w[3], w[4], w[5]};
  d.canny.low = c.detector.canny_low;
  d.canny.high = c.detector.canny_high;
  d.canny.sigma = c.detector.canny_sigma;
  d.hough.min_length = c.detector.hough_min_length;
  d.hough.max_gap = c.detector.hough_max_gap;
  d.hough.vote_threshold = c.detector.hough_votes;
  d.hist_distance_threshold = c.detector.hist_distance_threshold;
  d.radius_tol = c.detector.radius_tol;
  d.min_arc_coverage = c.detector.min_arc_coverage;
  d.post_min_pixels = c.detector.post_min_pixels;
  d.ball_radius_m = c.render.ball_radius;
  return d;
}

CalibOptions make_calib_options(const RunConfig& c) {
  CalibOptions o;
  o.trust_translation = c.calib.trust_translation;
  o.trust_rotation = c.calib.trust_rotation;
  o.miss_penalty = c.calib.miss_penalty;
  o.nm.tol = c.calib.nm_tol;
  o.nm.max_iter = c.calib.nm_max_iter;
  return o;
}

SceneConfig make_scene_defaults(const RunConfig& c) {
  SceneConfig s;
  s.ball_radius = c.render.ball_radius;
  s.post_radius = c.render.post_radius;
  s.post_height = c.render.post_height;
  s.border_margin = c.render.border_margin;
  s.lighting_gain = c.render.lighting_gain;
  s.lighting_offset = c.render.lighting_offset;
  s.grass_noise = c.render.grass_noise;
  s.line_wear = c.render.line_wear;
  s.draw_posts = c.render.draw_posts;
  s.chain.neck_tilt = c.camera.camera_tilt;
  s.chain.camera_mount = ExtrinsicChain::level_mount(c.camera.mount_height, 0.0,
                                                     c.camera.mount_forward);
  return s;
}

uint64_t fnv1a64(const void* data, size_t size) {
  const uint8_t* p = static_cast<const uint8_t*>(data);
  uint64_t h = 14695981039346656037ULL;
  for (size_t i = 0; i < size; ++i) {
    h ^= p[i];
    h *= 1099511628211ULL;
  }
  return h;
}

uint64_t dataset_hash(const RunConfig& c, const ScenarioConfig& s) {
  json j{{"field", field_to_json(c)},
         {"camera", camera_to_json(c.camera)},
         {"render", render_to_json(c.render)},
         {"scenario", scenario_to_json(s)},
         {"seed", c.seed}};
  const std::string dump = j.dump();
  return fnv1a64(dump.data(), dump.size());
}

}  // namespace fv
