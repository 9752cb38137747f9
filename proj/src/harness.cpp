#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "fieldvision/harness.hpp"
#include "fieldvision/localize.hpp"

namespace fv {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

uint64_t splitmix64(uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

uint64_t scenario_seed(const RunConfig& cfg, const ScenarioConfig& s) {
  return splitmix64(cfg.seed ^ fnv1a64(s.name.data(), s.name.size()));
}

std::string frame_path(const std::string& dir, const char* stem, int i, const char* ext) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s_%04d.%s", stem, i, ext);
  return dir + "/" + buf;
}

std::string hash_hex(uint64_t h) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "0x%016llx", static_cast<unsigned long long>(h));
  return buf;
}

json vec2_json(const Vec2& v) { return json::array({v.x, v.y}); }
json pose_json(const Pose2D& p) { return json::array({p.x, p.y, p.theta}); }

Vec2 vec2_from(const json& j) { return {j.at(0).get<double>(), j.at(1).get<double>()}; }
Pose2D pose_from(const json& j) {
  return Pose2D{j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()};
}

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

void write_text(const std::string& path, const std::string& text) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write " + path);
  os << text;
}

void write_json_file(const std::string& path, const json& j) {
  write_text(path, j.dump(2) + "\n");
}

const ScenarioConfig& find_scenario(const RunConfig& cfg, const std::string& name) {
  if (cfg.scenarios.empty()) throw ConfigError("config defines no scenarios");
  if (name.empty()) return cfg.scenarios.front();
  for (const auto& s : cfg.scenarios)
    if (s.name == name) return s;
  throw ConfigError("no scenario named '" + name + "' in config");
}

std::vector<Pose2D> scenario_poses(const ScenarioConfig& s, int frames) {
  std::vector<Pose2D> poses;
  poses.reserve(size_t(frames));
  const Pose2D start{s.start_pose[0], s.start_pose[1], s.start_pose[2]};
  if (s.kind == "orbit") {
    const double r = s.orbit_radius;
    const double phi0 = (std::abs(start.x) + std::abs(start.y)) > 1e-9
                            ? std::atan2(start.y, start.x)
                            : M_PI;
    for (int i = 0; i < frames; ++i) {
      const double phi = phi0 + s.step_angle * i;
      poses.push_back(Pose2D{r * std::cos(phi), r * std::sin(phi), phi + M_PI});
    }
  } else if (s.kind == "boundary") {
    for (int i = 0; i < frames; ++i) {
      poses.push_back(Pose2D{start.x + 0.4 * std::sin(0.5 * i),
                             start.y + 0.4 * std::sin(0.73 * i + 1.0),
                             start.theta + s.step_angle * (i - (frames - 1) * 0.5)});
    }
  } else {
    poses.assign(size_t(frames), start);
  }
  if (s.kidnap_frame >= 0) {
    for (int i = s.kidnap_frame; i < frames; ++i) {
      poses[size_t(i)].x += s.kidnap_offset[0];
      poses[size_t(i)].y += s.kidnap_offset[1];
    }
  }
  return poses;
}

json truth_json(int frame, const GroundTruth& t, const OdometryDelta& odo, double magnetometer,
                bool kidnapped) {
  json j;
  j["frame"] = frame;
  j["pose"] = pose_json(t.pose);
  j["odometry"] = json::array({odo.dx, odo.dy, odo.dtheta});
  j["magnetometer"] = magnetometer;
  j["kidnapped"] = kidnapped;
  j["ball_ego"] = t.ball_ego ? vec2_json(*t.ball_ego) : json();
  j["ball_pixel"] = t.ball_pixel ? vec2_json(*t.ball_pixel) : json();
  j["ball_pixel_radius"] = t.ball_pixel_radius;
  j["ball_pixels"] = t.ball_pixels;
  json posts = json::array();
  for (const auto& p : t.post_ego) posts.push_back(vec2_json(p));
  j["posts_ego"] = posts;
  j["post_pixels"] = t.post_pixels;
  j["circle_ego"] = t.circle_ego ? vec2_json(*t.circle_ego) : json();
  j["circle_pixels"] = t.circle_pixels;
  json segs = json::array();
  for (const auto& s : t.segments)
    segs.push_back(json{{"index", s.segment_index},
                        {"p0", vec2_json(s.ego.p0)},
                        {"p1", vec2_json(s.ego.p1)},
                        {"pixels", s.mask_pixels}});
  j["segments"] = segs;
  return j;
}

struct Dataset {
  std::string dir;
  json manifest;
  RunConfig config;
  ScenarioConfig scenario;
  std::vector<json> truth;

  int frames() const { return manifest.at("frames").get<int>(); }
  Image frame(int i) const { return read_pnm(frame_path(dir, "frame", i, "ppm")); }
  Image mask(int i) const { return read_pnm(frame_path(dir, "mask", i, "pgm")); }
};

Dataset load_dataset(const std::string& dir, bool need_truth = true) {
  Dataset ds;
  ds.dir = dir;
  const std::string mpath = dir + "/manifest.json";
  std::ifstream ms(mpath);
  if (!ms) throw ConfigError("dataset manifest not found: " + mpath);
  try {
    ms >> ds.manifest;
  } catch (const json::exception& e) {
    throw FormatError("bad manifest " + mpath + ": " + e.what());
  }
  ds.config = config_from_json(ds.manifest.at("config"));
  ds.scenario = find_scenario(ds.config, ds.manifest.at("scenario_name").get<std::string>());
  if (need_truth && ds.manifest.at("kind").get<std::string>() == "calib")
    throw ConfigError("dataset holds calibration observations, not image frames: " + dir);
  if (need_truth && ds.manifest.at("kind").get<std::string>() != "calib") {
    const std::string tpath = dir + "/truth.jsonl";
    std::ifstream ts(tpath);
    if (!ts) throw ConfigError("dataset truth record not found: " + tpath);
    std::string line;
    while (std::getline(ts, line)) {
      if (line.empty()) continue;
      try {
        ds.truth.push_back(json::parse(line));
      } catch (const json::exception& e) {
        throw FormatError("bad truth record in " + tpath + ": " + e.what());
      }
    }
    if (int(ds.truth.size()) != ds.frames())
      throw FormatError("truth record count does not match manifest frame count");
  }
  return ds;
}

uint64_t frame_seed(uint64_t dataset_seed, uint64_t salt, int frame) {
  return splitmix64(dataset_seed ^ (salt + uint64_t(frame)));
}

}  // namespace

void cmd_render(const RunConfig& cfg, const std::string& scenario_name, int count_override,
                const std::string& out_dir) {
  const ScenarioConfig& s = find_scenario(cfg, scenario_name);
  const int frames = count_override >= 0 ? count_override : s.frames;
  fs::create_directories(out_dir);

  const FieldSpec spec = make_field_spec(cfg);
  const CameraModel cam = make_camera(cfg);
  const uint64_t dseed = scenario_seed(cfg, s);

  json manifest;
  manifest["dataset_hash"] = hash_hex(dataset_hash(cfg, s));
  manifest["scenario_name"] = s.name;
  manifest["kind"] = s.kind;
  manifest["frames"] = frames;
  manifest["config"] = config_to_json(cfg);

  if (s.kind == "calib") {
    const int n_states = std::max(2, s.chain_states);
    std::vector<ExtrinsicChain> states;
    for (int k = 0; k < n_states; ++k) {
      ExtrinsicChain chain = cam.chain();
      chain.neck_pan = -0.35 + 0.7 * k / double(n_states - 1);
      chain.neck_tilt += (k % 2 == 0) ? -0.06 : 0.10;
      states.push_back(chain);
    }
    std::vector<Vec2> points;
    for (int k = 0; k < std::max(4, s.points_per_state); ++k) {
      const double fx = std::fmod(0.618033988749895 * (k + 1), 1.0);
      const double fy = std::fmod(0.381966011250105 * (k + 1) + 0.17, 1.0);
      points.push_back({0.9 + 2.6 * fx, -1.4 + 2.8 * fy});
    }
    const Transform3 truth = correction_from_array(s.injected_correction);
    const auto obs = make_calib_observations(cam, states, points, truth, s.pixel_noise, dseed);

    std::ofstream os(out_dir + "/observations.jsonl");
    if (!os) throw IoError("cannot write " + out_dir + "/observations.jsonl");
    for (const auto& o : obs) {
      json j{{"pixel", vec2_json(o.pixel)},
             {"world", vec2_json(o.true_world)},
             {"trunk_roll", o.chain_state.trunk_roll},
             {"trunk_pitch", o.chain_state.trunk_pitch},
             {"neck_pan", o.chain_state.neck_pan},
             {"neck_tilt", o.chain_state.neck_tilt}};
      os << j.dump() << "\n";
    }
    manifest["observations"] = obs.size();
    manifest["injected_correction"] = s.injected_correction;
    write_json_file(out_dir + "/manifest.json", manifest);
    std::printf("rendered calib dataset: %zu observations -> %s (hash %s)\n", obs.size(),
                out_dir.c_str(), manifest["dataset_hash"].get<std::string>().c_str());
    return;
  }

  SceneConfig base = make_scene_defaults(cfg);
  base.blur_radius = s.blur_radius;
  base.seed = dseed;
  if (s.with_ball && s.kind != "ball_sweep") base.ball_position = Vec2{s.ball[0], s.ball[1]};

  if (s.kind == "clutter" && s.occluders > 0) {
    std::mt19937_64 rng(splitmix64(dseed ^ 0x4F434C44ULL));
    std::uniform_real_distribution<double> ux(1.2, 4.0), uy(-2.2, 2.2), us(0.25, 0.45);
    const Pose2D p{s.start_pose[0], s.start_pose[1], s.start_pose[2]};
    const double c = std::cos(p.theta), sn = std::sin(p.theta);
    for (int k = 0; k < s.occluders; ++k) {
      const double ex = ux(rng), ey = uy(rng);
      OccluderBox box;
      box.position = {p.x + c * ex - sn * ey, p.y + sn * ex + c * ey};
      box.size_x = us(rng);
      box.size_y = us(rng);
      box.height = 0.5;
      if (k % 2 == 0) {
        box.color[0] = 225;
        box.color[1] = 222;
        box.color[2] = 215;
      }
      base.occluders.push_back(box);
    }
  }

  std::ofstream truth_os(out_dir + "/truth.jsonl");
  if (!truth_os) throw IoError("cannot write " + out_dir + "/truth.jsonl");

  if (s.kind == "ball_sweep") {
    const Pose2D pose{s.start_pose[0], s.start_pose[1], s.start_pose[2]};
    const double c = std::cos(pose.theta), sn = std::sin(pose.theta);
    for (int i = 0; i < frames; ++i) {
      const double t = frames > 1 ? double(i) / (frames - 1) : 0.0;
      const double d = s.sweep_min + (s.sweep_max - s.sweep_min) * t;
      SceneConfig sc = base;
      sc.robot_pose = pose;
      sc.ball_position = Vec2{pose.x + c * d, pose.y + sn * d};
      sc.seed = splitmix64(dseed ^ (0x46524D00ULL + uint64_t(i)));
      auto [img, truth] = render(sc, cam, spec);
      write_pnm(img, frame_path(out_dir, "frame", i, "ppm"));
      write_pnm(truth.mask, frame_path(out_dir, "mask", i, "pgm"));
      truth_os << truth_json(i, truth, OdometryDelta{0, 0, 0},
                             normalize_angle(pose.theta + s.mag_bias), false)
                     .dump()
               << "\n";
    }
  } else {
    const auto poses = scenario_poses(s, frames);
    TrajectoryOptions topts;
    topts.odo_noise = s.odo_noise;
    topts.mag_bias = s.mag_bias;
    topts.mag_noise = s.mag_noise;
    topts.seed = dseed;
    if (s.kidnap_frame >= 0) topts.kidnap_frames.push_back(s.kidnap_frame);
    const auto traj =
        poses.empty() ? std::vector<TrajectoryFrame>{}
                      : render_trajectory(poses, base, cam, spec, topts);
    for (int i = 0; i < int(traj.size()); ++i) {
      const auto& f = traj[size_t(i)];
      write_pnm(f.image, frame_path(out_dir, "frame", i, "ppm"));
      write_pnm(f.truth.mask, frame_path(out_dir, "mask", i, "pgm"));
      truth_os << truth_json(i, f.truth, f.odometry, f.magnetometer, i == s.kidnap_frame).dump()
               << "\n";
    }
  }

  write_json_file(out_dir + "/manifest.json", manifest);
  std::printf("rendered %d frame(s) -> %s (hash %s)\n", frames, out_dir.c_str(),
              manifest["dataset_hash"].get<std::string>().c_str());
}

namespace {

// Square gray patch around a pixel center, sized like a resting ball there.
Image cut_patch(const Image& gray, const Vec2& center, double radius, int out_size) {
  const int side = std::max(8, int(std::lround(2.5 * radius)));
  const Image patch = crop(gray, int(std::lround(center.x)) - side / 2,
                           int(std::lround(center.y)) - side / 2, side, side);
  return resize_bilinear(patch, out_size, out_size);
}

struct PatchSets {
  std::vector<Image> train_pos, train_neg, holdout_pos, holdout_neg;
  std::array<Histogram, 3> reference;
};

PatchSets extract_patches(const Dataset& ds, const DetectorConfig& dcfg, const CameraModel& cam) {
  PatchSets out;
  std::array<std::vector<double>, 3> ref_acc;
  const int bin_counts[3] = {dcfg.hist_bins.h, dcfg.hist_bins.s, dcfg.hist_bins.v};
  const HsvChannel channels[3] = {HsvChannel::H, HsvChannel::S, HsvChannel::V};
  for (int c = 0; c < 3; ++c) ref_acc[size_t(c)].assign(size_t(bin_counts[c]), 0.0);
  int ref_frames = 0;

  for (int i = 0; i < ds.frames(); ++i) {
    const json& t = ds.truth[size_t(i)];
    const bool holdout = i % 5 == 0;
    const Image rgb = ds.frame(i);
    const Image hsv = rgb_to_hsv(rgb);
    const Image gray = extract_gray(hsv);

    const bool has_ball = !t.at("ball_pixel").is_null() && t.at("ball_pixels").get<int>() >= 30;
    Vec2 ball_px{-1e9, -1e9};
    double ball_r = 0.0;
    if (has_ball) {
      ball_px = vec2_from(t.at("ball_pixel"));
      ball_r = t.at("ball_pixel_radius").get<double>();
      Image patch = cut_patch(gray, ball_px, ball_r, dcfg.patch_size);
      (holdout ? out.holdout_pos : out.train_pos).push_back(std::move(patch));
      if (!holdout) {
        for (int c = 0; c < 3; ++c) {
          const Histogram h =
              disk_histogram(hsv, ball_px, ball_r * 0.9, channels[c], bin_counts[c]);
          for (size_t b = 0; b < h.bins.size(); ++b) ref_acc[size_t(c)][b] += h.bins[b];
        }
        ++ref_frames;
      }
    }

    // Negatives on a fixed grid, sized by the ground geometry at each spot.
    for (int gy = 100; gy < rgb.height - 20; gy += 60) {
      for (int gx = 30; gx < rgb.width - 30; gx += 80) {
        const Vec2 center{double(gx), double(gy)};
        double radius = 12.0;
        try {
          const Vec2 g = cam.pixel_to_ground(center);
          const double dist = std::sqrt(g.x * g.x + g.y * g.y);
          if (dist > 9.0) continue;
          radius = std::clamp(cam.intrinsics().focal_x * dcfg.ball_radius_m /
                                  std::max(0.3, dist),
                              4.0, 60.0);
        } catch (const Error&) {
          continue;
        }
        if (has_ball) {
          const double dx = center.x - ball_px.x, dy = center.y - ball_px.y;
          if (std::sqrt(dx * dx + dy * dy) < 2.0 * (radius + ball_r)) continue;
        }
        Image patch = cut_patch(gray, center, radius, dcfg.patch_size);
        (holdout ? out.holdout_neg : out.train_neg).push_back(std::move(patch));
      }
    }
  }

  for (int c = 0; c < 3; ++c) {
    Histogram h;
    h.channel = channels[c];
    h.bins = ref_acc[size_t(c)];
    if (ref_frames > 0) {
      for (double& v : h.bins) v /= ref_frames;
    } else {
      std::fill(h.bins.begin(), h.bins.end(), 1.0 / double(h.bins.size()));
    }
    out.reference[size_t(c)] = h;
  }
  return out;
}

json histogram_json(const Histogram& h) { return json(h.bins); }

Histogram histogram_from(const json& j, HsvChannel c) {
  Histogram h;
  h.channel = c;
  h.bins = j.get<std::vector<double>>();
  return h;
}

}  // namespace

void cmd_train_ball(const RunConfig& cfg, const std::string& dataset_dir,
                    const std::string& out_dir) {
  Stopwatch watch;
  const Dataset ds = load_dataset(dataset_dir);
  fs::create_directories(out_dir);
  const CameraModel cam = make_camera(ds.config);
  DetectorConfig dcfg = make_detector_config(cfg);
  dcfg.ball_radius_m = ds.config.render.ball_radius;

  PatchSets sets = extract_patches(ds, dcfg, cam);
  const BallClassifier model = train_ball_classifier(sets.train_pos, sets.train_neg);

  int tp = 0, fn = 0, tn = 0, fp = 0;
  for (const Image& p : sets.holdout_pos) classify_ball(p, model).accepted ? ++tp : ++fn;
  for (const Image& p : sets.holdout_neg) classify_ball(p, model).accepted ? ++fp : ++tn;
  const double tpr = tp + fn > 0 ? double(tp) / (tp + fn) : 1.0;
  const double tnr = tn + fp > 0 ? double(tn) / (tn + fp) : 1.0;

  save_classifier(model, out_dir + "/ball_classifier.nblc");
  write_json_file(out_dir + "/ball_reference.json",
                  json{{"h", histogram_json(sets.reference[0])},
                       {"s", histogram_json(sets.reference[1])},
                       {"v", histogram_json(sets.reference[2])}});

  json metrics;
  metrics["train_positives_raw"] = sets.train_pos.size();
  metrics["train_positives_augmented"] = sets.train_pos.size() * 10;
  metrics["train_negatives"] = sets.train_neg.size();
  metrics["stages"] = model.stages.size();
  metrics["holdout"] = json{{"tp", tp}, {"fn", fn}, {"tn", tn}, {"fp", fp},
                            {"tpr", tpr}, {"tnr", tnr}};
  write_json_file(out_dir + "/train_metrics.json", metrics);

  std::ostringstream report;
  report << "ball classifier training\n"
         << "  positives: " << sets.train_pos.size() << " raw, "
         << sets.train_pos.size() * 10 << " after augmentation\n"
         << "  negatives: " << sets.train_neg.size() << "\n"
         << "  stages: " << model.stages.size() << "\n"
         << "holdout confusion matrix\n"
         << "               predicted+   predicted-\n"
         << "  actual+      " << tp << "            " << fn << "\n"
         << "  actual-      " << fp << "            " << tn << "\n"
         << "  tpr " << tpr << "  tnr " << tnr << "\n";
  std::fputs(report.str().c_str(), stdout);
  report << "runtime_seconds: " << watch.seconds() << "\n";
  write_text(out_dir + "/report.txt", report.str());
}

namespace {

struct BallBucket {
  double lo, hi;
  int expected = 0, detected = 0;
};

}  // namespace

void cmd_detect(const RunConfig& cfg, const std::string& dataset_dir,
                const std::string& classifier_path, const std::string& out_dir) {
  Stopwatch watch;
  const Dataset ds = load_dataset(dataset_dir);
  fs::create_directories(out_dir);
  const CameraModel cam = make_camera(ds.config);
  const FieldSpec spec = make_field_spec(ds.config);
  DetectorConfig dcfg = make_detector_config(cfg);
  dcfg.ball_radius_m = ds.config.render.ball_radius;

  BallClassifier classifier;
  std::array<Histogram, 3> reference;
  bool with_ball_stage = false;
  if (!classifier_path.empty()) {
    if (!fs::exists(classifier_path))
      throw ConfigError("classifier file not found: " + classifier_path);
    classifier = load_classifier(classifier_path);
    const std::string ref_path =
        (fs::path(classifier_path).parent_path() / "ball_reference.json").string();
    std::ifstream rs(ref_path);
    if (!rs) throw ConfigError("ball reference not found: " + ref_path);
    json rj;
    rs >> rj;
    reference = {histogram_from(rj.at("h"), HsvChannel::H),
                 histogram_from(rj.at("s"), HsvChannel::S),
                 histogram_from(rj.at("v"), HsvChannel::V)};
    with_ball_stage = true;
  }

  const uint64_t dseed = scenario_seed(ds.config, ds.scenario);
  std::ofstream det_os(out_dir + "/detections.jsonl");
  if (!det_os) throw IoError("cannot write " + out_dir + "/detections.jsonl");

  double iou_sum = 0.0, iou_min = 1.0, naive_sum = 0.0;
  int iou_frames = 0, frames_beating_naive = 0;
  int line_targets = 0, line_recalled = 0, det_segments = 0, det_matched = 0;
  int circle_expected = 0, circle_detected = 0;
  double circle_err_sum = 0.0;
  std::vector<BallBucket> buckets;
  for (double edge : {0.0, 1.0, 2.0, 3.0, 4.0, 4.5, 5.5, 7.0})
    buckets.push_back({edge, 0.0, 0, 0});
  for (size_t b = 0; b + 1 < buckets.size(); ++b) buckets[b].hi = buckets[b + 1].lo;
  buckets.back().hi = 100.0;
  int ball_frames = 0, ball_hits = 0, no_ball_frames = 0, ball_fps = 0;

  for (int i = 0; i < ds.frames(); ++i) {
    const json& t = ds.truth[size_t(i)];
    const Image rgb = ds.frame(i);
    const Image mask = ds.mask(i);
    const Detections det =
        detect_frame(rgb, cam, spec, with_ball_stage ? &classifier : nullptr,
                     with_ball_stage ? &reference : nullptr, dcfg, frame_seed(dseed, 0xDE7EC7ULL, i));

    // Boundary IoU against the mask classes that belong to the field interior.
    {
      const Image poly =
          rasterize_polygon(det.boundary.polygon, mask.width, mask.height, 0);
      Image naive_labels = classify_colors(rgb_to_hsv(rgb), dcfg.colors);
      FieldBoundary naive;
      try {
        naive = naive_field_boundary(naive_labels, dcfg);
      } catch (const Error&) {
      }
      const Image naive_poly =
          rasterize_polygon(naive.polygon, mask.width, mask.height, 0);
      size_t inter = 0, uni = 0, ninter = 0, nuni = 0;
      for (size_t k = 0; k < mask.data.size(); ++k) {
        const uint8_t c = mask.data[k];
        const bool gt = c == uint8_t(MaskClass::grass) || c == uint8_t(MaskClass::line) ||
                        c == uint8_t(MaskClass::ball);
        const bool dp = poly.data[k] != 0;
        const bool np = naive_poly.data[k] != 0;
        inter += gt && dp;
        uni += gt || dp;
        ninter += gt && np;
        nuni += gt || np;
      }
      const double iou = uni ? double(inter) / double(uni) : 1.0;
      const double naive_iou = nuni ? double(ninter) / double(nuni) : 1.0;
      iou_sum += iou;
      naive_sum += naive_iou;
      iou_min = std::min(iou_min, iou);
      if (iou > naive_iou) ++frames_beating_naive;
      ++iou_frames;
    }

    // Line recall: ground-truth visible segments sampled within 4.5 m.
    std::vector<LineSegment2D> gt_segments;
    for (const auto& sj : t.at("segments")) {
      LineSegment2D seg;
      seg.p0 = vec2_from(sj.at("p0"));
      seg.p1 = vec2_from(sj.at("p1"));
      seg.frame = Frame::egocentric;
      gt_segments.push_back(seg);
      if (sj.at("pixels").get<int>() < 60) continue;
      int near_samples = 0, covered = 0;
      for (int k = 0; k < 20; ++k) {
        const double u = (k + 0.5) / 20.0;
        const Vec2 p = seg.p0 + (seg.p1 - seg.p0) * u;
        if (p.norm() > 4.5) continue;
        ++near_samples;
        double best = 1e9;
        for (const auto& d : det.lines)
          best = std::min(best, point_segment_distance(p, d.p0, d.p1));
        if (best <= 0.15) ++covered;
      }
      if (near_samples < 8) continue;
      ++line_targets;
      if (covered >= int(std::ceil(0.7 * near_samples))) ++line_recalled;
    }

    // Precision: every returned segment should lie on some field marking.
    const bool gt_circle = !t.at("circle_ego").is_null();
    const Vec2 gt_circle_center = gt_circle ? vec2_from(t.at("circle_ego")) : Vec2{0, 0};
    for (const auto& d : det.lines) {
      ++det_segments;
      int on_marking = 0;
      for (int k = 0; k < 10; ++k) {
        const double u = (k + 0.5) / 10.0;
        const Vec2 p = d.p0 + (d.p1 - d.p0) * u;
        double best = 1e9;
        for (const auto& g : gt_segments)
          best = std::min(best, point_segment_distance(p, g.p0, g.p1));
        if (gt_circle)
          best = std::min(best, std::abs((p - gt_circle_center).norm() - spec.circle_radius));
        if (best <= 0.15) ++on_marking;
      }
      if (on_marking >= 5) ++det_matched;
    }

    // Centre circle.
    if (gt_circle && t.at("circle_pixels").get<int>() >= 200) {
      ++circle_expected;
      if (det.circle) {
        ++circle_detected;
        circle_err_sum += (det.circle->center - gt_circle_center).norm();
      }
    }

    // Ball detection buckets.
    if (with_ball_stage) {
      const bool gt_ball = !t.at("ball_ego").is_null() && t.at("ball_pixels").get<int>() >= 20;
      if (gt_ball) {
        const Vec2 gt_pos = vec2_from(t.at("ball_ego"));
        const double dist = gt_pos.norm();
        ++ball_frames;
        const bool hit = det.ball && (*det.ball - gt_pos).norm() <= 0.3 + 0.05 * dist;
        if (hit) ++ball_hits;
        for (auto& b : buckets)
          if (dist >= b.lo && dist < b.hi) {
            ++b.expected;
            if (hit) ++b.detected;
          }
      } else {
        ++no_ball_frames;
        if (det.ball) ++ball_fps;
      }
    }

    json dj;
    dj["frame"] = i;
    json poly = json::array();
    for (const auto& p : det.boundary.polygon) poly.push_back(vec2_json(p));
    dj["boundary"] = poly;
    json lines = json::array();
    for (const auto& d : det.lines)
      lines.push_back(json{{"p0", vec2_json(d.p0)}, {"p1", vec2_json(d.p1)}});
    dj["lines_ego"] = lines;
    dj["circle"] = det.circle ? json{{"center", vec2_json(det.circle->center)},
                                     {"radius", det.circle->radius}}
                              : json();
    dj["ball_ego"] = det.ball ? vec2_json(*det.ball) : json();
    json posts = json::array();
    for (const auto& p : det.goal_posts) posts.push_back(vec2_json(p));
    dj["posts_ego"] = posts;
    det_os << dj.dump() << "\n";
  }

  json metrics;
  metrics["frames"] = ds.frames();
  metrics["boundary"] = json{
      {"mean_iou", iou_frames ? iou_sum / iou_frames : 0.0},
      {"min_iou", iou_frames ? iou_min : 0.0},
      {"naive_mean_iou", iou_frames ? naive_sum / iou_frames : 0.0},
      {"frames_beating_naive", frames_beating_naive}};
  metrics["lines"] = json{
      {"targets", line_targets},
      {"recalled", line_recalled},
      {"recall", line_targets ? double(line_recalled) / line_targets : 1.0},
      {"detected", det_segments},
      {"matched", det_matched},
      {"precision", det_segments ? double(det_matched) / det_segments : 1.0}};
  metrics["circle"] = json{
      {"expected", circle_expected},
      {"detected", circle_detected},
      {"rate", circle_expected ? double(circle_detected) / circle_expected : 1.0},
      {"mean_center_error",
       circle_detected ? circle_err_sum / circle_detected : 0.0}};
  json bucket_json = json::array();
  for (const auto& b : buckets)
    bucket_json.push_back(json{{"min", b.lo},
                               {"max", b.hi},
                               {"expected", b.expected},
                               {"detected", b.detected},
                               {"rate", b.expected ? double(b.detected) / b.expected : 1.0}});
  metrics["ball"] = json{
      {"enabled", with_ball_stage},
      {"with_ball_frames", ball_frames},
      {"detected", ball_hits},
      {"overall_rate", ball_frames ? double(ball_hits) / ball_frames : 1.0},
      {"no_ball_frames", no_ball_frames},
      {"false_positives", ball_fps},
      {"fp_rate", no_ball_frames ? double(ball_fps) / no_ball_frames : 0.0},
      {"buckets", bucket_json}};
  write_json_file(out_dir + "/metrics.json", metrics);

  std::ostringstream report;
  report << "detection over " << ds.frames() << " frame(s)\n"
         << "  boundary mean IoU " << metrics["boundary"]["mean_iou"].get<double>()
         << " (naive " << metrics["boundary"]["naive_mean_iou"].get<double>() << ")\n"
         << "  line recall " << metrics["lines"]["recall"].get<double>() << " ("
         << line_recalled << "/" << line_targets << "), precision "
         << metrics["lines"]["precision"].get<double>() << "\n"
         << "  circle rate " << metrics["circle"]["rate"].get<double>()
         << ", mean center error " << metrics["circle"]["mean_center_error"].get<double>()
         << "\n";
  if (with_ball_stage) {
    report << "  ball rate " << metrics["ball"]["overall_rate"].get<double>() << " ("
           << ball_hits << "/" << ball_frames << "), fp rate "
           << metrics["ball"]["fp_rate"].get<double>() << "\n";
    for (const auto& b : buckets)
      if (b.expected)
        report << "    bucket [" << b.lo << ", " << b.hi << ") m: "
               << double(b.detected) / b.expected << " (" << b.detected << "/" << b.expected
               << ")\n";
  }
  std::fputs(report.str().c_str(), stdout);
  report << "runtime_seconds: " << watch.seconds() << "\n";
  write_text(out_dir + "/report.txt", report.str());
}

void cmd_localize(const RunConfig& cfg, const std::string& dataset_dir,
                  const std::string& out_dir) {
  Stopwatch watch;
  const Dataset ds = load_dataset(dataset_dir);
  fs::create_directories(out_dir);
  if (ds.frames() == 0) throw ConfigError("dataset has no frames to localize over");
  for (const json& t : ds.truth)
    if (!t.contains("odometry")) throw ConfigError("dataset has no odometry stream");
  const CameraModel cam = make_camera(ds.config);
  const FieldSpec spec = make_field_spec(ds.config);
  DetectorConfig dcfg = make_detector_config(cfg);
  dcfg.ball_radius_m = ds.config.render.ball_radius;
  const LocConfig lcfg = cfg.localization;
  const uint64_t dseed = scenario_seed(ds.config, ds.scenario);

  LocState state;
  state.pose = pose_from(ds.truth[0].at("pose"));
  state.pose.x += ds.scenario.initial_offset[0];
  state.pose.y += ds.scenario.initial_offset[1];

  std::ofstream trace(out_dir + "/trace.jsonl");
  if (!trace) throw IoError("cannot write " + out_dir + "/trace.jsonl");

  const int kidnap = ds.scenario.kidnap_frame;
  double err_sum_after_50 = 0.0;
  int err_frames_after_50 = 0;
  double max_jump = 0.0, final_theta_err = 0.0, final_err = 0.0;
  int recovery_frame = -1;

  for (int i = 0; i < ds.frames(); ++i) {
    const json& t = ds.truth[size_t(i)];
    const Image rgb = ds.frame(i);
    const Detections det =
        detect_frame(rgb, cam, spec, nullptr, nullptr, dcfg, frame_seed(dseed, 0xDE7EC7ULL, i));
    const auto& oj = t.at("odometry");
    const OdometryDelta odo{oj.at(0).get<double>(), oj.at(1).get<double>(),
                            oj.at(2).get<double>()};
    std::optional<double> mag;
    if (ds.scenario.use_magnetometer) mag = t.at("magnetometer").get<double>();

    const Pose2D before = state.pose;
    const StepReport rep = localize_step(state, odo, det, mag, spec, lcfg);
    const Pose2D truth_pose = pose_from(t.at("pose"));
    const double err = std::hypot(state.pose.x - truth_pose.x, state.pose.y - truth_pose.y);
    const double theta_err = std::abs(angle_diff(state.pose.theta, truth_pose.theta));
    const double jump = std::hypot(state.pose.x - before.x, state.pose.y - before.y);
    max_jump = std::max(max_jump, jump);
    final_theta_err = theta_err;
    final_err = err;
    if (i >= 50 && (kidnap < 0 || i < kidnap)) {
      err_sum_after_50 += err;
      ++err_frames_after_50;
    }
    if (kidnap >= 0 && recovery_frame < 0 && i >= kidnap && err < 0.3) recovery_frame = i;

    json line;
    line["frame"] = i;
    line["pose"] = pose_json(state.pose);
    line["true_pose"] = pose_json(truth_pose);
    line["error"] = err;
    line["theta_error_deg"] = theta_err * 180.0 / M_PI;
    line["correction"] = state.theta_correction;
    line["confidence"] = json::array({state.conf_x, state.conf_y, state.conf_theta});
    line["odometry_rejected"] = rep.odometry_rejected;
    line["alias_skip"] = rep.alias_skip;
    line["lines_used"] = rep.lines_used;
    trace << line.dump() << "\n";
  }

  json metrics;
  metrics["frames"] = ds.frames();
  metrics["mean_error_after_50"] =
      err_frames_after_50 ? err_sum_after_50 / err_frames_after_50 : 0.0;
  metrics["final_error"] = final_err;
  metrics["final_theta_error_deg"] = final_theta_err * 180.0 / M_PI;
  metrics["max_jump"] = max_jump;
  if (kidnap >= 0) {
    metrics["kidnap_frame"] = kidnap;
    if (recovery_frame >= 0)
      metrics["kidnap_recovery_frames"] = recovery_frame - kidnap;
    else
      metrics["kidnap_recovery_frames"] = nullptr;
  }
  write_json_file(out_dir + "/metrics.json", metrics);

  std::ostringstream report;
  report << "localization over " << ds.frames() << " frame(s)\n"
         << "  mean position error after frame 50: "
         << metrics["mean_error_after_50"].get<double>() << " m\n"
         << "  final position error: " << final_err << " m\n"
         << "  final heading error: " << final_theta_err * 180.0 / M_PI << " deg\n"
         << "  max single-frame jump: " << max_jump << " m\n";
  if (kidnap >= 0) {
    report << "  kidnap at frame " << kidnap << ", recovery ";
    if (recovery_frame >= 0)
      report << "after " << recovery_frame - kidnap << " frame(s)\n";
    else
      report << "not reached\n";
  }
  std::fputs(report.str().c_str(), stdout);
  report << "runtime_seconds: " << watch.seconds() << "\n";
  write_text(out_dir + "/report.txt", report.str());
}

void cmd_calibrate(const RunConfig& cfg, const std::string& dataset_dir,
                   const std::string& out_dir) {
  Stopwatch watch;
  const Dataset ds = load_dataset(dataset_dir, false);
  fs::create_directories(out_dir);
  const std::string opath = dataset_dir + "/observations.jsonl";
  std::ifstream os_in(opath);
  if (!os_in) throw ConfigError("calibration observations not found: " + opath);
  const CameraModel cam = make_camera(ds.config);

  std::vector<CalibObservation> obs;
  std::string line;
  while (std::getline(os_in, line)) {
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw FormatError("bad observation record: " + std::string(e.what()));
    }
    CalibObservation o;
    o.pixel = vec2_from(j.at("pixel"));
    o.true_world = vec2_from(j.at("world"));
    o.chain_state = cam.chain();
    o.chain_state.trunk_roll = j.at("trunk_roll").get<double>();
    o.chain_state.trunk_pitch = j.at("trunk_pitch").get<double>();
    o.chain_state.neck_pan = j.at("neck_pan").get<double>();
    o.chain_state.neck_tilt = j.at("neck_tilt").get<double>();
    obs.push_back(o);
  }

  const CalibOptions opts = make_calib_options(cfg);
  auto [params, rep] = calibrate_extrinsics(obs, cam, opts);

  json out;
  out["correction"] = params;
  out["before_cost"] = rep.before_cost;
  out["after_cost"] = rep.after_cost;
  out["iterations"] = rep.iterations;
  out["converged"] = rep.converged;
  write_json_file(out_dir + "/correction.json", out);

  std::ostringstream report;
  report << "extrinsic calibration over " << obs.size() << " observation(s)\n"
         << "  before cost: " << rep.before_cost << "\n"
         << "  after cost:  " << rep.after_cost << "\n"
         << "  reduction:   "
         << (rep.before_cost > 0.0 ? 100.0 * (1.0 - rep.after_cost / rep.before_cost) : 0.0)
         << " %\n"
         << "  converged:   " << (rep.converged ? "yes" : "no (result still applied)") << "\n"
         << "  correction:  [" << params[0] << ", " << params[1] << ", " << params[2] << ", "
         << params[3] << ", " << params[4] << ", " << params[5] << "]\n";
  if (ds.manifest.contains("injected_correction")) {
    const auto truth = ds.manifest.at("injected_correction").get<std::array<double, 6>>();
    report << "  injected:    [" << truth[0] << ", " << truth[1] << ", " << truth[2] << ", "
           << truth[3] << ", " << truth[4] << ", " << truth[5] << "]\n";
    double terr = 0.0, rerr = 0.0;
    for (int k = 0; k < 3; ++k) {
      terr = std::max(terr, std::abs(params[size_t(k)] - truth[size_t(k)]));
      rerr = std::max(rerr, std::abs(params[size_t(k + 3)] - truth[size_t(k + 3)]));
    }
    report << "  recovery error: " << terr * 1000.0 << " mm, " << rerr * 180.0 / M_PI
           << " deg\n";
  }
  std::fputs(report.str().c_str(), stdout);
  report << "runtime_seconds: " << watch.seconds() << "\n";
  write_text(out_dir + "/report.txt", report.str());
}

void cmd_evaluate(const RunConfig& cfg, const std::string& out_dir) {
  fs::create_directories(out_dir);
  std::string classifier_path;
  json summary = json::array();

  for (const auto& s : cfg.scenarios) {
    const std::string sdir = out_dir + "/" + s.name;
    const std::string dsdir = sdir + "/dataset";
    cmd_render(cfg, s.name, -1, dsdir);
    json entry{{"scenario", s.name}, {"kind", s.kind}};

    if (s.kind == "calib") {
      cmd_calibrate(cfg, dsdir, sdir);
      std::ifstream is(sdir + "/correction.json");
      json c;
      is >> c;
      entry["before_cost"] = c.at("before_cost");
      entry["after_cost"] = c.at("after_cost");
      summary.push_back(entry);
      continue;
    }

    const bool has_ball = s.with_ball || s.kind == "ball_sweep";
    if (has_ball && classifier_path.empty()) {
      cmd_train_ball(cfg, dsdir, out_dir + "/ball_model");
      classifier_path = out_dir + "/ball_model/ball_classifier.nblc";
    }
    cmd_detect(cfg, dsdir, has_ball ? classifier_path : std::string(), sdir);
    {
      std::ifstream is(sdir + "/metrics.json");
      json m;
      is >> m;
      entry["boundary_mean_iou"] = m.at("boundary").at("mean_iou");
      entry["line_recall"] = m.at("lines").at("recall");
      entry["circle_rate"] = m.at("circle").at("rate");
      if (has_ball) entry["ball_rate"] = m.at("ball").at("overall_rate");
    }

    if (s.kind == "orbit" || s.kind == "static") {
      const std::string ldir = sdir + "/localization";
      cmd_localize(cfg, dsdir, ldir);
      std::ifstream is(ldir + "/metrics.json");
      json m;
      is >> m;
      entry["loc_mean_error_after_50"] = m.at("mean_error_after_50");
      entry["loc_final_theta_error_deg"] = m.at("final_theta_error_deg");
    }
    summary.push_back(entry);
  }

  write_json_file(out_dir + "/summary.json", json{{"scenarios", summary}});
  std::printf("evaluated %zu scenario(s) -> %s\n", cfg.scenarios.size(), out_dir.c_str());
}

}  // namespace fv
