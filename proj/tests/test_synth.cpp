#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "fieldvision/synth.hpp"

using namespace fv;

namespace {

CameraModel test_camera() {
  Intrinsics intr;
  DistortionModel dist(-0.1, 0.0, 0.0);
  ExtrinsicChain chain;
  chain.camera_mount = ExtrinsicChain::level_mount(0.9, 0.5, 0.0);
  return CameraModel(intr, dist, chain);
}

SceneConfig center_scene() {
  SceneConfig cfg;
  cfg.robot_pose = {-2.0, 0.0, 0.0};
  cfg.chain.camera_mount = ExtrinsicChain::level_mount(0.9, 0.5, 0.0);
  cfg.ball_position = Vec2{0.0, 0.5};
  cfg.seed = 7;
  return cfg;
}

int count_class(const Image& mask, MaskClass c) {
  int n = 0;
  for (uint8_t v : mask.data) n += (v == uint8_t(c)) ? 1 : 0;
  return n;
}

}  // namespace

TEST_CASE("render is byte-deterministic for a fixed config") {
  const CameraModel cam = test_camera();
  const FieldSpec field;
  const SceneConfig cfg = center_scene();
  const auto [img1, gt1] = render(cfg, cam, field);
  const auto [img2, gt2] = render(cfg, cam, field);
  CHECK(img1.data == img2.data);
  CHECK(gt1.mask.data == gt2.mask.data);

  SceneConfig other = cfg;
  other.seed = 8;
  const auto [img3, gt3] = render(other, cam, field);
  CHECK(img1.data != img3.data);
  // The scene geometry is unchanged, only the noise: masks agree.
  CHECK(gt1.mask.data == gt3.mask.data);
}

TEST_CASE("mask classes stay within the declared range") {
  const CameraModel cam = test_camera();
  const FieldSpec field;
  SceneConfig cfg = center_scene();
  cfg.occluders.push_back({{-0.5, -0.8}, 0.3, 0.3, 0.6});
  const auto [img, gt] = render(cfg, cam, field);
  CHECK(img.width == 640);
  CHECK(img.height == 480);
  CHECK(gt.mask.width == 640);
  for (uint8_t v : gt.mask.data) CHECK(v <= uint8_t(MaskClass::background));
  CHECK(gt.pose.x == cfg.robot_pose.x);
  CHECK(gt.pose.theta == cfg.robot_pose.theta);
}

TEST_CASE("ball mask pixels cluster around the projected ball") {
  const CameraModel cam = test_camera();
  const FieldSpec field;
  const SceneConfig cfg = center_scene();
  const auto [img, gt] = render(cfg, cam, field);

  REQUIRE(gt.ball_pixel.has_value());
  REQUIRE(gt.ball_pixels > 30);
  CHECK(gt.ball_pixel_radius > 3.0);
  CHECK(count_class(gt.mask, MaskClass::ball) == gt.ball_pixels);
  for (int y = 0; y < gt.mask.height; ++y)
    for (int x = 0; x < gt.mask.width; ++x)
      if (gt.mask.at(x, y) == uint8_t(MaskClass::ball)) {
        const double d = (Vec2{double(x), double(y)} - *gt.ball_pixel).norm();
        CHECK(d <= gt.ball_pixel_radius + 2.0);
      }

  // Ground-truth contact point matches the configured field position.
  REQUIRE(gt.ball_ego.has_value());
  const Vec2 back = ego_to_field(cfg.robot_pose, *gt.ball_ego);
  CHECK((back - *cfg.ball_position).norm() < 1e-9);
}

TEST_CASE("ball behind the robot leaves no trace") {
  const CameraModel cam = test_camera();
  const FieldSpec field;
  SceneConfig cfg = center_scene();
  cfg.ball_position = Vec2{-4.0, 0.0};  // behind the robot at (-2, 0) facing +x
  const auto [img, gt] = render(cfg, cam, field);
  CHECK(!gt.ball_pixel.has_value());
  CHECK(gt.ball_pixels == 0);
  CHECK(count_class(gt.mask, MaskClass::ball) == 0);
}

TEST_CASE("line pixels render brighter than grass") {
  const CameraModel cam = test_camera();
  const FieldSpec field;
  SceneConfig cfg = center_scene();
  cfg.ball_position.reset();
  const auto [img, gt] = render(cfg, cam, field);

  double line_sum = 0.0, grass_sum = 0.0;
  int line_n = 0, grass_n = 0;
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      const double v = std::max({double(img.at(x, y, 0)), double(img.at(x, y, 1)),
                                 double(img.at(x, y, 2))});
      if (gt.mask.at(x, y) == uint8_t(MaskClass::line)) {
        line_sum += v;
        ++line_n;
      } else if (gt.mask.at(x, y) == uint8_t(MaskClass::grass)) {
        grass_sum += v;
        ++grass_n;
      }
    }
  REQUIRE(line_n > 500);
  REQUIRE(grass_n > 10000);
  CHECK(line_sum / line_n > grass_sum / grass_n + 20.0);
}

TEST_CASE("centre circle truth matches the field origin") {
  const CameraModel cam = test_camera();
  const FieldSpec field;
  SceneConfig cfg = center_scene();
  cfg.ball_position.reset();
  const auto [img, gt] = render(cfg, cam, field);
  REQUIRE(gt.circle_ego.has_value());
  CHECK(gt.circle_pixels > 100);
  const Vec2 back = ego_to_field(cfg.robot_pose, *gt.circle_ego);
  CHECK(back.norm() < 1e-9);
}

TEST_CASE("visible segments lie on their field lines") {
  const CameraModel cam = test_camera();
  const FieldSpec field;
  SceneConfig cfg = center_scene();
  cfg.ball_position.reset();
  const auto [img, gt] = render(cfg, cam, field);
  const FieldLines lines = field_line_segments(field);

  REQUIRE(!gt.segments.empty());
  for (const VisibleSegment& vs : gt.segments) {
    REQUIRE(vs.segment_index >= 0);
    REQUIRE(vs.segment_index < int(lines.segments.size()));
    CHECK(vs.mask_pixels > 0);
    const LineSegment2D& ref = lines.segments[vs.segment_index];
    for (const Vec2& e : {vs.ego.p0, vs.ego.p1}) {
      const Vec2 f = ego_to_field(cfg.robot_pose, e);
      // Distance from the endpoint to the reference segment.
      const Vec2 d = ref.p1 - ref.p0;
      const double t = std::clamp((f - ref.p0).dot(d) / d.dot(d), 0.0, 1.0);
      CHECK((f - (ref.p0 + d * t)).norm() < 0.1);
    }
  }
}

TEST_CASE("posts appear as their ground positions") {
  const CameraModel cam = test_camera();
  const FieldSpec field;
  SceneConfig cfg;
  cfg.robot_pose = {2.0, 0.0, 0.0};  // near the +x goal, looking at it
  cfg.chain.camera_mount = ExtrinsicChain::level_mount(0.9, 0.5, 0.0);
  cfg.seed = 3;
  const auto [img, gt] = render(cfg, cam, field);
  REQUIRE(gt.post_ego.size() >= 1);
  REQUIRE(gt.post_ego.size() == gt.post_pixels.size());
  for (size_t i = 0; i < gt.post_ego.size(); ++i) {
    CHECK(gt.post_pixels[i] >= 50);
    const Vec2 f = ego_to_field(cfg.robot_pose, gt.post_ego[i]);
    double best = 1e18;
    for (const Vec2& p : field.goal_post_positions) best = std::min(best, (f - p).norm());
    CHECK(best < 0.05);
  }
}

TEST_CASE("blur radius smooths the image but not the mask") {
  const CameraModel cam = test_camera();
  const FieldSpec field;
  SceneConfig sharp = center_scene();
  SceneConfig blurred = sharp;
  blurred.blur_radius = 2;
  const auto [img_s, gt_s] = render(sharp, cam, field);
  const auto [img_b, gt_b] = render(blurred, cam, field);
  CHECK(img_s.data != img_b.data);
  CHECK(gt_s.mask.data == gt_b.mask.data);

  // Blur shrinks total gradient energy.
  auto energy = [](const Image& im) {
    double e = 0.0;
    for (int y = 0; y < im.height; ++y)
      for (int x = 1; x < im.width; ++x)
        e += std::abs(int(im.at(x, y, 1)) - int(im.at(x - 1, y, 1)));
    return e;
  };
  CHECK(energy(img_b) < energy(img_s));
}

TEST_CASE("zero-noise odometry composes back to the exact pose sequence") {
  std::vector<Pose2D> poses;
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Pose2D p{0.5, -0.25, 0.3};
  for (int i = 0; i < 40; ++i) {
    poses.push_back(p);
    p = compose_pose(p, 0.05 * u(rng) + 0.05, 0.02 * u(rng), 0.1 * u(rng));
  }
  TrajectoryOptions opts;
  const auto odo = make_odometry(poses, opts);
  REQUIRE(odo.size() == poses.size());
  CHECK(odo[0].dx == 0.0);
  CHECK(odo[0].dy == 0.0);
  CHECK(odo[0].dtheta == 0.0);

  Pose2D replay = poses[0];
  for (size_t i = 1; i < poses.size(); ++i) {
    replay = compose_pose(replay, odo[i].dx, odo[i].dy, odo[i].dtheta);
    CHECK(std::abs(replay.x - poses[i].x) < 1e-9);
    CHECK(std::abs(replay.y - poses[i].y) < 1e-9);
    CHECK(std::abs(angle_diff(replay.theta, poses[i].theta)) < 1e-9);
  }
}

TEST_CASE("noisy odometry drifts but stays deterministic per seed") {
  std::vector<Pose2D> poses;
  Pose2D p{0.0, 0.0, 0.0};
  for (int i = 0; i < 200; ++i) {
    poses.push_back(p);
    p = compose_pose(p, 0.05, 0.0, 0.02);
  }
  TrajectoryOptions opts;
  opts.odo_noise = 0.05;
  opts.seed = 21;
  const auto odo1 = make_odometry(poses, opts);
  const auto odo2 = make_odometry(poses, opts);
  for (size_t i = 0; i < odo1.size(); ++i) {
    CHECK(odo1[i].dx == odo2[i].dx);
    CHECK(odo1[i].dtheta == odo2[i].dtheta);
  }

  TrajectoryOptions other = opts;
  other.seed = 22;
  const auto odo3 = make_odometry(poses, other);
  bool any_diff = false;
  for (size_t i = 0; i < odo1.size(); ++i) any_diff = any_diff || odo1[i].dx != odo3[i].dx;
  CHECK(any_diff);

  Pose2D replay = poses[0];
  for (size_t i = 1; i < poses.size(); ++i)
    replay = compose_pose(replay, odo1[i].dx, odo1[i].dy, odo1[i].dtheta);
  const double drift = std::hypot(replay.x - poses.back().x, replay.y - poses.back().y);
  CHECK(drift > 0.01);
  CHECK(drift < 3.0);
}

TEST_CASE("kidnap frames emit zero odometry across the jump") {
  std::vector<Pose2D> poses;
  Pose2D p{0.0, 0.0, 0.0};
  for (int i = 0; i < 30; ++i) {
    if (i == 15) p = Pose2D{3.0, -2.0, 1.5};  // teleport
    poses.push_back(p);
    p = compose_pose(p, 0.05, 0.0, 0.0);
  }
  TrajectoryOptions opts;
  opts.kidnap_frames = {15};
  const auto odo = make_odometry(poses, opts);
  CHECK(odo[15].dx == 0.0);
  CHECK(odo[15].dy == 0.0);
  CHECK(odo[15].dtheta == 0.0);
  // Neighbours still carry the real motion.
  CHECK(odo[14].dx == doctest::Approx(0.05).epsilon(1e-9));
  CHECK(odo[16].dx == doctest::Approx(0.05).epsilon(1e-9));
}

TEST_CASE("trajectory frames carry exact headings when mag noise is off") {
  const CameraModel cam = test_camera();
  const FieldSpec field;
  SceneConfig base = center_scene();
  base.ball_position.reset();
  std::vector<Pose2D> poses;
  for (int i = 0; i < 5; ++i) poses.push_back({-2.0 + 0.1 * i, 0.0, 0.1 * i});

  TrajectoryOptions opts;
  opts.mag_bias = 0.25;
  const auto frames = render_trajectory(poses, base, cam, field, opts);
  REQUIRE(frames.size() == poses.size());
  for (size_t i = 0; i < frames.size(); ++i) {
    CHECK(frames[i].magnetometer ==
          doctest::Approx(normalize_angle(poses[i].theta + 0.25)).epsilon(1e-12));
    CHECK(frames[i].truth.pose.x == doctest::Approx(poses[i].x));
  }
  CHECK(frames[0].odometry.dx == 0.0);

  // Frames differ from each other but repeat run-to-run.
  const auto again = render_trajectory(poses, base, cam, field, opts);
  CHECK(frames[2].image.data == again[2].image.data);
  CHECK(frames[1].image.data != frames[4].image.data);
}

TEST_CASE("calib observations reproject exactly with zero correction and noise") {
  const CameraModel cam = test_camera();
  std::vector<ExtrinsicChain> chains;
  for (double pan : {-0.3, 0.0, 0.3}) {
    ExtrinsicChain c = cam.chain();
    c.neck_pan = pan;
    chains.push_back(c);
  }
  std::vector<Vec2> pts = {{1.5, 0.0}, {2.0, 0.5}, {2.5, -0.5}, {3.0, 0.2}};
  const auto obs =
      make_calib_observations(cam, chains, pts, Transform3::identity(), 0.0, 5);
  REQUIRE(obs.size() >= 6);
  for (const auto& o : obs) {
    const CameraModel posed = cam.with_chain(o.chain_state);
    const Vec2 px = posed.ground_to_pixel(o.true_world);
    CHECK((px - o.pixel).norm() < 1e-9);
  }
}

TEST_CASE("a real correction separates observed pixels from the nominal chain") {
  const CameraModel cam = test_camera();
  std::vector<ExtrinsicChain> chains = {cam.chain()};
  std::vector<Vec2> pts = {{2.0, 0.0}, {2.5, 0.6}, {3.0, -0.6}};
  const Transform3 corr{Mat3::from_rpy(0.0, 0.035, 0.0), {0.0, 0.0, 0.0}};
  const auto obs = make_calib_observations(cam, chains, pts, corr, 0.0, 5);
  REQUIRE(!obs.empty());
  for (const auto& o : obs) {
    const Vec2 nominal = cam.with_chain(o.chain_state).ground_to_pixel(o.true_world);
    CHECK((nominal - o.pixel).norm() > 2.0);
  }
}
