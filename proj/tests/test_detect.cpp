#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>

#include "fieldvision/detect.hpp"
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

SceneConfig scene_for(const CameraModel& cam, Pose2D pose, uint64_t seed) {
  SceneConfig cfg;
  cfg.robot_pose = pose;
  cfg.chain = cam.chain();
  cfg.seed = seed;
  return cfg;
}

// Paints labels and a matching edge map for a straight painted line of the
// given half width at ego x = line_x, using the camera's actual geometry.
void paint_ground_line(const CameraModel& cam, double line_x, double half_width, Image& labels,
                       Image& edges) {
  const Intrinsics& intr = cam.intrinsics();
  labels = Image(intr.image_width, intr.image_height, PixelFormat::gray8);
  edges = Image(intr.image_width, intr.image_height, PixelFormat::binary);
  std::vector<uint8_t> cls(size_t(intr.image_width) * intr.image_height, uint8_t(Label::other));
  for (int y = 0; y < intr.image_height; ++y)
    for (int x = 0; x < intr.image_width; ++x) {
      try {
        const Vec2 g = cam.pixel_to_ground({double(x), double(y)});
        cls[size_t(y) * intr.image_width + x] = std::abs(g.x - line_x) <= half_width
                                                    ? uint8_t(Label::white)
                                                    : uint8_t(Label::green);
      } catch (const Error&) {
      }
    }
  for (int y = 0; y < intr.image_height; ++y)
    for (int x = 0; x < intr.image_width; ++x)
      labels.at(x, y) = cls[size_t(y) * intr.image_width + x];
  // Edge wherever white touches green.
  for (int y = 1; y + 1 < intr.image_height; ++y)
    for (int x = 1; x + 1 < intr.image_width; ++x) {
      const uint8_t c = labels.at(x, y);
      bool boundary = false;
      for (int d = 0; d < 4; ++d) {
        const int nx = x + (d == 0) - (d == 1), ny = y + (d == 2) - (d == 3);
        const uint8_t n = labels.at(nx, ny);
        if ((c == uint8_t(Label::white) && n == uint8_t(Label::green)) ||
            (c == uint8_t(Label::green) && n == uint8_t(Label::white)))
          boundary = true;
      }
      if (boundary) edges.at(x, y) = 255;
    }
}

LineSegment2D ground_segment(const CameraModel& cam, Vec2 a, Vec2 b) {
  return {cam.ground_to_pixel(a), cam.ground_to_pixel(b), Frame::pixel};
}

Image disk_patch(int size, double cx, double cy, double r, uint8_t fg, uint8_t bg,
                 uint64_t seed) {
  Image img(size, size, PixelFormat::gray8);
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> jitter(-6, 6);
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) {
      const double d = std::hypot(x - cx, y - cy);
      const int base = d <= r ? fg : bg;
      img.at(x, y) = uint8_t(std::clamp(base + jitter(rng), 0, 255));
    }
  return img;
}

Image noise_patch(int size, uint64_t seed) {
  Image img(size, size, PixelFormat::gray8);
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> v(0, 255);
  for (auto& p : img.data) p = uint8_t(v(rng));
  return img;
}

BallClassifier train_toy_classifier() {
  std::vector<Image> pos, neg;
  for (int i = 0; i < 8; ++i)
    pos.push_back(disk_patch(32, 15.5 + (i % 3) - 1, 15.5 + (i % 2), 11.0 + i % 4, 210, 60, i));
  for (int i = 0; i < 210; ++i) neg.push_back(noise_patch(32, 1000 + i));
  return train_ball_classifier(pos, neg);
}

}  // namespace

TEST_CASE("augmentation produces ten variants with the identity first") {
  Image patch(32, 32, PixelFormat::gray8);
  for (int y = 0; y < 32; ++y)
    for (int x = 0; x < 32; ++x) patch.at(x, y) = uint8_t(x * 5 + (y > 20 && x > 24 ? 80 : 0));
  const auto augs = augment_positive(patch);
  REQUIRE(augs.size() == 10);
  CHECK(augs[0].data == patch.data);
  for (const Image& a : augs) {
    CHECK(a.width == 32);
    CHECK(a.height == 32);
  }
  // The mirrored original is one of the variants.
  const Image mirrored = mirror_horizontal(patch);
  bool found = false;
  for (const Image& a : augs) found = found || a.data == mirrored.data;
  CHECK(found);
  // Variants are pairwise distinct for an asymmetric patch.
  int distinct = 0;
  for (size_t i = 0; i < augs.size(); ++i) {
    bool unique = true;
    for (size_t j = 0; j < i; ++j) unique = unique && augs[i].data != augs[j].data;
    distinct += unique ? 1 : 0;
  }
  CHECK(distinct == 10);
}

TEST_CASE("collinear segments merge into one span") {
  std::vector<LineSegment2D> segs = {
      {{10, 100}, {120, 100}, Frame::pixel},
      {{130, 101}, {250, 101}, Frame::pixel},
  };
  const auto merged = merge_segments(segs, 5.0 * M_PI / 180.0, 14.0, 30.0);
  REQUIRE(merged.size() == 1);
  CHECK(merged[0].length() > 235.0);
  CHECK(std::abs(merged[0].angle()) < 0.02);
}

TEST_CASE("perpendicular segments stay separate") {
  std::vector<LineSegment2D> segs = {
      {{100, 100}, {200, 100}, Frame::pixel},
      {{150, 50}, {150, 150}, Frame::pixel},
  };
  const auto merged = merge_segments(segs, 5.0 * M_PI / 180.0, 14.0, 30.0);
  CHECK(merged.size() == 2);
}

TEST_CASE("segments three degrees apart merge under a five degree tolerance") {
  const double a = 3.0 * M_PI / 180.0;
  std::vector<LineSegment2D> segs = {
      {{0, 100}, {100, 100}, Frame::pixel},
      {{105, 100}, {105 + 100 * std::cos(a), 100 + 100 * std::sin(a)}, Frame::pixel},
  };
  const auto merged = merge_segments(segs, 5.0 * M_PI / 180.0, 14.0, 30.0);
  CHECK(merged.size() == 1);

  const double b = 9.0 * M_PI / 180.0;
  segs[1] = {{105, 100}, {105 + 100 * std::cos(b), 100 + 100 * std::sin(b)}, Frame::pixel};
  const auto kept = merge_segments(segs, 5.0 * M_PI / 180.0, 14.0, 30.0);
  CHECK(kept.size() == 2);
}

TEST_CASE("border pair of a painted line merges to its centerline") {
  // Two parallel borders 10 px apart, as canny would produce them.
  std::vector<LineSegment2D> segs = {
      {{100, 200}, {400, 200}, Frame::pixel},
      {{100, 210}, {400, 210}, Frame::pixel},
  };
  const auto merged = merge_segments(segs, 5.0 * M_PI / 180.0, 14.0, 30.0);
  REQUIRE(merged.size() == 1);
  CHECK(merged[0].midpoint().y == doctest::Approx(205.0).epsilon(0.01));
}

TEST_CASE("verify accepts a correctly painted line") {
  const CameraModel cam = test_camera();
  Image labels, edges;
  paint_ground_line(cam, 2.0, 0.025, labels, edges);
  DetectorConfig cfg;
  const auto seg = ground_segment(cam, {2.0, -0.4}, {2.0, 0.4});
  const auto res = verify_segment(seg, labels, edges, cam, cfg);
  CHECK(res.white == 10);
  CHECK(res.green >= cfg.verify.green);
  CHECK(res.edge >= cfg.verify.edge);
  CHECK(res.pass);
}

TEST_CASE("verify rejects a segment running through plain grass") {
  const CameraModel cam = test_camera();
  Image labels, edges;
  paint_ground_line(cam, 2.0, 0.025, labels, edges);
  DetectorConfig cfg;
  const auto seg = ground_segment(cam, {2.6, -0.4}, {2.6, 0.4});
  const auto res = verify_segment(seg, labels, edges, cam, cfg);
  CHECK(res.white == 0);
  CHECK(!res.pass);
}

TEST_CASE("verify rejects a stripe too wide to be a line") {
  const CameraModel cam = test_camera();
  Image labels, edges;
  paint_ground_line(cam, 2.0, 0.15, labels, edges);
  DetectorConfig cfg;
  const auto seg = ground_segment(cam, {2.0, -0.4}, {2.0, 0.4});
  const auto res = verify_segment(seg, labels, edges, cam, cfg);
  // The 5 cm flanks still land on white, so the green checks fail.
  CHECK(res.white == 10);
  CHECK(res.green < cfg.verify.green);
  CHECK(!res.pass);
}

TEST_CASE("verify needs the edge between line and flank") {
  const CameraModel cam = test_camera();
  Image labels, edges;
  paint_ground_line(cam, 2.0, 0.025, labels, edges);
  Image no_edges(edges.width, edges.height, PixelFormat::binary);
  DetectorConfig cfg;
  const auto seg = ground_segment(cam, {2.0, -0.4}, {2.0, 0.4});
  const auto res = verify_segment(seg, labels, no_edges, cam, cfg);
  CHECK(res.white == 10);
  CHECK(res.edge == 0);
  CHECK(!res.pass);
}

TEST_CASE("centre circle is recovered from short chords") {
  const Vec2 c{2.5, 0.3};
  const FieldSpec field;
  std::vector<LineSegment2D> segs;
  for (int i = 0; i < 12; ++i) {
    const double a0 = 2.0 * M_PI * i / 12.0;
    const double a1 = a0 + 18.0 * M_PI / 180.0;
    segs.push_back({{c.x + field.circle_radius * std::cos(a0),
                     c.y + field.circle_radius * std::sin(a0)},
                    {c.x + field.circle_radius * std::cos(a1),
                     c.y + field.circle_radius * std::sin(a1)},
                    Frame::egocentric});
  }
  // A long straight segment must not disturb the fit.
  segs.push_back({{0.0, -2.0}, {5.0, -2.0}, Frame::egocentric});

  DetectorConfig cfg;
  const auto det = detect_centre_circle(segs, field, cfg);
  REQUIRE(det.has_value());
  CHECK((det->center - c).norm() < 0.05);
  CHECK(det->radius == doctest::Approx(field.circle_radius).epsilon(0.05));
}

TEST_CASE("centre circle requires enough arc coverage") {
  const Vec2 c{2.5, 0.3};
  const FieldSpec field;
  std::vector<LineSegment2D> segs;
  for (int i = 0; i < 4; ++i) {
    const double a0 = 20.0 * M_PI / 180.0 * i;  // chords span only ~90 degrees
    const double a1 = a0 + 15.0 * M_PI / 180.0;
    segs.push_back({{c.x + field.circle_radius * std::cos(a0),
                     c.y + field.circle_radius * std::sin(a0)},
                    {c.x + field.circle_radius * std::cos(a1),
                     c.y + field.circle_radius * std::sin(a1)},
                    Frame::egocentric});
  }
  DetectorConfig cfg;
  CHECK(!detect_centre_circle(segs, field, cfg).has_value());
}

TEST_CASE("straight lines alone never form a circle") {
  const FieldSpec field;
  std::vector<LineSegment2D> segs = {
      {{1.0, -2.0}, {1.0, 2.0}, Frame::egocentric},
      {{2.0, -2.0}, {2.0, 2.0}, Frame::egocentric},
      {{0.5, 0.0}, {3.5, 0.0}, Frame::egocentric},
  };
  DetectorConfig cfg;
  CHECK(!detect_centre_circle(segs, field, cfg).has_value());
}

TEST_CASE("circle of the wrong radius is rejected") {
  const Vec2 c{2.5, 0.0};
  const FieldSpec field;
  std::vector<LineSegment2D> segs;
  const double r = field.circle_radius * 1.6;
  for (int i = 0; i < 12; ++i) {
    const double a0 = 2.0 * M_PI * i / 12.0;
    const double a1 = a0 + 12.0 * M_PI / 180.0;
    segs.push_back({{c.x + r * std::cos(a0), c.y + r * std::sin(a0)},
                    {c.x + r * std::cos(a1), c.y + r * std::sin(a1)},
                    Frame::egocentric});
  }
  DetectorConfig cfg;
  CHECK(!detect_centre_circle(segs, field, cfg).has_value());
}

TEST_CASE("disk histogram concentrates on the disk color") {
  Image hsv(64, 64, PixelFormat::hsv8);
  for (int y = 0; y < 64; ++y)
    for (int x = 0; x < 64; ++x) {
      hsv.at(x, y, 0) = 90;
      hsv.at(x, y, 1) = 200;
      hsv.at(x, y, 2) = 100;
    }
  const Histogram h = disk_histogram(hsv, {32, 32}, 10.0, HsvChannel::H, 12);
  REQUIRE(int(h.bins.size()) == 12);
  CHECK(h.bins[90 * 12 / 180] == doctest::Approx(1.0));
  CHECK(h.sum() == doctest::Approx(1.0));

  // A disk fully outside the image yields the uniform fallback.
  const Histogram empty = disk_histogram(hsv, {-50, -50}, 5.0, HsvChannel::V, 8);
  for (double b : empty.bins) CHECK(b == doctest::Approx(1.0 / 8.0));
}

TEST_CASE("insufficient training data is reported") {
  std::vector<Image> pos, neg;
  for (int i = 0; i < 4; ++i) pos.push_back(disk_patch(32, 16, 16, 11, 210, 60, i));
  for (int i = 0; i < 210; ++i) neg.push_back(noise_patch(32, 500 + i));
  // 4 positives augment to 40 < 50.
  CHECK_THROWS_AS(train_ball_classifier(pos, neg), InsufficientDataError);

  pos.clear();
  for (int i = 0; i < 8; ++i) pos.push_back(disk_patch(32, 16, 16, 11, 210, 60, i));
  neg.resize(150);
  CHECK_THROWS_AS(train_ball_classifier(pos, neg), InsufficientDataError);
  CHECK_THROWS_AS(train_ball_classifier({}, {}, {}), InsufficientDataError);
}

TEST_CASE("indistinguishable classes fail training loudly") {
  Image flat(32, 32, PixelFormat::gray8);
  std::fill(flat.data.begin(), flat.data.end(), 128);
  std::vector<Image> pos(8, flat), neg(210, flat);
  CHECK_THROWS_AS(train_ball_classifier(pos, neg), TrainingError);
}

TEST_CASE("trained classifier separates disks from noise") {
  const BallClassifier model = train_toy_classifier();
  REQUIRE(!model.stages.empty());

  int pos_ok = 0, neg_ok = 0;
  for (int i = 0; i < 20; ++i) {
    const auto r = classify_ball(disk_patch(32, 16, 16, 11.5, 210, 60, 9000 + i), model);
    pos_ok += r.accepted ? 1 : 0;
  }
  for (int i = 0; i < 20; ++i) {
    const auto r = classify_ball(noise_patch(32, 7000 + i), model);
    neg_ok += r.accepted ? 0 : 1;
  }
  CHECK(pos_ok >= 17);
  CHECK(neg_ok >= 15);

  // Constant patches carry no gradients and are always rejected.
  Image flat(32, 32, PixelFormat::gray8);
  std::fill(flat.data.begin(), flat.data.end(), 200);
  const auto r = classify_ball(flat, model);
  CHECK(!r.accepted);
}

TEST_CASE("classifier file round trip preserves the model") {
  const BallClassifier model = train_toy_classifier();
  const std::string path = "/tmp/fv_test_model.nblc";
  save_classifier(model, path);
  const BallClassifier back = load_classifier(path);

  CHECK(back.patch_size == model.patch_size);
  CHECK(back.hog.cell_size == model.hog.cell_size);
  CHECK(back.hog.bins == model.hog.bins);
  REQUIRE(back.stages.size() == model.stages.size());
  for (size_t s = 0; s < model.stages.size(); ++s) {
    CHECK(back.stages[s].threshold == model.stages[s].threshold);
    REQUIRE(back.stages[s].stumps.size() == model.stages[s].stumps.size());
    for (size_t k = 0; k < model.stages[s].stumps.size(); ++k) {
      CHECK(back.stages[s].stumps[k].feature == model.stages[s].stumps[k].feature);
      CHECK(back.stages[s].stumps[k].threshold == model.stages[s].stumps[k].threshold);
      CHECK(back.stages[s].stumps[k].polarity == model.stages[s].stumps[k].polarity);
      CHECK(back.stages[s].stumps[k].alpha == model.stages[s].stumps[k].alpha);
    }
  }

  // Identical classifications all over.
  for (int i = 0; i < 10; ++i) {
    const Image p = i % 2 ? disk_patch(32, 16, 16, 11, 210, 60, 80 + i) : noise_patch(32, 80 + i);
    const auto a = classify_ball(p, model);
    const auto b = classify_ball(p, back);
    CHECK(a.accepted == b.accepted);
    CHECK(a.score == b.score);
  }
  std::remove(path.c_str());
}

TEST_CASE("classifier loader rejects corrupt files") {
  const std::string path = "/tmp/fv_test_corrupt.nblc";
  {
    FILE* f = std::fopen(path.c_str(), "wb");
    const char junk[] = "XBLCxxxxxxxxxxxxxxxxxxxxxxxx";
    std::fwrite(junk, 1, sizeof(junk), f);
    std::fclose(f);
  }
  CHECK_THROWS_AS(load_classifier(path), FormatError);

  const BallClassifier model = train_toy_classifier();
  save_classifier(model, path);
  // Truncate the valid file.
  {
    FILE* f = std::fopen(path.c_str(), "rb+");
    std::fseek(f, 0, SEEK_END);
    const long size = std::ftell(f);
    std::fclose(f);
    REQUIRE(truncate(path.c_str(), size / 2) == 0);
  }
  CHECK_THROWS_AS(load_classifier(path), FormatError);
  CHECK_THROWS_AS(load_classifier("/tmp/fv_does_not_exist.nblc"), IoError);
  std::remove(path.c_str());
}

TEST_CASE("field boundary wraps the rendered field") {
  const CameraModel cam = test_camera();
  const FieldSpec field;
  SceneConfig cfg = scene_for(cam, {-2.0, 0.0, 0.0}, 19);
  const auto [rgb, gt] = render(cfg, cam, field);

  const Image hsv = rgb_to_hsv(rgb);
  DetectorConfig dcfg;
  const Image labels = classify_colors(hsv, dcfg.colors);
  const FieldBoundary boundary = detect_field_boundary(labels, cam, dcfg);
  REQUIRE(boundary.polygon.size() >= 3);

  int field_in = 0, field_total = 0, back_in = 0, back_total = 0;
  for (int y = 0; y < gt.mask.height; y += 3)
    for (int x = 0; x < gt.mask.width; x += 3) {
      const uint8_t m = gt.mask.at(x, y);
      const Vec2 p{double(x), double(y)};
      if (m == uint8_t(MaskClass::grass) || m == uint8_t(MaskClass::line)) {
        ++field_total;
        field_in += boundary.contains(p) ? 1 : 0;
      } else if (m == uint8_t(MaskClass::background)) {
        ++back_total;
        back_in += boundary.contains(p) ? 1 : 0;
      }
    }
  REQUIRE(field_total > 1000);
  REQUIRE(back_total > 100);
  CHECK(double(field_in) / field_total > 0.95);
  CHECK(double(back_in) / back_total < 0.25);
}

TEST_CASE("detected lines land on real field lines") {
  const CameraModel cam = test_camera();
  const FieldSpec field;
  SceneConfig cfg = scene_for(cam, {-2.0, 0.0, 0.0}, 23);
  const auto [rgb, gt] = render(cfg, cam, field);

  DetectorConfig dcfg;
  const Detections det = detect_frame(rgb, cam, field, nullptr, nullptr, dcfg, 77);
  REQUIRE(!det.lines.empty());

  const FieldLines lines = field_line_segments(field);
  for (const auto& seg : det.lines) {
    // Sample points along each detection; nearly all must lie close to some
    // field line or the centre circle ring, in field coordinates.
    int close = 0;
    const int samples = 9;
    for (int i = 0; i < samples; ++i) {
      const double t = double(i) / (samples - 1);
      const Vec2 f = ego_to_field(gt.pose, seg.p0 + (seg.p1 - seg.p0) * t);
      double d = std::abs((f - lines.circle_center).norm() - lines.circle_radius);
      for (const auto& ref : lines.segments)
        d = std::min(d, point_segment_distance(f, ref.p0, ref.p1));
      close += d < 0.2 ? 1 : 0;
    }
    CHECK(close >= samples - 1);
  }
}

TEST_CASE("centre circle detection from a rendered frame") {
  const CameraModel cam = test_camera();
  const FieldSpec field;
  SceneConfig cfg = scene_for(cam, {-2.2, 0.0, 0.0}, 31);
  const auto [rgb, gt] = render(cfg, cam, field);
  REQUIRE(gt.circle_pixels > 200);

  DetectorConfig dcfg;
  const Detections det = detect_frame(rgb, cam, field, nullptr, nullptr, dcfg, 78);
  REQUIRE(det.circle.has_value());
  REQUIRE(gt.circle_ego.has_value());
  CHECK((det.circle->center - *gt.circle_ego).norm() < 0.2);
}

TEST_CASE("ball candidates on a rendered frame include the real ball") {
  const CameraModel cam = test_camera();
  const FieldSpec field;
  SceneConfig cfg = scene_for(cam, {-2.0, 0.0, 0.0}, 37);
  cfg.ball_position = Vec2{-0.5, 0.4};
  const auto [rgb, gt] = render(cfg, cam, field);
  REQUIRE(gt.ball_pixel.has_value());

  const Image hsv = rgb_to_hsv(rgb);
  DetectorConfig dcfg;
  const Image labels = classify_colors(hsv, dcfg.colors);
  const FieldBoundary boundary = detect_field_boundary(labels, cam, dcfg);

  // Reference histograms taken from the ball itself.
  const std::array<Histogram, 3> ref = {
      disk_histogram(hsv, *gt.ball_pixel, gt.ball_pixel_radius, HsvChannel::H, dcfg.hist_bins.h),
      disk_histogram(hsv, *gt.ball_pixel, gt.ball_pixel_radius, HsvChannel::S, dcfg.hist_bins.s),
      disk_histogram(hsv, *gt.ball_pixel, gt.ball_pixel_radius, HsvChannel::V, dcfg.hist_bins.v),
  };
  const auto candidates = detect_ball_candidates(hsv, labels, boundary, ref, cam, dcfg);
  REQUIRE(!candidates.empty());
  bool hit = false;
  for (const auto& c : candidates) {
    if ((c.center - *gt.ball_pixel).norm() < 4.0) {
      hit = true;
      CHECK(c.radius == doctest::Approx(gt.ball_pixel_radius).epsilon(0.35));
      CHECK(c.arc_coverage >= dcfg.min_arc_coverage);
      CHECK(c.patch.width == dcfg.patch_size);
    }
  }
  CHECK(hit);
}

TEST_CASE("goal posts are located near their true positions") {
  const CameraModel cam = test_camera();
  const FieldSpec field;
  SceneConfig cfg = scene_for(cam, {2.0, 0.0, 0.0}, 41);
  const auto [rgb, gt] = render(cfg, cam, field);
  REQUIRE(!gt.post_ego.empty());

  DetectorConfig dcfg;
  const Detections det = detect_frame(rgb, cam, field, nullptr, nullptr, dcfg, 79);
  REQUIRE(!det.goal_posts.empty());
  for (const auto& p : det.goal_posts) {
    double best = 1e18;
    for (const auto& t : gt.post_ego) best = std::min(best, (p - t).norm());
    CHECK(best < 0.35);
  }
}
