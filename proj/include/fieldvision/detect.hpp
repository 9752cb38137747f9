#pragma once

#include <optional>
#include <string>
#include <vector>

#include "fieldvision/camera.hpp"
#include "fieldvision/imgproc.hpp"

namespace fv {

// Closed polygon in distorted image coordinates separating field from surroundings.
struct FieldBoundary {
  std::vector<Vec2> polygon;

  bool contains(const Vec2& p) const { return point_in_polygon(p, polygon); }
};

struct BallCandidate {
  Vec2 center;               // pixel
  double radius = 0.0;       // pixels
  double arc_coverage = 0.0;
  double histogram_distance = 0.0;
  Image patch{8, 8, PixelFormat::gray8};
};

// One boosted stage: weighted threshold stumps over HOG descriptor components.
struct ClassifierStump {
  uint32_t feature = 0;
  double threshold = 0.0;
  double polarity = 1.0;  // +1: feature > threshold votes positive
  double alpha = 0.0;
};

struct ClassifierStage {
  std::vector<ClassifierStump> stumps;
  double threshold = 0.0;  // minimum score to pass the stage
};

struct BallClassifier {
  int patch_size = 32;
  HogLayout hog;
  std::vector<ClassifierStage> stages;
};

struct CircleDetection {
  Vec2 center;  // egocentric
  double radius = 0.0;
};

struct Detections {
  FieldBoundary boundary;
  std::vector<LineSegment2D> lines;  // egocentric
  std::optional<CircleDetection> circle;
  std::optional<Vec2> ball;          // egocentric ground contact
  std::vector<Vec2> goal_posts;      // egocentric
};

struct VerifyThresholds {
  int white = 7;
  int green = 7;
  int edge = 6;
};

struct MergeParams {
  double angle_tol = 5.0 * M_PI / 180.0;
  double lateral_tol = 14.0;  // pixels
  double gap_tol = 30.0;      // pixels
};

struct DetectorConfig {
  ColorThresholds colors;
  CannyParams canny;
  HoughParams hough;

  double boundary_min_area_frac = 0.005;  // of the image
  double hull_subdivide_px = 20.0;
  double boundary_rdp_px = 2.0;

  double ball_radius_m = 0.07;
  double radius_tol = 0.5;                // relative band around the expected pixel radius
  double min_candidate_radius_px = 3.0;
  double candidate_rdp_px = 1.5;
  double min_arc_coverage = 1.0 / 3.0;
  double hist_distance_threshold = 0.35;
  HistogramBins hist_bins;

  VerifyThresholds verify;
  double verify_halfwidth_m = 0.05;
  double verify_flank_px = 3.0;           // edge search radius at the flank points
  double min_verify_length_px = 10.0;
  MergeParams merge;

  double short_segment_max_m = 0.5;
  double circle_radius_tol = 0.25;

  double post_min_aspect = 2.5;
  double post_max_tilt = 20.0 * M_PI / 180.0;
  int post_min_pixels = 80;

  int patch_size = 32;
  HogLayout hog;
};

// Convex field outline computed in undistorted coordinates: green-region
// contours are simplified, undistorted, hulled, subdivided and mapped back.
FieldBoundary detect_field_boundary(const Image& labels, const CameraModel& cam,
                                    const DetectorConfig& cfg);

// Plain pixel-space hull over the same contours, as a distortion-unaware baseline.
FieldBoundary naive_field_boundary(const Image& labels, const DetectorConfig& cfg);

// First ball stage: white components filtered by expected size, circular arc
// shape and color histogram similarity to the reference.
std::vector<BallCandidate> detect_ball_candidates(const Image& hsv, const Image& labels,
                                                  const FieldBoundary& boundary,
                                                  const std::array<Histogram, 3>& reference,
                                                  const CameraModel& cam,
                                                  const DetectorConfig& cfg);

// Histogram of one HSV channel over a disk, normalized. Empty disks yield a
// uniform histogram.
Histogram disk_histogram(const Image& hsv, const Vec2& center, double radius, HsvChannel channel,
                         int bins);

// {0, +10, -10, +20, -20} degrees, each plain and mirrored; element 0 is the input.
std::vector<Image> augment_positive(const Image& patch);

struct TrainOptions {
  std::vector<int> stumps_per_stage = {4, 8, 16, 32};
  double stage_pass_rate = 0.99;  // fraction of training positives each stage must keep
};

BallClassifier train_ball_classifier(const std::vector<Image>& positives,
                                     const std::vector<Image>& negatives,
                                     const TrainOptions& opts = {});

struct ClassifyResult {
  bool accepted = false;
  double score = 0.0;  // margin in the last evaluated stage
};

ClassifyResult classify_ball(const Image& patch, const BallClassifier& model);

void save_classifier(const BallClassifier& model, const std::string& path);
BallClassifier load_classifier(const std::string& path);

struct VerifyResult {
  bool pass = false;
  int white = 0;
  int green = 0;
  int edge = 0;
};

// Samples 10 points along the segment; each must sit on white, with green and
// edge response on both flanks at 5 cm world offset.
VerifyResult verify_segment(const LineSegment2D& seg, const Image& labels, const Image& edges,
                            const CameraModel& cam, const DetectorConfig& cfg);

std::vector<LineSegment2D> merge_segments(std::vector<LineSegment2D> segs, double angle_tol,
                                          double lateral_tol, double gap_tol);

// Filled-interior binary mask of a pixel-frame polygon, dilated by margin.
Image rasterize_polygon(const std::vector<Vec2>& polygon, int width, int height, int margin);

struct LineDetectionResult {
  std::vector<LineSegment2D> segments;  // pixel frame, all verified
  std::vector<VerifyResult> reports;
};

LineDetectionResult detect_lines(const Image& hsv, const Image& labels,
                                 const FieldBoundary& boundary, const CameraModel& cam,
                                 const DetectorConfig& cfg, uint64_t seed);

std::optional<CircleDetection> detect_centre_circle(const std::vector<LineSegment2D>& ego_segments,
                                                    const FieldSpec& spec,
                                                    const DetectorConfig& cfg);

std::vector<Vec2> detect_goal_posts(const Image& labels, const FieldBoundary& boundary,
                                    const CameraModel& cam, const DetectorConfig& cfg);

// Full per-frame pipeline over an rgb8 frame. The classifier and reference
// histograms may be omitted, which disables the ball stage.
Detections detect_frame(const Image& rgb, const CameraModel& cam, const FieldSpec& spec,
                        const BallClassifier* classifier,
                        const std::array<Histogram, 3>* ball_reference, const DetectorConfig& cfg,
                        uint64_t seed);

}  // namespace fv
