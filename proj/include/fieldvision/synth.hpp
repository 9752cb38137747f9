#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "fieldvision/calib.hpp"
#include "fieldvision/camera.hpp"
#include "fieldvision/geometry.hpp"
#include "fieldvision/image.hpp"

namespace fv {

// Per-pixel class values used in rendered masks.
enum class MaskClass : uint8_t {
  grass = 0,
  line = 1,
  ball = 2,
  post = 3,
  occluder = 4,
  background = 5,
};

// Axis-aligned box standing on the ground plane, field frame.
struct OccluderBox {
  Vec2 position;          // center of the base
  double size_x = 0.3;
  double size_y = 0.3;
  double height = 0.6;
  uint8_t color[3] = {40, 40, 45};
};

struct SceneConfig {
  Pose2D robot_pose;
  ExtrinsicChain chain;
  std::optional<Vec2> ball_position;  // field frame ground contact point
  double ball_radius = 0.07;
  std::vector<OccluderBox> occluders;
  bool draw_posts = true;
  double post_radius = 0.06;
  double post_height = 0.9;
  double border_margin = 0.7;   // green carpet beyond the boundary lines
  double lighting_gain = 1.0;
  double lighting_offset = 0.0;
  double grass_noise = 10.0;    // 8-bit value-channel amplitude
  double line_wear = 0.25;      // strength of the line brightness mottling
  int blur_radius = 0;          // optional box blur, models a walking robot
  uint64_t seed = 0;
};

// Visible portion of one field line segment, attributed from mask pixels.
struct VisibleSegment {
  int segment_index = -1;   // index into field_line_segments(spec).segments
  LineSegment2D ego;        // visible sub-segment, egocentric frame
  int mask_pixels = 0;
};

struct GroundTruth {
  Pose2D pose;
  Image mask{8, 8, PixelFormat::gray8};

  std::optional<Vec2> ball_ego;       // ground contact point
  std::optional<Vec2> ball_pixel;     // projected sphere center
  double ball_pixel_radius = 0.0;
  int ball_pixels = 0;

  std::vector<Vec2> post_ego;         // posts with >= 50 mask pixels
  std::vector<int> post_pixels;

  std::optional<Vec2> circle_ego;     // centre circle origin, if its ring is visible
  int circle_pixels = 0;

  std::vector<VisibleSegment> segments;
};

// Renders one frame by per-pixel ray casting through the distortion model.
// Identical cfg and seed give byte-identical output.
std::pair<Image, GroundTruth> render(const SceneConfig& cfg, const CameraModel& cam,
                                     const FieldSpec& spec);

struct TrajectoryOptions {
  double odo_noise = 0.0;          // multiplicative sigma on each delta component
  double mag_bias = 0.0;           // radians added to every heading reading
  double mag_noise = 0.0;          // sigma of white heading noise, radians
  std::vector<int> kidnap_frames;  // frames whose preceding jump emits zero odometry
  uint64_t seed = 0;
};

struct TrajectoryFrame {
  Image image{8, 8, PixelFormat::rgb8};
  GroundTruth truth;
  OdometryDelta odometry;   // delta from the previous frame (zero for frame 0)
  double magnetometer = 0.0;
};

// Renders a pose sequence and synthesizes the odometry and magnetometer
// streams a robot would have recorded along it.
std::vector<TrajectoryFrame> render_trajectory(const std::vector<Pose2D>& poses,
                                               const SceneConfig& base, const CameraModel& cam,
                                               const FieldSpec& spec,
                                               const TrajectoryOptions& opts);

// Odometry/magnetometer synthesis without rendering, for scenarios where only
// the motion stream matters.
std::vector<OdometryDelta> make_odometry(const std::vector<Pose2D>& poses,
                                         const TrajectoryOptions& opts);

// Projects known egocentric ground points through a camera whose chain carries
// true_correction on top of its nominal correction; the returned observations
// keep the nominal chain, so the correction is what calibration should find.
// Points that fall outside the image are skipped.
std::vector<CalibObservation> make_calib_observations(
    const CameraModel& cam, const std::vector<ExtrinsicChain>& chain_states,
    const std::vector<Vec2>& ego_points, const Transform3& true_correction, double pixel_noise,
    uint64_t seed);

}  // namespace fv
