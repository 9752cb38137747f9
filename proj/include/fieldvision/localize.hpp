#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "fieldvision/detect.hpp"
#include "fieldvision/geometry.hpp"

namespace fv {

struct LocConfig {
  double theta_gain = 0.2;
  double xy_gain = 0.3;
  double xy_clamp = 0.5;                    // metres per axis per frame
  double residual_gate = M_PI / 4;          // heading residuals at or past this are dropped
  double axis_gate = 20.0 * M_PI / 180.0;   // max deviation from an axis direction
  double confidence_decay = 0.99;
  double max_step_xy = 0.1;
  double max_step_theta = 0.2;
  double min_sideline_length = 1.2;         // world metres before a line may pick a sideline
  double circle_match_radius = 1.0;
  double companion_min_gap = 0.6;
  double companion_max_gap = 1.4;
  double post_match_radius = 0.7;
  double alias_guard = 1.0;
  double field_margin = 1.0;
};

struct LocState {
  Pose2D pose;
  double theta_correction = 0.0;  // magnetometer bias estimate, kept in (-pi, pi]
  double conf_x = 0.0;
  double conf_y = 0.0;
  double conf_theta = 0.0;
  int age_x = 0;
  int age_y = 0;
  int age_theta = 0;
};

// Axis a field line runs along once rotated into the field frame.
// along_x lines have constant field y (sidelines), along_y constant field x
// (halfway, goal-area and goal lines).
enum class LineAxis : uint8_t { along_x, along_y, rejected };

struct StepReport {
  bool odometry_rejected = false;
  bool theta_updated = false;
  bool xy_updated = false;
  bool alias_skip = false;
  int lines_used = 0;
};

void predict(LocState& state, const OdometryDelta& odo, const LocConfig& cfg,
             StepReport& report);

void update_theta(LocState& state, double magnetometer_heading,
                  const std::vector<LineSegment2D>& ego_lines, const LocConfig& cfg,
                  StepReport& report);

std::vector<LineAxis> classify_lines(double theta, const std::vector<LineSegment2D>& ego_lines,
                                     const LocConfig& cfg);

void update_xy(LocState& state, const Detections& detections,
               const std::vector<LineAxis>& axes, const FieldSpec& spec, const LocConfig& cfg,
               StepReport& report);

StepReport localize_step(LocState& state, const OdometryDelta& odo,
                         const Detections& detections, std::optional<double> magnetometer,
                         const FieldSpec& spec, const LocConfig& cfg);

}  // namespace fv
