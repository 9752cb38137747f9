#include <algorithm>
#include <cmath>

#include "fieldvision/localize.hpp"

namespace fv {

namespace {

Vec2 rotate(const Vec2& v, double theta) {
  const double c = std::cos(theta), s = std::sin(theta);
  return {c * v.x - s * v.y, s * v.x + c * v.y};
}

double clamp_delta(double v, double limit) { return std::clamp(v, -limit, limit); }

}  // namespace

void predict(LocState& state, const OdometryDelta& odo, const LocConfig& cfg,
             StepReport& report) {
  if (std::abs(odo.dx) > cfg.max_step_xy || std::abs(odo.dy) > cfg.max_step_xy ||
      std::abs(odo.dtheta) > cfg.max_step_theta) {
    report.odometry_rejected = true;
    return;
  }
  const Vec2 step = rotate({odo.dx, odo.dy}, state.pose.theta);
  state.pose.x += step.x;
  state.pose.y += step.y;
  state.pose.theta = normalize_angle(state.pose.theta + odo.dtheta);
  state.conf_x *= cfg.confidence_decay;
  state.conf_y *= cfg.confidence_decay;
  state.conf_theta *= cfg.confidence_decay;
  ++state.age_x;
  ++state.age_y;
  ++state.age_theta;
}

void update_theta(LocState& state, double magnetometer_heading,
                  const std::vector<LineSegment2D>& ego_lines, const LocConfig& cfg,
                  StepReport& report) {
  const double theta_est = normalize_angle(magnetometer_heading + state.theta_correction);

  double weight_sum = 0.0, residual_sum = 0.0;
  for (const auto& line : ego_lines) {
    const double field_dir = line.angle() + theta_est;
    const double off = std::remainder(field_dir, M_PI / 2);
    const double residual = -off;
    if (std::abs(residual) >= cfg.residual_gate) continue;
    const double w = line.length();
    weight_sum += w;
    residual_sum += w * residual;
  }
  if (weight_sum > 0.0)
    state.theta_correction =
        normalize_angle(state.theta_correction + cfg.theta_gain * residual_sum / weight_sum);

  state.pose.theta = normalize_angle(magnetometer_heading + state.theta_correction);
  state.conf_theta = 1.0;
  state.age_theta = 0;
  report.theta_updated = true;
}

std::vector<LineAxis> classify_lines(double theta, const std::vector<LineSegment2D>& ego_lines,
                                     const LocConfig& cfg) {
  std::vector<LineAxis> out;
  out.reserve(ego_lines.size());
  for (const auto& line : ego_lines) {
    const double field_dir = line.angle() + theta;
    const double to_x = std::abs(std::remainder(field_dir, M_PI));
    const double to_y = std::abs(std::remainder(field_dir - M_PI / 2, M_PI));
    if (to_x <= cfg.axis_gate)
      out.push_back(LineAxis::along_x);
    else if (to_y <= cfg.axis_gate)
      out.push_back(LineAxis::along_y);
    else
      out.push_back(LineAxis::rejected);
  }
  return out;
}

namespace {

struct AlongYLine {
  size_t index;
  double offset_x;  // rotated egocentric x offset of the midpoint, pose independent
  double pred_x;    // offset_x plus current pose x
};

}  // namespace

void update_xy(LocState& state, const Detections& detections,
               const std::vector<LineAxis>& axes, const FieldSpec& spec, const LocConfig& cfg,
               StepReport& report) {
  const double theta = state.pose.theta;
  std::vector<double> innov_x, innov_y;

  if (detections.circle) {
    const Vec2 off = rotate(detections.circle->center, theta);
    innov_x.push_back(-(state.pose.x + off.x));
    innov_y.push_back(-(state.pose.y + off.y));
  }

  for (const Vec2& post : detections.goal_posts) {
    const Vec2 off = rotate(post, theta);
    const double sign = off.x >= 0.0 ? 1.0 : -1.0;
    innov_x.push_back(sign * spec.half_length() - (state.pose.x + off.x));
    const double pred_y = state.pose.y + off.y;
    double best_dy = 1e30, target_y = 0.0;
    for (const Vec2& p : spec.goal_post_positions) {
      if ((p.x >= 0.0 ? 1.0 : -1.0) != sign) continue;
      if (std::abs(p.y - pred_y) < best_dy) {
        best_dy = std::abs(p.y - pred_y);
        target_y = p.y;
      }
    }
    innov_y.push_back(target_y - pred_y);
  }

  std::vector<AlongYLine> along_y;
  for (size_t i = 0; i < detections.lines.size(); ++i) {
    if (i < axes.size() && axes[i] == LineAxis::along_y) {
      const Vec2 mid = detections.lines[i].midpoint();
      const double off_x = rotate(mid, theta).x;
      along_y.push_back({i, off_x, state.pose.x + off_x});
    }
  }

  for (size_t i = 0; i < detections.lines.size(); ++i) {
    if (i >= axes.size()) break;
    const LineSegment2D& line = detections.lines[i];

    if (axes[i] == LineAxis::along_x) {
      if (line.length() < cfg.min_sideline_length) continue;
      const Vec2 mid = line.midpoint();
      const double off_y = rotate(mid, theta).y;
      const double side = off_y >= 0.0 ? 1.0 : -1.0;
      innov_y.push_back(side * spec.half_width() - (state.pose.y + off_y));
      ++report.lines_used;
      continue;
    }
    if (axes[i] != LineAxis::along_y) continue;

    const AlongYLine* self = nullptr;
    for (const auto& l : along_y)
      if (l.index == i) self = &l;

    bool circle_cue = false;
    if (detections.circle) {
      const double circle_x = state.pose.x + rotate(detections.circle->center, theta).x;
      circle_cue = std::abs(circle_x - self->pred_x) <= cfg.circle_match_radius;
    }

    // The pair is identified by its gap alone, so short stubs (centre-circle
    // chords above all) would alias it; only long segments may pair up.
    const AlongYLine* companion = nullptr;
    if (line.length() >= cfg.min_sideline_length) {
      for (const auto& l : along_y) {
        if (l.index == i) continue;
        if (detections.lines[l.index].length() < cfg.min_sideline_length) continue;
        const double gap = std::abs(l.offset_x - self->offset_x);
        if (gap >= cfg.companion_min_gap && gap <= cfg.companion_max_gap) companion = &l;
      }
    }

    bool post_cue = false;
    for (const Vec2& post : detections.goal_posts) {
      const double post_x = state.pose.x + rotate(post, theta).x;
      if (std::abs(post_x - self->pred_x) <= cfg.post_match_radius) post_cue = true;
    }

    if (circle_cue && (companion || post_cue)) continue;  // contradictory cues

    if (circle_cue) {
      innov_x.push_back(-self->pred_x);
      ++report.lines_used;
    } else if (companion) {
      const bool self_is_outer = std::abs(self->pred_x) > std::abs(companion->pred_x);
      const double sign = (self_is_outer ? self->pred_x : companion->pred_x) >= 0.0 ? 1.0 : -1.0;
      const double target =
          self_is_outer ? sign * spec.half_length()
                        : sign * (spec.half_length() - spec.goal_area_length);
      innov_x.push_back(target - self->pred_x);
      ++report.lines_used;
    } else if (post_cue) {
      const double sign = self->offset_x >= 0.0 ? 1.0 : -1.0;
      innov_x.push_back(sign * spec.half_length() - self->pred_x);
      ++report.lines_used;
    }
  }

  for (const auto* axis : {&innov_x, &innov_y}) {
    double lo = 0.0, hi = 0.0;
    for (double v : *axis) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    if (lo < -cfg.alias_guard && hi > cfg.alias_guard) {
      report.alias_skip = true;
      return;
    }
  }

  if (!innov_x.empty()) {
    double mean = 0.0;
    for (double v : innov_x) mean += v;
    mean /= double(innov_x.size());
    state.pose.x += clamp_delta(cfg.xy_gain * mean, cfg.xy_clamp);
    state.conf_x = 1.0;
    state.age_x = 0;
    report.xy_updated = true;
  }
  if (!innov_y.empty()) {
    double mean = 0.0;
    for (double v : innov_y) mean += v;
    mean /= double(innov_y.size());
    state.pose.y += clamp_delta(cfg.xy_gain * mean, cfg.xy_clamp);
    state.conf_y = 1.0;
    state.age_y = 0;
    report.xy_updated = true;
  }

  state.pose.x = std::clamp(state.pose.x, -spec.half_length() - cfg.field_margin,
                            spec.half_length() + cfg.field_margin);
  state.pose.y = std::clamp(state.pose.y, -spec.half_width() - cfg.field_margin,
                            spec.half_width() + cfg.field_margin);
}

StepReport localize_step(LocState& state, const OdometryDelta& odo,
                         const Detections& detections, std::optional<double> magnetometer,
                         const FieldSpec& spec, const LocConfig& cfg) {
  StepReport report;
  predict(state, odo, cfg, report);
  if (magnetometer) update_theta(state, *magnetometer, detections.lines, cfg, report);
  const auto axes = classify_lines(state.pose.theta, detections.lines, cfg);
  update_xy(state, detections, axes, spec, cfg, report);
  return report;
}

}  // namespace fv
