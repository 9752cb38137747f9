#include "fieldvision/geometry.hpp"

#include <cmath>

namespace fv {

Mat3 Mat3::rot_x(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Mat3 r;
  r.m = {1, 0, 0, 0, c, -s, 0, s, c};
  return r;
}

Mat3 Mat3::rot_y(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Mat3 r;
  r.m = {c, 0, s, 0, 1, 0, -s, 0, c};
  return r;
}

Mat3 Mat3::rot_z(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Mat3 r;
  r.m = {c, -s, 0, s, c, 0, 0, 0, 1};
  return r;
}

Mat3 Mat3::from_rpy(double roll, double pitch, double yaw) {
  return rot_z(yaw) * rot_y(pitch) * rot_x(roll);
}

Mat3 Mat3::operator*(const Mat3& o) const {
  Mat3 r;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      double s = 0.0;
      for (int k = 0; k < 3; ++k) s += (*this)(i, k) * o(k, j);
      r(i, j) = s;
    }
  }
  return r;
}

Mat3 Mat3::transposed() const {
  Mat3 r;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) r(i, j) = (*this)(j, i);
  return r;
}

double normalize_angle(double a) {
  double r = std::fmod(a, 2.0 * M_PI);
  if (r <= -M_PI) r += 2.0 * M_PI;
  if (r > M_PI) r -= 2.0 * M_PI;
  // fmod can leave exactly -pi for inputs like -3*pi; map to +pi.
  if (r == -M_PI) r = M_PI;
  return r;
}

Vec2 ego_to_field(const Pose2D& pose, const Vec2& p) {
  const double c = std::cos(pose.theta), s = std::sin(pose.theta);
  return {pose.x + c * p.x - s * p.y, pose.y + s * p.x + c * p.y};
}

Vec2 field_to_ego(const Pose2D& pose, const Vec2& p) {
  const double c = std::cos(pose.theta), s = std::sin(pose.theta);
  const double dx = p.x - pose.x, dy = p.y - pose.y;
  return {c * dx + s * dy, -s * dx + c * dy};
}

Pose2D relative_pose(const Pose2D& a, const Pose2D& b) {
  const Vec2 p = field_to_ego(a, {b.x, b.y});
  return {p.x, p.y, angle_diff(b.theta, a.theta)};
}

Pose2D compose_pose(const Pose2D& pose, double dx, double dy, double dtheta) {
  const Vec2 p = ego_to_field(pose, {dx, dy});
  return {p.x, p.y, normalize_angle(pose.theta + dtheta)};
}

void FieldSpec::validate() const {
  if (!(length > width && width > 0.0))
    throw ConfigError("field: length > width > 0 required");
  if (!(line_width > 0.0)) throw ConfigError("field: line_width must be positive");
  if (!(circle_radius > 0.0 && circle_radius < width * 0.5))
    throw ConfigError("field: circle_radius must lie in (0, width/2)");
  if (!(goal_area_length > 0.0 && goal_area_length < length * 0.5))
    throw ConfigError("field: goal_area_length out of range");
  if (!(goal_area_width > 0.0 && goal_area_width <= width))
    throw ConfigError("field: goal_area_width out of range");
  if (!(penalty_mark_x > 0.0 && penalty_mark_x < length * 0.5))
    throw ConfigError("field: penalty_mark_x out of range");
  for (const Vec2& p : goal_post_positions) {
    if (std::abs(p.x) > length * 0.5 + 1e-9 || std::abs(p.y) > width * 0.5 + 1e-9)
      throw ConfigError("field: goal post outside field rectangle");
  }
}

FieldLines field_line_segments(const FieldSpec& spec) {
  spec.validate();
  const double hl = spec.half_length();
  const double hw = spec.half_width();
  const double gw = spec.goal_area_width * 0.5;
  const double gx = hl - spec.goal_area_length;

  FieldLines out;
  auto add = [&out](double x0, double y0, double x1, double y1) {
    out.segments.push_back({{x0, y0}, {x1, y1}, Frame::field});
  };

  // Boundary.
  add(-hl, hw, hl, hw);    // left sideline (+y)
  add(-hl, -hw, hl, -hw);  // right sideline (-y)
  add(hl, -hw, hl, hw);    // opponent goal line
  add(-hl, -hw, -hl, hw);  // own goal line
  // Halfway line.
  add(0.0, -hw, 0.0, hw);
  // Goal areas, both ends.
  for (double s : {1.0, -1.0}) {
    add(s * gx, -gw, s * gx, gw);      // front line
    add(s * gx, gw, s * hl, gw);       // side piece (+y)
    add(s * gx, -gw, s * hl, -gw);     // side piece (-y)
  }

  out.circle_center = {0.0, 0.0};
  out.circle_radius = spec.circle_radius;
  return out;
}

}  // namespace fv
