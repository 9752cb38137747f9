#pragma once

#include <array>
#include <cmath>
#include <vector>

#include "fieldvision/error.hpp"

namespace fv {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  Vec2() = default;
  Vec2(double x_, double y_) : x(x_), y(y_) {}

  Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double s) const { return {x * s, y * s}; }
  Vec2 operator/(double s) const { return {x / s, y / s}; }
  Vec2& operator+=(const Vec2& o) {
    x += o.x;
    y += o.y;
    return *this;
  }

  double dot(const Vec2& o) const { return x * o.x + y * o.y; }
  double cross(const Vec2& o) const { return x * o.y - y * o.x; }
  double norm() const { return std::hypot(x, y); }
  double squared_norm() const { return x * x + y * y; }
  Vec2 normalized() const {
    const double n = norm();
    return n > 0.0 ? Vec2{x / n, y / n} : Vec2{0.0, 0.0};
  }
  Vec2 perp() const { return {-y, x}; }
};

inline Vec2 operator*(double s, const Vec2& v) { return v * s; }

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  Vec3() = default;
  Vec3(double x_, double y_, double z_) : x(x_), y(y_), z(z_) {}

  Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }

  double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
  Vec3 cross(const Vec3& o) const {
    return {y * o.z - z * o.y, z * o.x - x * o.z, x * o.y - y * o.x};
  }
  double norm() const { return std::sqrt(x * x + y * y + z * z); }
  Vec3 normalized() const {
    const double n = norm();
    return n > 0.0 ? Vec3{x / n, y / n, z / n} : Vec3{};
  }
};

// Row-major 3x3 matrix, used for rotations.
struct Mat3 {
  std::array<double, 9> m{1, 0, 0, 0, 1, 0, 0, 0, 1};

  static Mat3 identity() { return {}; }
  static Mat3 rot_x(double a);
  static Mat3 rot_y(double a);
  static Mat3 rot_z(double a);
  // Intrinsic roll-pitch-yaw: Rz(yaw) * Ry(pitch) * Rx(roll).
  static Mat3 from_rpy(double roll, double pitch, double yaw);

  double operator()(int r, int c) const { return m[r * 3 + c]; }
  double& operator()(int r, int c) { return m[r * 3 + c]; }

  Mat3 operator*(const Mat3& o) const;
  Vec3 operator*(const Vec3& v) const {
    return {m[0] * v.x + m[1] * v.y + m[2] * v.z,
            m[3] * v.x + m[4] * v.y + m[5] * v.z,
            m[6] * v.x + m[7] * v.y + m[8] * v.z};
  }
  Mat3 transposed() const;
};

// Rigid 3D transform: p' = R * p + t.
struct Transform3 {
  Mat3 rotation;
  Vec3 translation;

  static Transform3 identity() { return {}; }

  Vec3 apply(const Vec3& p) const { return rotation * p + translation; }
  Transform3 compose(const Transform3& o) const {
    return {rotation * o.rotation, rotation * o.translation + translation};
  }
  Transform3 inverse() const {
    Mat3 rt = rotation.transposed();
    Vec3 t = rt * translation;
    return {rt, {-t.x, -t.y, -t.z}};
  }
};

// Wraps an angle into (-pi, pi].
double normalize_angle(double a);

// Smallest signed difference a - b wrapped into (-pi, pi].
inline double angle_diff(double a, double b) { return normalize_angle(a - b); }

// 2D field pose: position in meters, heading in radians, theta kept in (-pi, pi].
struct Pose2D {
  double x = 0.0;
  double y = 0.0;
  double theta = 0.0;

  Pose2D() = default;
  Pose2D(double x_, double y_, double theta_) : x(x_), y(y_), theta(normalize_angle(theta_)) {}
};

// Maps an egocentric point into the field frame given the robot pose.
Vec2 ego_to_field(const Pose2D& pose, const Vec2& p);

// Inverse of ego_to_field.
Vec2 field_to_ego(const Pose2D& pose, const Vec2& p);

// Relative pose of b expressed in the frame of a.
Pose2D relative_pose(const Pose2D& a, const Pose2D& b);

// Composes a pose with an egocentric (dx, dy, dtheta) increment.
Pose2D compose_pose(const Pose2D& pose, double dx, double dy, double dtheta);

// Egocentric frame increment between two consecutive frames.
struct OdometryDelta {
  double dx = 0.0;
  double dy = 0.0;
  double dtheta = 0.0;
};

enum class Frame { pixel, egocentric, field };

struct LineSegment2D {
  Vec2 p0;
  Vec2 p1;
  Frame frame = Frame::pixel;

  Vec2 direction() const { return (p1 - p0).normalized(); }
  Vec2 midpoint() const { return (p0 + p1) * 0.5; }
  double length() const { return (p1 - p0).norm(); }
  // Orientation in [0, pi), segments are undirected.
  double angle() const {
    const Vec2 d = p1 - p0;
    double a = std::atan2(d.y, d.x);
    if (a < 0.0) a += M_PI;
    if (a >= M_PI) a -= M_PI;
    return a;
  }
};

// Metric field geometry. Field frame: origin at the centre circle,
// +x toward the opponent goal, +y left, theta counter-clockwise from +x.
struct FieldSpec {
  double length = 9.0;        // x extent
  double width = 6.0;         // y extent
  double line_width = 0.05;
  double circle_radius = 0.75;
  double goal_area_length = 1.0;  // depth from the goal line into the field
  double goal_area_width = 4.0;
  std::vector<Vec2> goal_post_positions = {{4.5, 1.3}, {4.5, -1.3}, {-4.5, 1.3}, {-4.5, -1.3}};
  double penalty_mark_x = 2.4;

  // Throws ConfigError if the geometry is inconsistent.
  void validate() const;

  double half_length() const { return length * 0.5; }
  double half_width() const { return width * 0.5; }
};

// Line layout of a field: straight segments plus the centre circle,
// which is kept separate rather than being approximated by chords.
struct FieldLines {
  std::vector<LineSegment2D> segments;  // field frame
  Vec2 circle_center{0.0, 0.0};
  double circle_radius = 0.0;
};

// All boundary lines, the halfway line and the goal-area rectangles of a field.
FieldLines field_line_segments(const FieldSpec& spec);

}  // namespace fv
