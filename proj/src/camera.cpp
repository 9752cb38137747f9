#include "fieldvision/camera.hpp"

#include <algorithm>
#include <cmath>

namespace fv {
namespace {

constexpr double kUndistortTol = 1e-9;
constexpr int kUndistortMaxIter = 50;
constexpr double kRadiusSearchLimit = 10.0;

}  // namespace

void Intrinsics::validate() const {
  if (!(focal_x > 0.0 && focal_y > 0.0)) throw ConfigError("intrinsics: focal lengths must be positive");
  if (image_width < 8 || image_height < 8) throw ConfigError("intrinsics: image too small");
  if (!contains(principal_point)) throw ConfigError("intrinsics: principal point outside image");
}

void DistortionModel::init() {
  // g(r) = r * scale(r^2); the model is valid while g'(r) > 0.
  auto deriv = [this](double r) {
    const double r2 = r * r;
    return 1.0 + r2 * (3.0 * k1_ + r2 * (5.0 * k2_ + r2 * 7.0 * k3_));
  };

  double bound = kRadiusSearchLimit;
  const int steps = 4000;
  double prev = 0.0;
  for (int i = 1; i <= steps; ++i) {
    const double r = kRadiusSearchLimit * i / steps;
    if (deriv(r) <= 0.0) {
      // Bisect the first sign change of g'.
      double lo = prev, hi = r;
      for (int it = 0; it < 60; ++it) {
        const double mid = 0.5 * (lo + hi);
        (deriv(mid) > 0.0 ? lo : hi) = mid;
      }
      bound = lo;
      break;
    }
    prev = r;
  }
  max_radius_ = bound;
  max_distorted_radius_ = bound * scale(bound * bound);

  // Sanity check over a sample grid: g must be strictly increasing up to the bound.
  double last = -1.0;
  for (int i = 0; i <= 256; ++i) {
    const double r = max_radius_ * i / 256;
    const double rd = r * scale(r * r);
    if (rd <= last) throw ConfigError("distortion: model not bijective inside computed bound");
    last = rd;
  }
}

Vec2 DistortionModel::distort(const Vec2& normalized) const {
  const double r = normalized.norm();
  if (r > max_radius_ * (1.0 + 1e-12))
    throw OutOfModelError("distort: radius beyond bijectivity bound");
  return normalized * scale(r * r);
}

Vec2 DistortionModel::undistort(const Vec2& distorted) const {
  const double rd = distorted.norm();
  if (rd < 1e-15) return distorted;
  if (rd > max_distorted_radius_ * (1.0 + 1e-9))
    throw OutOfModelError("undistort: radius beyond model range");

  // Solve g(r) = rd on [0, max_radius]. Damped fixed-point update
  // r += (rd - g(r)) / g'(r), with g' clamped away from zero.
  double r = rd;
  if (r > max_radius_) r = max_radius_;
  bool converged = false;
  for (int i = 0; i < kUndistortMaxIter; ++i) {
    const double r2 = r * r;
    const double g = r * scale(r2);
    const double resid = rd - g;
    if (std::abs(resid) < kUndistortTol) {
      converged = true;
      break;
    }
    double gp = 1.0 + r2 * (3.0 * k1_ + r2 * (5.0 * k2_ + r2 * 7.0 * k3_));
    if (gp < 1e-6) gp = 1e-6;
    r += resid / gp;
    if (r < 0.0) r = 0.0;
    if (r > max_radius_) r = max_radius_;
  }
  if (!converged) throw NonConvergenceError("undistort: no convergence in 50 iterations");
  return distorted * (r / rd);
}

Mat3 ExtrinsicChain::optical_to_head() {
  // Optical x (right) -> head -y, optical y (down) -> head -z, optical z (forward) -> head x.
  Mat3 r;
  r.m = {0, 0, 1, -1, 0, 0, 0, -1, 0};
  return r;
}

Transform3 ExtrinsicChain::level_mount(double height, double mount_pitch, double forward) {
  return {Mat3::rot_y(mount_pitch) * optical_to_head(), {forward, 0.0, height}};
}

Transform3 camera_pose(const ExtrinsicChain& chain) {
  const Transform3 trunk{Mat3::rot_y(chain.trunk_pitch) * Mat3::rot_x(chain.trunk_roll), {}};
  const Transform3 neck{Mat3::rot_z(chain.neck_pan) * Mat3::rot_y(chain.neck_tilt), {}};
  return trunk.compose(neck).compose(chain.camera_mount).compose(chain.correction);
}

std::array<double, 6> correction_to_array(const Transform3& t) {
  const Mat3& r = t.rotation;
  // Inverse of Rz(yaw)*Ry(pitch)*Rx(roll).
  const double pitch = std::asin(std::clamp(-r(2, 0), -1.0, 1.0));
  double roll, yaw;
  if (std::abs(r(2, 0)) < 1.0 - 1e-12) {
    roll = std::atan2(r(2, 1), r(2, 2));
    yaw = std::atan2(r(1, 0), r(0, 0));
  } else {
    roll = std::atan2(-r(1, 2), r(1, 1));
    yaw = 0.0;
  }
  return {t.translation.x, t.translation.y, t.translation.z, roll, pitch, yaw};
}

Transform3 correction_from_array(const std::array<double, 6>& a) {
  return {Mat3::from_rpy(a[3], a[4], a[5]), {a[0], a[1], a[2]}};
}

CameraModel::CameraModel(const Intrinsics& intr, const DistortionModel& dist,
                         const ExtrinsicChain& chain)
    : intrinsics_(intr), distortion_(dist), chain_(chain) {
  intrinsics_.validate();
  pose_ = camera_pose(chain_);
  inv_pose_ = pose_.inverse();
}

CameraModel CameraModel::with_chain(const ExtrinsicChain& chain) const {
  return CameraModel(intrinsics_, distortion_, chain);
}

CameraModel CameraModel::with_correction(const Transform3& correction) const {
  ExtrinsicChain c = chain_;
  c.correction = correction;
  return CameraModel(intrinsics_, distortion_, c);
}

Vec2 CameraModel::distort_point(const Vec2& normalized) const {
  return intrinsics_.to_pixel(distortion_.distort(normalized));
}

Vec2 CameraModel::undistort_point(const Vec2& pixel) const {
  return distortion_.undistort(intrinsics_.to_normalized(pixel));
}

Vec2 CameraModel::pixel_to_ground(const Vec2& pixel) const {
  const Vec2 n = undistort_point(pixel);
  const Vec3 dir = pose_.rotation * Vec3{n.x, n.y, 1.0};
  const Vec3& origin = pose_.translation;
  if (dir.z >= -1e-12) throw NoGroundError("pixel_to_ground: ray does not reach the ground");
  const double t = -origin.z / dir.z;
  return {origin.x + t * dir.x, origin.y + t * dir.y};
}

Vec2 CameraModel::ground_to_pixel(const Vec2& ground) const {
  return project_point({ground.x, ground.y, 0.0});
}

Vec2 CameraModel::project_point(const Vec3& point) const {
  const Vec3 c = inv_pose_.apply(point);
  if (c.z <= 1e-9) throw NotVisibleError("project: point behind camera plane");
  return distort_point({c.x / c.z, c.y / c.z});
}

}  // namespace fv
