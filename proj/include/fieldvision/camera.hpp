#pragma once

#include "fieldvision/error.hpp"
#include "fieldvision/geometry.hpp"

namespace fv {

struct Intrinsics {
  double focal_x = 560.0;
  double focal_y = 560.0;
  Vec2 principal_point{320.0, 240.0};
  int image_width = 640;
  int image_height = 480;

  void validate() const;

  Vec2 to_pixel(const Vec2& normalized) const {
    return {principal_point.x + focal_x * normalized.x,
            principal_point.y + focal_y * normalized.y};
  }
  Vec2 to_normalized(const Vec2& pixel) const {
    return {(pixel.x - principal_point.x) / focal_x,
            (pixel.y - principal_point.y) / focal_y};
  }
  bool contains(const Vec2& pixel) const {
    return pixel.x >= 0.0 && pixel.y >= 0.0 && pixel.x < image_width && pixel.y < image_height;
  }
};

// Radial polynomial distortion: r_d = r * (1 + k1 r^2 + k2 r^4 + k3 r^6).
// The model is only used inside the radius where the mapping is strictly
// increasing; max_radius() is that bound, found at construction.
class DistortionModel {
 public:
  DistortionModel() { init(); }
  DistortionModel(double k1, double k2, double k3) : k1_(k1), k2_(k2), k3_(k3) { init(); }

  double k1() const { return k1_; }
  double k2() const { return k2_; }
  double k3() const { return k3_; }
  // Largest undistorted normalized radius the model accepts.
  double max_radius() const { return max_radius_; }
  // Largest distorted normalized radius the model can produce.
  double max_distorted_radius() const { return max_distorted_radius_; }

  double scale(double r2) const { return 1.0 + r2 * (k1_ + r2 * (k2_ + r2 * k3_)); }

  // Applies distortion to normalized ray coordinates.
  // Throws OutOfModelError beyond the bijectivity bound.
  Vec2 distort(const Vec2& normalized) const;

  // Inverts distort by damped fixed-point iteration on the radius,
  // tolerance 1e-9, at most 50 iterations. Throws NonConvergenceError.
  Vec2 undistort(const Vec2& distorted) const;

 private:
  void init();

  double k1_ = 0.0, k2_ = 0.0, k3_ = 0.0;
  double max_radius_ = 0.0;
  double max_distorted_radius_ = 0.0;
};

// Simplified head kinematic chain. The camera pose in the egocentric frame is
//   trunk(roll, pitch) * Rz(pan) * Ry(tilt) * camera_mount * correction,
// with positive tilt pitching the camera down. camera_mount carries the
// camera position (including height above ground) and the rotation from the
// optical frame (z forward, x right, y down) into the head frame.
struct ExtrinsicChain {
  double trunk_roll = 0.0;
  double trunk_pitch = 0.0;
  double neck_pan = 0.0;
  double neck_tilt = 0.0;
  Transform3 camera_mount;
  Transform3 correction;  // calibrated offset, identity when uncalibrated

  // Rotation from camera optical axes into head axes.
  static Mat3 optical_to_head();
  // Mount with the camera at the given height, pitched down by mount_pitch
  // and shifted forward by forward meters.
  static Transform3 level_mount(double height, double mount_pitch = 0.0, double forward = 0.0);
};

// Composes the chain into the camera pose in the egocentric frame.
Transform3 camera_pose(const ExtrinsicChain& chain);

// Serialized as 6 numbers: translation xyz in meters, then roll/pitch/yaw in
// radians (intrinsic Rz*Ry*Rx convention).
std::array<double, 6> correction_to_array(const Transform3& t);
Transform3 correction_from_array(const std::array<double, 6>& a);

class CameraModel {
 public:
  CameraModel() = default;
  CameraModel(const Intrinsics& intr, const DistortionModel& dist, const ExtrinsicChain& chain);

  const Intrinsics& intrinsics() const { return intrinsics_; }
  const DistortionModel& distortion() const { return distortion_; }
  const ExtrinsicChain& chain() const { return chain_; }

  // Copy of this camera with a different chain state (per-frame kinematics).
  CameraModel with_chain(const ExtrinsicChain& chain) const;
  // Copy of this camera with the chain correction replaced.
  CameraModel with_correction(const Transform3& correction) const;

  // Projects normalized ray coordinates through distortion and intrinsics.
  Vec2 distort_point(const Vec2& normalized) const;
  // Inverse: pixel back to normalized ray coordinates.
  Vec2 undistort_point(const Vec2& pixel) const;

  Transform3 pose() const { return pose_; }

  // Intersects the viewing ray of a pixel with the ground plane z = 0.
  // Throws NoGroundError for rays parallel to or above the horizon.
  Vec2 pixel_to_ground(const Vec2& pixel) const;

  // Projects an egocentric ground point into the image.
  // Throws NotVisibleError for points at or behind the camera plane.
  Vec2 ground_to_pixel(const Vec2& ground) const;

  // Projects an arbitrary egocentric 3D point into the image.
  Vec2 project_point(const Vec3& point) const;

 private:
  Intrinsics intrinsics_;
  DistortionModel distortion_;
  ExtrinsicChain chain_;
  Transform3 pose_;      // cached camera_pose(chain_)
  Transform3 inv_pose_;
};

}  // namespace fv
