#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace trajguide {

using Mat3 = Eigen::Matrix3d;
using Vec3 = Eigen::Vector3d;
using Vec2 = Eigen::Vector2d;

/// Pinhole intrinsics. Pixel (row i, col j) has its center at u = j, v = i.
struct Intrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;

  Mat3 matrix() const;
  /// Centered principal point for an H x W image with horizontal field of view `hfov_deg`.
  static Intrinsics from_fov(double hfov_deg, std::size_t height, std::size_t width);

  friend bool operator==(const Intrinsics&, const Intrinsics&) = default;
};

/// Camera with world-to-camera extrinsics: x_cam = R * x_world + t.
/// Camera axes follow the x-right, y-down, z-forward convention.
class CameraPose {
 public:
  CameraPose() = default;
  /// Throws when R is not a proper rotation (1e-9) or K is not a pinhole matrix.
  CameraPose(const Mat3& K, const Mat3& R, const Vec3& t);
  CameraPose(const Intrinsics& intrinsics, const Mat3& R, const Vec3& t);

  const Mat3& K() const { return K_; }
  const Mat3& R() const { return R_; }
  const Vec3& t() const { return t_; }
  Intrinsics intrinsics() const;

  /// Camera center in world coordinates.
  Vec3 center() const { return -R_.transpose() * t_; }

  Vec3 to_camera(const Vec3& world) const { return R_ * world + t_; }
  Vec3 to_world(const Vec3& camera) const { return R_.transpose() * (camera - t_); }

  /// Pixel coordinates (u, v) of a camera-frame point with z > 0.
  Vec2 project_camera(const Vec3& camera) const;
  /// Camera-frame point at z-depth `depth` behind pixel (u, v).
  Vec3 unproject(double u, double v, double depth) const;

  CameraPose with_intrinsics(const Intrinsics& intrinsics) const { return CameraPose(intrinsics, R_, t_); }

  friend bool operator==(const CameraPose& a, const CameraPose& b) {
    return a.K_ == b.K_ && a.R_ == b.R_ && a.t_ == b.t_;
  }

 private:
  Mat3 K_ = Mat3::Identity();
  Mat3 R_ = Mat3::Identity();
  Vec3 t_ = Vec3::Zero();
  Mat3 K_inv_ = Mat3::Identity();
};

/// Camera at `eye` looking at `target`; `up` is the world direction that maps
/// to image-up (camera -y).
CameraPose look_at(const Vec3& eye, const Vec3& target, const Intrinsics& intrinsics,
                   const Vec3& up = Vec3(0.0, -1.0, 0.0));

Mat3 axis_angle(const Vec3& axis, double angle_rad);

/// Geodesic angle between two rotations, radians.
double rotation_angle(const Mat3& a, const Mat3& b);

bool is_rotation(const Mat3& R, double tol = 1e-9);

}  // namespace trajguide
