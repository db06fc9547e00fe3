#include "trajguide/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "trajguide/error.hpp"

namespace trajguide {

Mat3 Intrinsics::matrix() const {
  Mat3 K;
  K << fx, 0.0, cx, 0.0, fy, cy, 0.0, 0.0, 1.0;
  return K;
}

Intrinsics Intrinsics::from_fov(double hfov_deg, std::size_t height, std::size_t width) {
  if (!(hfov_deg > 0.0 && hfov_deg < 180.0)) throw Error("field of view must lie in (0, 180) degrees");
  const double f = 0.5 * static_cast<double>(width) / std::tan(0.5 * hfov_deg * std::numbers::pi / 180.0);
  return Intrinsics{f, f, 0.5 * (static_cast<double>(width) - 1.0), 0.5 * (static_cast<double>(height) - 1.0)};
}

bool is_rotation(const Mat3& R, double tol) {
  if (!R.allFinite()) return false;
  const double orth = (R.transpose() * R - Mat3::Identity()).cwiseAbs().maxCoeff();
  return orth <= tol && std::abs(R.determinant() - 1.0) <= tol;
}

CameraPose::CameraPose(const Mat3& K, const Mat3& R, const Vec3& t) : K_(K), R_(R), t_(t) {
  if (!is_rotation(R)) throw Error("camera rotation is not a proper rotation");
  if (!t.allFinite()) throw Error("camera translation is not finite");
  if (!K.allFinite() || !(K(0, 0) > 0.0) || !(K(1, 1) > 0.0) || K(1, 0) != 0.0 || K(2, 0) != 0.0 ||
      K(2, 1) != 0.0 || K(2, 2) != 1.0)
    throw Error("intrinsics must be an upper-triangular pinhole matrix with fx, fy > 0");
  K_inv_ = K.inverse();
}

CameraPose::CameraPose(const Intrinsics& intrinsics, const Mat3& R, const Vec3& t)
    : CameraPose(intrinsics.matrix(), R, t) {}

Intrinsics CameraPose::intrinsics() const { return Intrinsics{K_(0, 0), K_(1, 1), K_(0, 2), K_(1, 2)}; }

Vec2 CameraPose::project_camera(const Vec3& camera) const {
  const Vec3 h = K_ * camera;
  return Vec2(h.x() / h.z(), h.y() / h.z());
}

Vec3 CameraPose::unproject(double u, double v, double depth) const {
  Vec3 ray = K_inv_ * Vec3(u, v, 1.0);
  return ray * (depth / ray.z());
}

CameraPose look_at(const Vec3& eye, const Vec3& target, const Intrinsics& intrinsics, const Vec3& up) {
  const Vec3 forward = target - eye;
  if (forward.norm() < 1e-12) throw Error("look_at: eye coincides with target");
  const Vec3 z = forward.normalized();
  // image-up is camera -y, so camera +x = z x up
  Vec3 x = z.cross(up);
  if (x.norm() < 1e-12) throw Error("look_at: up vector parallel to viewing direction");
  x.normalize();
  const Vec3 y = z.cross(x);
  Mat3 R;
  R.row(0) = x.transpose();
  R.row(1) = y.transpose();
  R.row(2) = z.transpose();
  return CameraPose(intrinsics, R, -R * eye);
}

Mat3 axis_angle(const Vec3& axis, double angle_rad) {
  if (axis.norm() < 1e-15) return Mat3::Identity();
  return Eigen::AngleAxisd(angle_rad, axis.normalized()).toRotationMatrix();
}

double rotation_angle(const Mat3& a, const Mat3& b) {
  const Mat3 d = a.transpose() * b;
  const Vec3 axis(d(2, 1) - d(1, 2), d(0, 2) - d(2, 0), d(1, 0) - d(0, 1));
  return std::atan2(0.5 * axis.norm(), 0.5 * (d.trace() - 1.0));
}

}  // namespace trajguide
