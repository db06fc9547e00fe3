#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "trajguide/geometry.hpp"

namespace trajguide {

/// Camera-to-world pose: x_world = R * x_cam + t.
struct Pose {
  Mat3 R = Mat3::Identity();
  Vec3 t = Vec3::Zero();

  Pose inverse() const { return Pose{R.transpose(), -(R.transpose() * t)}; }
  Pose operator*(const Pose& o) const { return Pose{R * o.R, R * o.t + t}; }
  static Pose from_camera(const CameraPose& camera) { return Pose{camera.R().transpose(), camera.center()}; }
};

class PoseTrajectory {
 public:
  PoseTrajectory() = default;
  /// Throws unless every rotation is proper (1e-9) and translations are finite.
  explicit PoseTrajectory(std::vector<Pose> poses, std::vector<double> timestamps = {});

  static PoseTrajectory from_cameras(const std::vector<CameraPose>& cameras);

  std::size_t size() const { return poses_.size(); }
  const Pose& operator[](std::size_t i) const { return poses_[i]; }
  const std::vector<Pose>& poses() const { return poses_; }
  const std::vector<double>& timestamps() const { return timestamps_; }

 private:
  std::vector<Pose> poses_;
  std::vector<double> timestamps_;
};

/// x -> s * R * x + t.
struct Sim3Transform {
  double s = 1.0;
  Mat3 R = Mat3::Identity();
  Vec3 t = Vec3::Zero();

  Vec3 apply(const Vec3& x) const { return s * (R * x) + t; }
  Pose apply(const Pose& p) const { return Pose{R * p.R, apply(p.t)}; }
  PoseTrajectory apply(const PoseTrajectory& traj) const;
  Sim3Transform inverse() const;
};

struct Alignment {
  PoseTrajectory aligned;
  /// Maps estimated positions onto the reference: ref ~ s * R * est + t.
  Sim3Transform transform;
};

/// Least-squares similarity alignment of estimated to reference positions.
Alignment align_sim3(const PoseTrajectory& est, const PoseTrajectory& ref);

struct ErrorSeries {
  double rmse = 0.0;
  std::vector<double> values;
};

ErrorSeries ate(const PoseTrajectory& est_aligned, const PoseTrajectory& ref);
/// Relative motions dT_i = T_i^-1 T_{i+1}; RMSE over the n-1 steps.
ErrorSeries rpe_t(const PoseTrajectory& est_aligned, const PoseTrajectory& ref);
/// Degrees.
ErrorSeries rpe_r(const PoseTrajectory& est_aligned, const PoseTrajectory& ref);

struct TrajectoryMetrics {
  Sim3Transform transform;
  ErrorSeries ate;
  ErrorSeries rpe_t;
  ErrorSeries rpe_r;
};

/// Aligns, then evaluates all three metrics on the aligned estimate.
TrajectoryMetrics evaluate_trajectory(const PoseTrajectory& est, const PoseTrajectory& ref);

/// `timestamp tx ty tz qw qx qy qz` per line, or `timestamp` followed by the
/// 12 entries of the row-major [R | t] matrix. `#` starts a comment.
PoseTrajectory read_pose_file(const std::string& path);
PoseTrajectory parse_poses(std::istream& is, const std::string& source = "<stream>");
void write_pose_file(const std::string& path, const PoseTrajectory& traj);
void write_poses(std::ostream& os, const PoseTrajectory& traj);

}  // namespace trajguide
