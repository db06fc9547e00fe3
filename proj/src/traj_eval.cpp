#include "trajguide/traj_eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <sstream>

#include <Eigen/SVD>

#include "trajguide/error.hpp"

namespace trajguide {
namespace {

void require_same_length(const PoseTrajectory& a, const PoseTrajectory& b, std::size_t min_len) {
  if (a.size() != b.size())
    throw Error("trajectory length mismatch: " + std::to_string(a.size()) + " vs " + std::to_string(b.size()));
  if (a.size() < min_len) throw Error("trajectory needs at least " + std::to_string(min_len) + " poses");
}

double rmse(const std::vector<double>& v) {
  double acc = 0.0;
  for (double x : v) acc += x * x;
  return std::sqrt(acc / static_cast<double>(v.size()));
}

Eigen::Matrix3Xd positions(const PoseTrajectory& traj) {
  Eigen::Matrix3Xd P(3, static_cast<Eigen::Index>(traj.size()));
  for (std::size_t i = 0; i < traj.size(); ++i) P.col(static_cast<Eigen::Index>(i)) = traj[i].t;
  return P;
}

bool spans_plane(const Eigen::Matrix3Xd& centered) {
  const Eigen::JacobiSVD<Eigen::Matrix3Xd> svd(centered);
  const auto sv = svd.singularValues();
  return sv(0) > 1e-12 && sv(1) > 1e-9 * sv(0);
}

}  // namespace

PoseTrajectory::PoseTrajectory(std::vector<Pose> poses, std::vector<double> timestamps)
    : poses_(std::move(poses)), timestamps_(std::move(timestamps)) {
  if (!timestamps_.empty() && timestamps_.size() != poses_.size())
    throw Error("timestamp count does not match pose count");
  for (std::size_t i = 0; i < poses_.size(); ++i) {
    if (!is_rotation(poses_[i].R)) throw Error("pose " + std::to_string(i) + " has an invalid rotation");
    if (!poses_[i].t.allFinite()) throw Error("pose " + std::to_string(i) + " has a non-finite translation");
  }
}

PoseTrajectory PoseTrajectory::from_cameras(const std::vector<CameraPose>& cameras) {
  std::vector<Pose> poses;
  poses.reserve(cameras.size());
  for (const auto& c : cameras) poses.push_back(Pose::from_camera(c));
  return PoseTrajectory(std::move(poses));
}

PoseTrajectory Sim3Transform::apply(const PoseTrajectory& traj) const {
  std::vector<Pose> out;
  out.reserve(traj.size());
  for (const auto& p : traj.poses()) out.push_back(apply(p));
  return PoseTrajectory(std::move(out), traj.timestamps());
}

Sim3Transform Sim3Transform::inverse() const {
  const Mat3 Rt = R.transpose();
  return Sim3Transform{1.0 / s, Rt, -(Rt * t) / s};
}

Alignment align_sim3(const PoseTrajectory& est, const PoseTrajectory& ref) {
  require_same_length(est, ref, 3);
  const Eigen::Matrix3Xd X = positions(est);
  const Eigen::Matrix3Xd Y = positions(ref);
  const double n = static_cast<double>(est.size());
  const Vec3 mx = X.rowwise().mean();
  const Vec3 my = Y.rowwise().mean();
  const Eigen::Matrix3Xd Xc = X.colwise() - mx;
  const Eigen::Matrix3Xd Yc = Y.colwise() - my;
  if (!spans_plane(Xc) || !spans_plane(Yc)) throw Error("alignment underdetermined: positions are collinear or coincident");

  const Mat3 cov = Yc * Xc.transpose() / n;
  const Eigen::JacobiSVD<Mat3> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 S = Mat3::Identity();
  if (svd.matrixU().determinant() * svd.matrixV().determinant() < 0.0) S(2, 2) = -1.0;
  const double var_x = Xc.squaredNorm() / n;

  Sim3Transform T;
  T.R = svd.matrixU() * S * svd.matrixV().transpose();
  T.s = (svd.singularValues().asDiagonal() * S).trace() / var_x;
  T.t = my - T.s * (T.R * mx);
  return Alignment{T.apply(est), T};
}

ErrorSeries ate(const PoseTrajectory& est_aligned, const PoseTrajectory& ref) {
  require_same_length(est_aligned, ref, 1);
  ErrorSeries out;
  for (std::size_t i = 0; i < ref.size(); ++i) out.values.push_back((ref[i].t - est_aligned[i].t).norm());
  out.rmse = rmse(out.values);
  return out;
}

ErrorSeries rpe_t(const PoseTrajectory& est_aligned, const PoseTrajectory& ref) {
  require_same_length(est_aligned, ref, 2);
  ErrorSeries out;
  for (std::size_t i = 0; i + 1 < ref.size(); ++i) {
    const Pose dr = ref[i].inverse() * ref[i + 1];
    const Pose de = est_aligned[i].inverse() * est_aligned[i + 1];
    out.values.push_back((dr.t - de.t).norm());
  }
  out.rmse = rmse(out.values);
  return out;
}

ErrorSeries rpe_r(const PoseTrajectory& est_aligned, const PoseTrajectory& ref) {
  require_same_length(est_aligned, ref, 2);
  ErrorSeries out;
  for (std::size_t i = 0; i + 1 < ref.size(); ++i) {
    const Mat3 dr = ref[i].R.transpose() * ref[i + 1].R;
    const Mat3 de = est_aligned[i].R.transpose() * est_aligned[i + 1].R;
    out.values.push_back(rotation_angle(dr, de) * 180.0 / std::numbers::pi);
  }
  out.rmse = rmse(out.values);
  return out;
}

TrajectoryMetrics evaluate_trajectory(const PoseTrajectory& est, const PoseTrajectory& ref) {
  const Alignment a = align_sim3(est, ref);
  return TrajectoryMetrics{a.transform, ate(a.aligned, ref), rpe_t(a.aligned, ref), rpe_r(a.aligned, ref)};
}

PoseTrajectory parse_poses(std::istream& is, const std::string& source) {
  std::vector<Pose> poses;
  std::vector<double> stamps;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream ss(line);
    std::vector<double> f;
    double v = 0.0;
    while (ss >> v) f.push_back(v);
    if (!ss.eof()) throw Error(source + ":" + std::to_string(lineno) + ": unparsable field");
    if (f.empty()) continue;
    Pose p;
    if (f.size() == 8) {
      Eigen::Quaterniond q(f[4], f[5], f[6], f[7]);
      const double norm = q.norm();
      if (std::abs(norm - 1.0) > 1e-3)
        throw Error(source + ":" + std::to_string(lineno) + ": quaternion norm " + std::to_string(norm) + " is not 1");
      p.R = q.normalized().toRotationMatrix();
      p.t = Vec3(f[1], f[2], f[3]);
    } else if (f.size() == 13) {
      p.R << f[1], f[2], f[3], f[5], f[6], f[7], f[9], f[10], f[11];
      p.t = Vec3(f[4], f[8], f[12]);
    } else {
      throw Error(source + ":" + std::to_string(lineno) + ": expected 8 or 13 fields, got " + std::to_string(f.size()));
    }
    if (!is_rotation(p.R, 1e-6)) throw Error(source + ":" + std::to_string(lineno) + ": invalid rotation");
    // re-orthonormalize so file rounding does not trip the 1e-9 check
    const Eigen::JacobiSVD<Mat3> svd(p.R, Eigen::ComputeFullU | Eigen::ComputeFullV);
    p.R = svd.matrixU() * svd.matrixV().transpose();
    stamps.push_back(f[0]);
    poses.push_back(p);
  }
  return PoseTrajectory(std::move(poses), std::move(stamps));
}

PoseTrajectory read_pose_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open pose file " + path);
  return parse_poses(in, path);
}

void write_poses(std::ostream& os, const PoseTrajectory& traj) {
  os << "# timestamp tx ty tz qw qx qy qz\n" << std::setprecision(17);
  for (std::size_t i = 0; i < traj.size(); ++i) {
    const Eigen::Quaterniond q(traj[i].R);
    const double ts = traj.timestamps().empty() ? static_cast<double>(i) : traj.timestamps()[i];
    os << ts << ' ' << traj[i].t.x() << ' ' << traj[i].t.y() << ' ' << traj[i].t.z() << ' ' << q.w() << ' ' << q.x()
       << ' ' << q.y() << ' ' << q.z() << '\n';
  }
}

void write_pose_file(const std::string& path, const PoseTrajectory& traj) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write pose file " + path);
  write_poses(out, traj);
}

}  // namespace trajguide
