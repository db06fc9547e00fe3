#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include <Eigen/Geometry>
#include <gtest/gtest.h>

#include "trajguide/error.hpp"
#include "trajguide/traj_eval.hpp"
#include "unit/helpers.hpp"

using namespace trajguide;

namespace {

constexpr double kPi = std::numbers::pi;

Mat3 random_rotation(std::mt19937_64& gen) {
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::Quaterniond q(n(gen), n(gen), n(gen), n(gen));
  return q.normalized().toRotationMatrix();
}

PoseTrajectory random_trajectory(std::size_t n, std::mt19937_64& gen) {
  std::normal_distribution<double> d(0.0, 1.0);
  std::vector<Pose> poses;
  for (std::size_t i = 0; i < n; ++i) poses.push_back(Pose{random_rotation(gen), Vec3(d(gen), d(gen), d(gen))});
  return PoseTrajectory(poses);
}

PoseTrajectory perturbed(const PoseTrajectory& t, std::mt19937_64& gen, double scale) {
  std::normal_distribution<double> d(0.0, scale);
  std::vector<Pose> poses;
  for (const auto& p : t.poses()) {
    const Mat3 dR = axis_angle(Vec3(d(gen), d(gen), d(gen)).normalized(), std::abs(d(gen)));
    poses.push_back(Pose{p.R * dR, p.t + Vec3(d(gen), d(gen), d(gen))});
  }
  return PoseTrajectory(poses);
}

double quaternion_angle(const Mat3& a, const Mat3& b) {
  const Eigen::Quaterniond q(a.transpose() * b);
  return 2.0 * std::atan2(q.vec().norm(), std::abs(q.w()));
}

double rms(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s / v.size());
}

}  // namespace

TEST(Align, IdentityForEqualTrajectories) {
  std::mt19937_64 gen(1);
  const PoseTrajectory t = random_trajectory(6, gen);
  const Alignment a = align_sim3(t, t);
  EXPECT_NEAR(a.transform.s, 1.0, 1e-12);
  EXPECT_LE((a.transform.R - Mat3::Identity()).norm(), 1e-12);
  EXPECT_LE(a.transform.t.norm(), 1e-12);
  EXPECT_LE(ate(a.aligned, t).rmse, 1e-12);
}

TEST(Align, RecoversScaleAndRotation) {
  std::mt19937_64 gen(2);
  const PoseTrajectory ref = random_trajectory(8, gen);
  // est = ref scaled by 2 and turned 30 degrees about z; aligning back needs s = 0.5.
  const Sim3Transform g{2.0, axis_angle(Vec3::UnitZ(), kPi / 6), Vec3::Zero()};
  const Alignment a = align_sim3(g.apply(ref), ref);
  EXPECT_NEAR(a.transform.s, 0.5, 1e-9);
  EXPECT_LE((a.transform.R - g.R.transpose()).norm(), 1e-9);
  EXPECT_LE(ate(a.aligned, ref).rmse, 1e-9);
  EXPECT_LE(rpe_r(a.aligned, ref).rmse, 1e-9);
}

TEST(Align, RecoversRandomSim3) {
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> s(0.2, 5.0);
  std::normal_distribution<double> d(0.0, 3.0);
  for (int trial = 0; trial < 50; ++trial) {
    const PoseTrajectory ref = random_trajectory(3, gen);
    const Sim3Transform g{s(gen), random_rotation(gen), Vec3(d(gen), d(gen), d(gen))};
    const Alignment a = align_sim3(g.inverse().apply(ref), ref);
    EXPECT_NEAR(a.transform.s, g.s, 1e-9 * g.s);
    EXPECT_LE((a.transform.R - g.R).norm(), 1e-9);
    EXPECT_LE((a.transform.t - g.t).norm(), 1e-9 * (1.0 + g.t.norm()));
  }
}

TEST(Align, InvariantToPriorSim3) {
  std::mt19937_64 gen(4);
  const PoseTrajectory ref = random_trajectory(10, gen);
  const PoseTrajectory est = perturbed(ref, gen, 0.05);
  const TrajectoryMetrics m0 = evaluate_trajectory(est, ref);
  const Sim3Transform g{3.7, random_rotation(gen), Vec3(1.0, -2.0, 0.5)};
  const TrajectoryMetrics m1 = evaluate_trajectory(g.apply(est), ref);
  EXPECT_NEAR(m0.ate.rmse, m1.ate.rmse, 1e-9);
  EXPECT_NEAR(m0.rpe_t.rmse, m1.rpe_t.rmse, 1e-9);
  EXPECT_NEAR(m0.rpe_r.rmse, m1.rpe_r.rmse, 1e-9);
}

TEST(Align, DegenerateInputsRaise) {
  std::vector<Pose> line;
  for (int i = 0; i < 4; ++i) line.push_back(Pose{Mat3::Identity(), Vec3(i, 0.0, 0.0)});
  const PoseTrajectory l(line);
  EXPECT_THROW(align_sim3(l, l), Error);
  std::mt19937_64 gen(5);
  EXPECT_THROW(align_sim3(random_trajectory(2, gen), random_trajectory(2, gen)), Error);
  EXPECT_THROW(align_sim3(random_trajectory(4, gen), random_trajectory(5, gen)), Error);
}

TEST(Ate, HandValues) {
  std::vector<Pose> r(2), e(2);
  e[0].t = Vec3(3.0, 0.0, 0.0);
  e[1].t = Vec3(0.0, 4.0, 0.0);
  const ErrorSeries a = ate(PoseTrajectory(e), PoseTrajectory(r));
  EXPECT_DOUBLE_EQ(a.rmse, std::sqrt(12.5));
  std::vector<Pose> shifted(3), base(3);
  for (int i = 0; i < 3; ++i) {
    base[i].t = Vec3(i, 2.0 * i, 0.0);
    shifted[i].t = base[i].t + Vec3(0.3, -0.4, 1.2);
  }
  EXPECT_NEAR(ate(PoseTrajectory(shifted), PoseTrajectory(base)).rmse, 1.3, 1e-15);
}

TEST(Rpe, SinglePoseOffsetTouchesTwoSteps) {
  std::mt19937_64 gen(6);
  const PoseTrajectory ref = random_trajectory(6, gen);
  std::vector<Pose> est = ref.poses();
  est[3].t += Vec3(0.0, 0.5, 0.0);
  const ErrorSeries e = rpe_t(PoseTrajectory(est), ref);
  ASSERT_EQ(e.values.size(), 5u);
  for (std::size_t i = 0; i < 5; ++i) {
    if (i == 2 || i == 3)
      EXPECT_GT(e.values[i], 0.1);
    else
      EXPECT_EQ(e.values[i], 0.0);
  }
}

TEST(Rpe, StrideMismatch) {
  std::vector<Pose> ref(5), est(5);
  for (int i = 0; i < 5; ++i) {
    ref[i].t = Vec3(i, 0.0, 0.0);
    est[i].t = Vec3(1.1 * i, 0.0, 0.0);
  }
  const ErrorSeries e = rpe_t(PoseTrajectory(est), PoseTrajectory(ref));
  for (double v : e.values) EXPECT_NEAR(v, 0.1, 1e-12);
}

TEST(Rpe, QuarterTurn) {
  std::vector<Pose> ref(3), est(3);
  est[2].R = axis_angle(Vec3(0.3, -1.0, 0.4), kPi / 2);
  const ErrorSeries e = rpe_r(PoseTrajectory(est), PoseTrajectory(ref));
  EXPECT_EQ(e.values[0], 0.0);
  EXPECT_NEAR(e.values[1], 90.0, 1e-12);
}

TEST(Metrics, MatchLoopOracles) {
  std::mt19937_64 gen(7);
  for (int trial = 0; trial < 50; ++trial) {
    const PoseTrajectory ref = random_trajectory(10, gen);
    const PoseTrajectory est = perturbed(ref, gen, 0.1);
    std::vector<double> a, t, r;
    for (std::size_t i = 0; i < 10; ++i) a.push_back((est[i].t - ref[i].t).norm());
    for (std::size_t i = 0; i + 1 < 10; ++i) {
      const Vec3 dr = ref[i].R.transpose() * (ref[i + 1].t - ref[i].t);
      const Vec3 de = est[i].R.transpose() * (est[i + 1].t - est[i].t);
      t.push_back((dr - de).norm());
      r.push_back(quaternion_angle(ref[i].R.transpose() * ref[i + 1].R, est[i].R.transpose() * est[i + 1].R) * 180.0 /
                  kPi);
    }
    EXPECT_NEAR(ate(est, ref).rmse, rms(a), 1e-12);
    EXPECT_NEAR(rpe_t(est, ref).rmse, rms(t), 1e-12);
    const ErrorSeries rr = rpe_r(est, ref);
    EXPECT_NEAR(rr.rmse, rms(r), 1e-9);
    for (std::size_t i = 0; i < r.size(); ++i) EXPECT_NEAR(rr.values[i], r[i], 1e-9);
  }
}

TEST(Metrics, IdenticalScoresZero) {
  std::mt19937_64 gen(8);
  const PoseTrajectory t = random_trajectory(7, gen);
  const TrajectoryMetrics m = evaluate_trajectory(t, t);
  EXPECT_LE(m.ate.rmse, 1e-12);
  EXPECT_LE(m.rpe_t.rmse, 1e-12);
  EXPECT_LE(m.rpe_r.rmse, 1e-9);
  EXPECT_EQ(rpe_r(t, t).rmse, 0.0);
  EXPECT_EQ(rpe_t(t, t).rmse, 0.0);
  EXPECT_EQ(ate(t, t).rmse, 0.0);
}

TEST(PoseFile, RoundTripAndFormats) {
  std::mt19937_64 gen(9);
  const PoseTrajectory t = random_trajectory(4, gen);
  std::stringstream ss;
  write_poses(ss, t);
  const PoseTrajectory back = parse_poses(ss);
  ASSERT_EQ(back.size(), 4u);
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_LE((back[i].R - t[i].R).norm(), 1e-12);
    EXPECT_LE((back[i].t - t[i].t).norm(), 1e-12);
  }

  std::istringstream quat("# comment\n0 1 2 3 1 0 0 0\n1 0 0 0 0.7071067811865476 0 0.7071067811865476 0\n");
  const PoseTrajectory q = parse_poses(quat);
  ASSERT_EQ(q.size(), 2u);
  EXPECT_EQ(q[0].t, Vec3(1.0, 2.0, 3.0));
  EXPECT_NEAR(rotation_angle(q[1].R, Mat3::Identity()), kPi / 2, 1e-12);
  EXPECT_EQ(q.timestamps()[1], 1.0);

  std::istringstream bad("0 1 2 3 2 0 0 0\n");
  EXPECT_THROW(parse_poses(bad), Error);
  std::istringstream shortline("0 1 2\n");
  EXPECT_THROW(parse_poses(shortline), Error);
}
