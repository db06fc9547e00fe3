#include "trajguide/scene.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "trajguide/error.hpp"

namespace trajguide {
namespace {

constexpr double kPi = std::numbers::pi;

std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

double lattice(std::uint64_t seed, std::size_t channel, std::int64_t i, std::int64_t j) {
  std::uint64_t h = mix64(seed ^ mix64(channel + 0x51ULL));
  h = mix64(h ^ static_cast<std::uint64_t>(i));
  h = mix64(h ^ static_cast<std::uint64_t>(j));
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

double smooth(double a) { return a * a * (3.0 - 2.0 * a); }

double value_noise(std::uint64_t seed, std::size_t channel, double s, double t) {
  const double fs = std::floor(s);
  const double ft = std::floor(t);
  const auto i = static_cast<std::int64_t>(fs);
  const auto j = static_cast<std::int64_t>(ft);
  const double a = smooth(s - fs);
  const double b = smooth(t - ft);
  const double v00 = lattice(seed, channel, i, j);
  const double v10 = lattice(seed, channel, i + 1, j);
  const double v01 = lattice(seed, channel, i, j + 1);
  const double v11 = lattice(seed, channel, i + 1, j + 1);
  return (1 - b) * ((1 - a) * v00 + a * v10) + b * ((1 - a) * v01 + a * v11);
}

struct Hit {
  double depth = std::numeric_limits<double>::infinity();
  double s = 0.0;
  double t = 0.0;
  const Texture* texture = nullptr;
};

struct PosedPlane {
  Vec3 center, normal, axis_u, axis_v;
  double half_width, half_height;
  const Texture* texture;
};

struct PosedSphere {
  Vec3 center;
  Mat3 orientation;
  double radius;
  const Texture* texture;
};

Mat3 motion_rotation(const RigidMotion& m, double time) {
  const double rate = m.angular_velocity.norm();
  if (rate == 0.0 || time == 0.0) return Mat3::Identity();
  return axis_angle(m.angular_velocity, rate * time);
}

PosedPlane pose_plane(const PlanePrimitive& p, double time) {
  const Mat3 Q = motion_rotation(p.motion, time);
  PosedPlane out;
  out.center = p.center + p.motion.velocity * time;
  out.normal = Q * p.normal;
  out.axis_u = Q * p.axis_u;
  out.axis_v = out.normal.cross(out.axis_u);
  out.half_width = p.half_width;
  out.half_height = p.half_height;
  out.texture = &p.texture;
  return out;
}

PosedSphere pose_sphere(const SpherePrimitive& p, double time) {
  return PosedSphere{p.center + p.motion.velocity * time, motion_rotation(p.motion, time), p.radius, &p.texture};
}

void intersect(const PosedPlane& p, const Vec3& origin, const Vec3& dir, Hit& hit) {
  const double denom = p.normal.dot(dir);
  if (std::abs(denom) < 1e-15) return;
  const double s = p.normal.dot(p.center - origin) / denom;
  if (!(s > 0.0) || s >= hit.depth) return;
  const Vec3 q = origin + s * dir - p.center;
  const double a = q.dot(p.axis_u);
  const double b = q.dot(p.axis_v);
  if (std::abs(a) > p.half_width || std::abs(b) > p.half_height) return;
  hit = Hit{s, a, b, p.texture};
}

void intersect(const PosedSphere& p, const Vec3& origin, const Vec3& dir, Hit& hit) {
  const Vec3 oc = origin - p.center;
  const double A = dir.squaredNorm();
  const double B = 2.0 * dir.dot(oc);
  const double C = oc.squaredNorm() - p.radius * p.radius;
  const double disc = B * B - 4.0 * A * C;
  if (disc < 0.0) return;
  const double root = std::sqrt(disc);
  // numerically stable near root
  const double q = -0.5 * (B + std::copysign(root, B));
  double s0 = q / A;
  double s1 = (q != 0.0) ? C / q : s0;
  if (s0 > s1) std::swap(s0, s1);
  const double s = s0 > 0.0 ? s0 : s1;
  if (!(s > 0.0) || s >= hit.depth) return;
  const Vec3 d = (p.orientation.transpose() * (origin + s * dir - p.center)).normalized();
  hit = Hit{s, p.radius * std::atan2(d.x(), d.z()), p.radius * std::asin(std::clamp(d.y(), -1.0, 1.0)),
            p.texture};
}

}  // namespace

std::string to_string(TextureKind kind) {
  switch (kind) {
    case TextureKind::kChecker: return "checker";
    case TextureKind::kStripes: return "stripes";
    case TextureKind::kValueNoise: return "value_noise";
    case TextureKind::kRings: return "rings";
    case TextureKind::kConstant: return "constant";
  }
  return "unknown";
}

TextureKind texture_kind_from_string(const std::string& name) {
  for (auto k : {TextureKind::kChecker, TextureKind::kStripes, TextureKind::kValueNoise, TextureKind::kRings,
                 TextureKind::kConstant})
    if (to_string(k) == name) return k;
  throw Error("unknown texture kind '" + name + "'");
}

double Texture::evaluate(double s, double t, std::size_t channel) const {
  const double u = s / scale;
  const double v = t / scale;
  const double c = static_cast<double>(channel);
  switch (kind) {
    case TextureKind::kChecker: {
      const auto parity = (static_cast<std::int64_t>(std::floor(u)) + static_cast<std::int64_t>(std::floor(v)) +
                           static_cast<std::int64_t>(channel)) & 1;
      return parity ? 0.8 : 0.2;
    }
    case TextureKind::kStripes: {
      const double theta = c * kPi / 3.0 + static_cast<double>(seed % 7) * 0.1;
      return 0.5 + 0.4 * std::sin(2.0 * kPi * (u * std::cos(theta) + v * std::sin(theta)));
    }
    case TextureKind::kValueNoise: {
      const double n = 0.65 * value_noise(seed, channel, u, v) + 0.35 * value_noise(seed + 1, channel, 2 * u, 2 * v);
      return 0.1 + 0.8 * n;
    }
    case TextureKind::kRings:
      return 0.5 + 0.4 * std::cos(2.0 * kPi * std::hypot(u, v) + c * kPi / 2.0);
    case TextureKind::kConstant:
      return value;
  }
  return value;
}

bool SceneSpec::animated() const {
  return std::any_of(planes.begin(), planes.end(), [](const auto& p) { return !p.motion.is_static(); }) ||
         std::any_of(spheres.begin(), spheres.end(), [](const auto& p) { return !p.motion.is_static(); });
}

void SceneSpec::validate() const {
  if (channels == 0) throw Error("scene must have at least one channel");
  if (!(far_plane > 0.0) || !std::isfinite(far_plane)) throw Error("far plane must be positive and finite");
  if (!std::isfinite(background)) throw Error("background value must be finite");
  auto check_texture = [](const Texture& t) {
    if (!(t.scale > 0.0) || !std::isfinite(t.scale)) throw Error("texture scale must be positive");
  };
  auto check_motion = [](const RigidMotion& m) {
    if (!m.velocity.allFinite() || !m.angular_velocity.allFinite()) throw Error("primitive motion must be finite");
  };
  for (const auto& p : planes) {
    if (!(p.half_width > 0.0) || !(p.half_height > 0.0)) throw Error("plane extent must be positive");
    if (std::abs(p.normal.norm() - 1.0) > 1e-9 || std::abs(p.axis_u.norm() - 1.0) > 1e-9)
      throw Error("plane normal and axis must be unit vectors");
    if (std::abs(p.normal.dot(p.axis_u)) > 1e-9) throw Error("plane axis must be orthogonal to its normal");
    if (!p.center.allFinite()) throw Error("plane center must be finite");
    check_texture(p.texture);
    check_motion(p.motion);
  }
  for (const auto& s : spheres) {
    if (!(s.radius > 0.0) || !std::isfinite(s.radius)) throw Error("sphere radius must be positive");
    if (!s.center.allFinite()) throw Error("sphere center must be finite");
    check_texture(s.texture);
    check_motion(s.motion);
  }
}

DepthMap::DepthMap(std::size_t height, std::size_t width, double fill)
    : height_(height), width_(width), values_(height * width, fill), valid_(height * width, 1) {
  if (height == 0 || width == 0) throw Error("depth map dimensions must be positive");
}

void DepthMap::set(std::size_t y, std::size_t x, double depth) {
  if (!(depth > 0.0) || !std::isfinite(depth)) throw Error("depth must be positive and finite");
  values_[y * width_ + x] = depth;
  valid_[y * width_ + x] = 1;
}

RenderResult render(const SceneSpec& scene, const CameraPose& pose, std::size_t height, std::size_t width,
                    double frame_time) {
  if (scene.empty()) throw Error("cannot render an empty scene");
  scene.validate();
  if (height == 0 || width == 0) throw Error("render resolution must be positive");

  std::vector<PosedPlane> planes;
  std::vector<PosedSphere> spheres;
  for (const auto& p : scene.planes) planes.push_back(pose_plane(p, frame_time));
  for (const auto& s : scene.spheres) spheres.push_back(pose_sphere(s, frame_time));

  const Vec3 origin = pose.center();
  for (const auto& s : spheres)
    if ((origin - s.center).norm() <= s.radius) throw Error("degenerate viewpoint: camera inside a sphere");
  for (const auto& p : planes) {
    const Vec3 q = origin - p.center;
    if (std::abs(q.dot(p.normal)) < 1e-9 && std::abs(q.dot(p.axis_u)) <= p.half_width &&
        std::abs(q.dot(p.axis_v)) <= p.half_height)
      throw Error("degenerate viewpoint: camera lies on a plane");
  }

  const std::size_t C = scene.channels;
  RenderResult out{Tensor(Shape{C, 1, height, width}), DepthMap(height, width)};
  const Mat3 Rt = pose.R().transpose();
  for (std::size_t y = 0; y < height; ++y) {
    for (std::size_t x = 0; x < width; ++x) {
      const Vec3 ray_cam = pose.unproject(static_cast<double>(x), static_cast<double>(y), 1.0);
      const Vec3 dir = Rt * ray_cam;
      Hit hit;
      hit.depth = scene.far_plane;
      for (const auto& p : planes) intersect(p, origin, dir, hit);
      for (const auto& s : spheres) intersect(s, origin, dir, hit);
      out.depth.set(y, x, hit.depth);
      for (std::size_t c = 0; c < C; ++c)
        out.image.at(c, 0, y, x) = hit.texture ? hit.texture->evaluate(hit.s, hit.t, c) : scene.background;
    }
  }
  return out;
}

VideoRender render_video(const SceneSpec& scene, std::span<const CameraPose> poses, std::size_t height,
                         std::size_t width, bool animate) {
  if (poses.empty()) throw Error("render_video needs at least one pose");
  VideoRender out{Tensor(Shape{scene.channels, poses.size(), height, width}), {}};
  for (std::size_t k = 0; k < poses.size(); ++k) {
    auto frame = render(scene, poses[k], height, width, animate ? static_cast<double>(k) : 0.0);
    out.video.set_frame(k, frame.image);
    out.depths.push_back(std::move(frame.depth));
  }
  return out;
}

std::string to_string(TrajectoryKind kind) {
  switch (kind) {
    case TrajectoryKind::kOrbit: return "orbit";
    case TrajectoryKind::kDollyZoom: return "dolly_zoom";
    case TrajectoryKind::kArcPan: return "arc_pan";
    case TrajectoryKind::kCustom: return "custom";
  }
  return "unknown";
}

TrajectoryKind trajectory_kind_from_string(const std::string& name) {
  for (auto k : {TrajectoryKind::kOrbit, TrajectoryKind::kDollyZoom, TrajectoryKind::kArcPan,
                 TrajectoryKind::kCustom})
    if (to_string(k) == name) return k;
  throw Error("unknown trajectory kind '" + name + "'");
}

namespace {

Vec3 arc_eye(const TrajectorySpec& spec, double theta_deg) {
  const double th = theta_deg * kPi / 180.0;
  return spec.target + Vec3(spec.radius * std::sin(th), spec.height, -spec.radius * std::cos(th));
}

double ramp(std::size_t k, std::size_t frames) {
  return frames > 1 ? static_cast<double>(k) / static_cast<double>(frames - 1) : 0.0;
}

void check_steps(const std::vector<CameraPose>& poses, const TrajectorySpec& spec) {
  for (std::size_t k = 1; k < poses.size(); ++k) {
    const double rot = rotation_angle(poses[k - 1].R(), poses[k].R()) * 180.0 / kPi;
    const double tr = (poses[k].center() - poses[k - 1].center()).norm();
    if (rot > spec.max_rotation_step_deg + 1e-9)
      throw Error("trajectory rotation step " + std::to_string(rot) + " deg exceeds bound at frame " +
                  std::to_string(k));
    if (tr > spec.max_translation_step + 1e-9)
      throw Error("trajectory translation step " + std::to_string(tr) + " exceeds bound at frame " +
                  std::to_string(k));
  }
}

}  // namespace

CameraPose orbit_pose(const TrajectorySpec& spec, double k) {
  if (!(spec.radius > 0.0)) throw Error("orbit radius must be positive");
  const double theta = spec.start_deg + spec.sweep_deg * k / static_cast<double>(spec.frames);
  return look_at(arc_eye(spec, theta), spec.target, spec.intrinsics);
}

std::vector<CameraPose> make_trajectory(const TrajectorySpec& spec) {
  if (spec.frames == 0) throw Error("trajectory needs at least one frame");
  std::vector<CameraPose> poses;
  switch (spec.kind) {
    case TrajectoryKind::kOrbit:
      for (std::size_t k = 0; k < spec.frames; ++k) poses.push_back(orbit_pose(spec, static_cast<double>(k)));
      break;
    case TrajectoryKind::kDollyZoom: {
      if (!(spec.radius > 0.0) || !(spec.end_distance > 0.0)) throw Error("dolly distances must be positive");
      for (std::size_t k = 0; k < spec.frames; ++k) {
        const double d = spec.radius + (spec.end_distance - spec.radius) * ramp(k, spec.frames);
        Intrinsics K = spec.intrinsics;
        K.fx *= d / spec.radius;
        K.fy *= d / spec.radius;
        poses.push_back(look_at(spec.target + Vec3(0.0, spec.height, -d), spec.target, K));
      }
      break;
    }
    case TrajectoryKind::kArcPan: {
      if (!(spec.radius > 0.0)) throw Error("arc radius must be positive");
      for (std::size_t k = 0; k < spec.frames; ++k) {
        const double a = ramp(k, spec.frames);
        const Vec3 eye = arc_eye(spec, spec.start_deg + spec.sweep_deg * a);
        const CameraPose base = look_at(eye, spec.target, spec.intrinsics);
        const Mat3 R = axis_angle(Vec3::UnitY(), spec.pan_deg * a * kPi / 180.0) * base.R();
        poses.emplace_back(spec.intrinsics, R, -R * eye);
      }
      break;
    }
    case TrajectoryKind::kCustom:
      if (spec.custom.size() != spec.frames)
        throw Error("custom trajectory has " + std::to_string(spec.custom.size()) + " poses, expected " +
                    std::to_string(spec.frames));
      poses = spec.custom;
      break;
  }
  check_steps(poses, spec);
  return poses;
}

}  // namespace trajguide
