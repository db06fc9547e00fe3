#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "trajguide/geometry.hpp"
#include "trajguide/tensor.hpp"

namespace trajguide {

enum class TextureKind { kChecker, kStripes, kValueNoise, kRings, kConstant };

std::string to_string(TextureKind kind);
TextureKind texture_kind_from_string(const std::string& name);

/// Procedural surface pattern. Channel c of a C-channel render evaluates the
/// pattern with a per-channel phase / lattice offset; values lie in [0, 1].
struct Texture {
  TextureKind kind = TextureKind::kValueNoise;
  double scale = 1.0;
  std::uint64_t seed = 0;
  double value = 0.5;

  double evaluate(double s, double t, std::size_t channel) const;
  friend bool operator==(const Texture&, const Texture&) = default;
};

/// Constant-rate rigid motion per frame about the primitive's own center.
struct RigidMotion {
  Vec3 velocity = Vec3::Zero();
  Vec3 angular_velocity = Vec3::Zero();  // axis * radians per frame

  bool is_static() const { return velocity.isZero(0.0) && angular_velocity.isZero(0.0); }
  friend bool operator==(const RigidMotion&, const RigidMotion&) = default;
};

/// Textured rectangle: center, unit normal, in-plane unit axis, half extents.
struct PlanePrimitive {
  Vec3 center = Vec3(0.0, 0.0, 5.0);
  Vec3 normal = Vec3(0.0, 0.0, -1.0);
  Vec3 axis_u = Vec3(1.0, 0.0, 0.0);
  double half_width = 1.0;
  double half_height = 1.0;
  Texture texture;
  RigidMotion motion;
  friend bool operator==(const PlanePrimitive&, const PlanePrimitive&) = default;
};

struct SpherePrimitive {
  Vec3 center = Vec3(0.0, 0.0, 5.0);
  double radius = 1.0;
  Texture texture;
  RigidMotion motion;
  friend bool operator==(const SpherePrimitive&, const SpherePrimitive&) = default;
};

struct SceneSpec {
  std::vector<PlanePrimitive> planes;
  std::vector<SpherePrimitive> spheres;
  std::size_t channels = 3;
  /// Depth and texture value assigned to pixels whose ray hits nothing.
  double far_plane = 100.0;
  double background = 0.0;

  bool empty() const { return planes.empty() && spheres.empty(); }
  bool animated() const;
  /// Throws on degenerate primitives (non-positive extents, non-unit axes).
  void validate() const;
  friend bool operator==(const SceneSpec&, const SceneSpec&) = default;
};

/// H x W z-depth in meters with an explicit validity flag per pixel.
class DepthMap {
 public:
  DepthMap() = default;
  DepthMap(std::size_t height, std::size_t width, double fill = 1.0);

  std::size_t height() const { return height_; }
  std::size_t width() const { return width_; }
  double& at(std::size_t y, std::size_t x) { return values_[y * width_ + x]; }
  double at(std::size_t y, std::size_t x) const { return values_[y * width_ + x]; }
  bool valid(std::size_t y, std::size_t x) const { return valid_[y * width_ + x] != 0; }
  void set_invalid(std::size_t y, std::size_t x) {
    valid_[y * width_ + x] = 0;
    values_[y * width_ + x] = 0.0;
  }
  void set(std::size_t y, std::size_t x, double depth);

  std::span<const double> values() const { return values_; }
  std::span<const std::uint8_t> validity() const { return valid_; }

 private:
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::vector<double> values_;
  std::vector<std::uint8_t> valid_;
};

struct RenderResult {
  Tensor image;  // [C, 1, H, W]
  DepthMap depth;
};

/// Ray-casts the scene at animation time `frame_time` (in frames).
RenderResult render(const SceneSpec& scene, const CameraPose& pose, std::size_t height, std::size_t width,
                    double frame_time = 0.0);

/// Renders one frame per pose (frame index = animation time) into [C, T, H, W].
struct VideoRender {
  Tensor video;
  std::vector<DepthMap> depths;
};
VideoRender render_video(const SceneSpec& scene, std::span<const CameraPose> poses, std::size_t height,
                         std::size_t width, bool animate = true);

enum class TrajectoryKind { kOrbit, kDollyZoom, kArcPan, kCustom };

std::string to_string(TrajectoryKind kind);
TrajectoryKind trajectory_kind_from_string(const std::string& name);

struct TrajectorySpec {
  TrajectoryKind kind = TrajectoryKind::kOrbit;
  std::size_t frames = 2;
  Intrinsics intrinsics;
  Vec3 target = Vec3(0.0, 0.0, 5.0);
  /// Orbit / arc radius, and the starting distance of a dolly zoom.
  double radius = 5.0;
  double start_deg = 0.0;
  double sweep_deg = 10.0;
  /// Vertical offset of the camera path (world y, y points down).
  double height = 0.0;
  /// Dolly zoom end distance; focal length scales with distance.
  double end_distance = 4.0;
  /// Extra yaw applied linearly over an arc-pan.
  double pan_deg = 0.0;
  std::vector<CameraPose> custom;
  double max_rotation_step_deg = 30.0;
  double max_translation_step = 2.0;

  friend bool operator==(const TrajectorySpec&, const TrajectorySpec&) = default;
};

/// Pose k of an orbit, valid for any k (k = frames wraps a full 360 degree orbit).
CameraPose orbit_pose(const TrajectorySpec& spec, double k);

std::vector<CameraPose> make_trajectory(const TrajectorySpec& spec);

}  // namespace trajguide
