#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "trajguide/guidance.hpp"
#include "trajguide/scene.hpp"
#include "trajguide/schedule.hpp"
#include "trajguide/warp.hpp"

namespace trajguide {

/// Alternative video used as an extra mixture component.
struct DistractorSpec {
  std::optional<TrajectorySpec> trajectory;  // defaults to the main trajectory
  std::uint64_t texture_seed_shift = 0;

  friend bool operator==(const DistractorSpec&, const DistractorSpec&) = default;
};

enum class OracleChoice { kGaussianMixture, kTabulated, kIsotropicGaussian, kConstantEps };

std::string to_string(OracleChoice o);

struct OracleSpec {
  OracleChoice kind = OracleChoice::kGaussianMixture;
  OutputConvention convention = OutputConvention::kVelocity;
  /// Component variance (mixture) or data variance (isotropic).
  double variance = 1e-4;
  double mean = 0.0;
  double eps = 0.0;
  std::vector<DistractorSpec> distractors;

  friend bool operator==(const OracleSpec&, const OracleSpec&) = default;
};

struct ScheduleSpec {
  ScheduleKind kind = ScheduleKind::kLinearFlow;
  std::size_t steps = 50;
  double t_max = 1.0;

  NoiseSchedule build() const;
  friend bool operator==(const ScheduleSpec&, const ScheduleSpec&) = default;
};

/// Additive Gaussian noise on selected channels of the trajectory latent,
/// standing in for unreliable warped content.
struct CorruptionSpec {
  std::vector<std::size_t> channels;
  double noise_sd = 0.0;
  std::uint64_t seed = 0;

  friend bool operator==(const CorruptionSpec&, const CorruptionSpec&) = default;
};

enum class MaskSource { kWarp, kLeftHalf, kFull };
enum class GuidanceSource { kFirstFrame, kPerFrame };

struct MaskSpec {
  MaskSource source = MaskSource::kWarp;
  /// Store one mask per latent channel instead of a shared spatial mask.
  bool per_channel = false;

  friend bool operator==(const MaskSpec&, const MaskSpec&) = default;
};

struct ExperimentConfig {
  std::string name = "experiment";
  std::size_t height = 32;
  std::size_t width = 32;
  SceneSpec scene;
  TrajectorySpec trajectory;
  /// kFirstFrame warps the first target frame to every pose; kPerFrame warps
  /// frame k of a static camera at the first pose (keeps object motion).
  GuidanceSource guidance_source = GuidanceSource::kFirstFrame;
  LatentEmbedding embedding;
  CorruptionSpec corruption;
  MaskSpec mask;
  ScheduleSpec schedule;
  OracleSpec oracle;
  GuidanceConfig guidance;
  std::vector<std::uint64_t> seeds{0};
  /// Mechanisms to toggle: any of "irr", "flf", "dsg". Each listed one doubles
  /// the cell count; unlisted ones keep their value from `guidance`.
  std::vector<std::string> ablation;
  std::string output_dir = "runs";
  std::size_t parallel = 1;
  /// Optional external pose file evaluated against the target trajectory.
  std::string estimated_poses;

  /// Throws trajguide::Error describing the first violated constraint.
  void validate() const;
  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config(const std::filesystem::path& path);
/// A bare guidance block, validated on its own.
GuidanceConfig parse_guidance_config(const std::string& json_text);
std::string config_to_json(const ExperimentConfig& cfg, int indent = 2);

/// Serialized config without the placement-only fields output_dir and parallel.
std::string canonical_config_json(const ExperimentConfig& cfg, int indent = 2);
/// SHA-256 of the canonical JSON without output_dir and parallel.
std::string config_hash(const ExperimentConfig& cfg);

/// Parses "irr,flf,dsg" style lists.
std::vector<std::string> parse_ablation_list(const std::string& text);

}  // namespace trajguide
