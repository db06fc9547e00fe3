#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "trajguide/geometry.hpp"
#include "trajguide/scene.hpp"
#include "trajguide/tensor.hpp"

namespace trajguide {

struct WarpResult {
  Tensor image;        // [C, 1, H, W]; unobserved pixels are 0
  ValidityMask mask;   // [1, 1, H, W]
  DepthMap depth;      // target-frame z-depth of the winning splat
};

/// Forward splat of a single frame from `src_pose` into `tar_pose`. Each valid
/// source pixel lands on the nearest target pixel; the nearest depth wins and
/// equal depths (within 1e-12) keep the lowest row-major source index.
WarpResult warp(const Tensor& src, const DepthMap& depth, const CameraPose& src_pose, const CameraPose& tar_pose);

struct SequenceWarp {
  Tensor video;        // [C, T, H, W]
  ValidityMask masks;  // [1, T, H, W]
};

SequenceWarp warp_sequence(const Tensor& frames, std::span<const DepthMap> depths,
                           std::span<const CameraPose> src_poses, std::span<const CameraPose> tar_poses);

/// Map from pixel-space guidance video to latent space.
struct LatentEmbedding {
  std::size_t pool = 1;
  bool channel_mix = false;
  std::uint64_t mix_seed = 0;

  friend bool operator==(const LatentEmbedding&, const LatentEmbedding&) = default;
};

/// Haar-distributed orthogonal matrix from the keyed generator.
Eigen::MatrixXd random_orthogonal(std::size_t n, std::uint64_t seed);

/// Average-pools H, W by `pool` and applies the optional orthogonal mix.
Tensor embed_video(const Tensor& video, const LatentEmbedding& embedding);
/// A latent cell is observed only if every pixel of its pooling window is.
ValidityMask embed_mask(const ValidityMask& mask, std::size_t pool);

}  // namespace trajguide
