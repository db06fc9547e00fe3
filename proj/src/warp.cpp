#include "trajguide/warp.hpp"

#include <cmath>
#include <limits>

#include <Eigen/QR>

#include "trajguide/error.hpp"
#include "trajguide/rng.hpp"

namespace trajguide {

WarpResult warp(const Tensor& src, const DepthMap& depth, const CameraPose& src_pose, const CameraPose& tar_pose) {
  const Shape& s = src.shape();
  if (s.frames != 1) throw Error("warp expects a single frame [C, 1, H, W], got " + to_string(s));
  if (depth.height() != s.height || depth.width() != s.width)
    throw Error("depth map size does not match source frame");
  require_finite(src, "warp source");

  const std::size_t H = s.height;
  const std::size_t W = s.width;
  WarpResult out{Tensor(Shape{s.channels, 1, H, W}), ValidityMask(Shape{1, 1, H, W}), DepthMap(H, W, 0.0)};
  std::vector<double> zbuf(H * W, std::numeric_limits<double>::infinity());
  std::vector<std::size_t> winner(H * W, std::numeric_limits<std::size_t>::max());

  const Mat3 R_rel = tar_pose.R() * src_pose.R().transpose();
  const Vec3 t_rel = tar_pose.t() - R_rel * src_pose.t();
  const bool same = src_pose.R() == tar_pose.R() && src_pose.t() == tar_pose.t() && src_pose.K() == tar_pose.K();

  for (std::size_t y = 0; y < H; ++y) {
    for (std::size_t x = 0; x < W; ++x) {
      if (!depth.valid(y, x)) continue;
      const double d = depth.at(y, x);
      if (!(d > 0.0) || !std::isfinite(d)) throw Error("warp requires positive depth on valid pixels");
      std::size_t ty = y;
      std::size_t tx = x;
      double z = d;
      if (!same) {
        const Vec3 p = R_rel * src_pose.unproject(static_cast<double>(x), static_cast<double>(y), d) + t_rel;
        if (!(p.z() > 0.0)) continue;
        const Vec2 uv = tar_pose.project_camera(p);
        const double u = std::floor(uv.x() + 0.5);
        const double v = std::floor(uv.y() + 0.5);
        if (!(u >= 0.0 && v >= 0.0 && u < static_cast<double>(W) && v < static_cast<double>(H))) continue;
        tx = static_cast<std::size_t>(u);
        ty = static_cast<std::size_t>(v);
        z = p.z();
      }
      const std::size_t dst = ty * W + tx;
      if (z < zbuf[dst] - 1e-12) {
        zbuf[dst] = z;
        winner[dst] = y * W + x;
      }
    }
  }

  std::size_t hits = 0;
  for (std::size_t dst = 0; dst < H * W; ++dst) {
    if (winner[dst] == std::numeric_limits<std::size_t>::max()) {
      out.depth.set_invalid(dst / W, dst % W);
      continue;
    }
    ++hits;
    const std::size_t sy = winner[dst] / W;
    const std::size_t sx = winner[dst] % W;
    out.mask.at(0, 0, dst / W, dst % W) = 1;
    out.depth.set(dst / W, dst % W, zbuf[dst]);
    for (std::size_t c = 0; c < s.channels; ++c) out.image.at(c, 0, dst / W, dst % W) = src.at(c, 0, sy, sx);
  }
  if (hits == 0) warn("empty warp: no source pixel projects into the target view");
  return out;
}

SequenceWarp warp_sequence(const Tensor& frames, std::span<const DepthMap> depths,
                           std::span<const CameraPose> src_poses, std::span<const CameraPose> tar_poses) {
  const Shape& s = frames.shape();
  if (depths.size() != s.frames || src_poses.size() != s.frames || tar_poses.size() != s.frames)
    throw Error("warp_sequence: frame, depth and pose counts must all equal T = " + std::to_string(s.frames));
  SequenceWarp out{Tensor(s), ValidityMask(Shape{1, s.frames, s.height, s.width})};
  for (std::size_t k = 0; k < s.frames; ++k) {
    const WarpResult w = warp(frames.frame(k), depths[k], src_poses[k], tar_poses[k]);
    out.video.set_frame(k, w.image);
    out.masks.set_frame(k, w.mask);
  }
  return out;
}

Eigen::MatrixXd random_orthogonal(std::size_t n, std::uint64_t seed) {
  if (n == 0) throw Error("orthogonal matrix size must be positive");
  KeyedRng rng(seed);
  const auto draws = rng.gaussian(n * n, NoiseKey{NoisePurpose::kChannelMix, 0, 0});
  Eigen::MatrixXd A(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) A(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = draws[i * n + j];
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(A);
  Eigen::MatrixXd Q = qr.householderQ();
  const Eigen::MatrixXd R = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Eigen::Index j = 0; j < Q.cols(); ++j)
    if (R(j, j) < 0.0) Q.col(j) *= -1.0;
  return Q;
}

Tensor embed_video(const Tensor& video, const LatentEmbedding& embedding) {
  const Shape& s = video.shape();
  const std::size_t p = embedding.pool;
  if (p == 0 || s.height % p != 0 || s.width % p != 0)
    throw Error("pool size " + std::to_string(p) + " must divide the frame size " + to_string(s));
  Tensor pooled(Shape{s.channels, s.frames, s.height / p, s.width / p});
  if (p == 1) {
    pooled = video;
  } else {
    const double inv = 1.0 / static_cast<double>(p * p);
    const Shape& o = pooled.shape();
    for (std::size_t c = 0; c < o.channels; ++c)
      for (std::size_t t = 0; t < o.frames; ++t)
        for (std::size_t y = 0; y < o.height; ++y)
          for (std::size_t x = 0; x < o.width; ++x) {
            double acc = 0.0;
            for (std::size_t dy = 0; dy < p; ++dy)
              for (std::size_t dx = 0; dx < p; ++dx) acc += video.at(c, t, y * p + dy, x * p + dx);
            pooled.at(c, t, y, x) = acc * inv;
          }
  }
  if (!embedding.channel_mix || s.channels == 1) return pooled;

  const Eigen::MatrixXd Q = random_orthogonal(s.channels, embedding.mix_seed);
  const Shape& o = pooled.shape();
  const std::size_t plane = o.frames * o.height * o.width;
  Tensor mixed(o);
  for (std::size_t i = 0; i < plane; ++i)
    for (std::size_t c = 0; c < o.channels; ++c) {
      double acc = 0.0;
      for (std::size_t d = 0; d < o.channels; ++d)
        acc += Q(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(d)) * pooled[d * plane + i];
      mixed[c * plane + i] = acc;
    }
  return mixed;
}

ValidityMask embed_mask(const ValidityMask& mask, std::size_t pool) {
  const Shape& s = mask.shape();
  if (pool == 0 || s.height % pool != 0 || s.width % pool != 0)
    throw Error("pool size " + std::to_string(pool) + " must divide the mask size " + to_string(s));
  if (pool == 1) return mask;
  ValidityMask out(Shape{s.channels, s.frames, s.height / pool, s.width / pool});
  const Shape& o = out.shape();
  for (std::size_t c = 0; c < o.channels; ++c)
    for (std::size_t t = 0; t < o.frames; ++t)
      for (std::size_t y = 0; y < o.height; ++y)
        for (std::size_t x = 0; x < o.width; ++x) {
          std::uint8_t all = 1;
          for (std::size_t dy = 0; dy < pool && all; ++dy)
            for (std::size_t dx = 0; dx < pool && all; ++dx) all = mask.at(c, t, y * pool + dy, x * pool + dx);
          out.at(c, t, y, x) = all;
        }
  return out;
}

}  // namespace trajguide
