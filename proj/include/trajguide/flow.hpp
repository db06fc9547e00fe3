#pragma once

#include <string>

#include "trajguide/tensor.hpp"

namespace trajguide {

/// Polynomial-expansion dense flow parameters.
struct FlowParams {
  std::size_t levels = 3;
  double pyr_scale = 0.5;
  std::size_t window = 15;
  std::size_t iterations = 3;
  std::size_t poly_n = 5;
  double poly_sigma = 1.1;

  void validate() const;
  friend bool operator==(const FlowParams&, const FlowParams&) = default;
};

/// Dense flow between consecutive frames, stored as [2, T-1, H, W]:
/// channel 0 is the horizontal (u) and channel 1 the vertical (v) component
/// in pixels per frame.
using FlowField = Tensor;

struct ChannelRange {
  double min = 0.0;
  double max = 0.0;
};

/// Rescales a [1, T, H, W] channel so its values span [0, 255]; a constant
/// channel maps to 0. Returns the original range.
ChannelRange normalize_channel(Tensor& channel);

/// Flow of the frame pair (a -> b); both are H x W planes in row-major order.
/// Inputs are used as given (no normalization).
void estimate_pair_flow(std::span<const double> a, std::span<const double> b, std::size_t height,
                        std::size_t width, const FlowParams& params, std::span<double> u, std::span<double> v);

/// Min-max normalizes the channel, then estimates flow for each consecutive
/// frame pair.
FlowField estimate_flow(const Tensor& channel, const FlowParams& params = {});

}  // namespace trajguide
