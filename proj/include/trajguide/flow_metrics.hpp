#pragma once

#include <array>
#include <iosfwd>
#include <vector>

#include "trajguide/flow.hpp"
#include "trajguide/tensor.hpp"

namespace trajguide {

enum class FlOutlierRule { kAny, kAll };

struct FlowMetricConfig {
  double n_E = 10.0;
  double n_A_deg = 30.0;
  double n_F = 0.5;
  std::array<double, 3> gamma{0.4, 0.3, 0.3};
  double fl_epe_threshold = 3.0;
  double fl_rel_threshold = 0.05;
  /// kAny flags a pixel when either threshold is exceeded; kAll needs both.
  FlOutlierRule fl_rule = FlOutlierRule::kAny;
  FlowParams flow;

  double n_A_rad() const;
  void validate() const;
  friend bool operator==(const FlowMetricConfig&, const FlowMetricConfig&) = default;
};

/// Pixels below this norm have no direction and are left out of the angular error.
inline constexpr double kZeroFlowNorm = 1e-8;

/// Masks are [1, T-1, H, W] over the flow's frame pairs.
double masked_epe(const FlowField& pred, const FlowField& gt, const ValidityMask& mask);
double masked_ae(const FlowField& pred, const FlowField& gt, const ValidityMask& mask);
double fl_all(const FlowField& pred, const FlowField& gt, const ValidityMask& mask, const FlowMetricConfig& cfg);

/// Normalized combination sum_k gamma_k (1 - min(metric_k / n_k, 1)); `ae` in radians.
double similarity_score(double epe, double ae, double fl, const FlowMetricConfig& cfg);

/// Pair mask for channel `c`: a pixel of pair (t, t+1) is valid when observed in both frames.
ValidityMask pair_mask(const ValidityMask& frame_mask, std::size_t channel);

struct ChannelRecord {
  bool scorable = false;
  double score = 0.0;
  double epe = 0.0;
  double ae = 0.0;
  double fl = 0.0;
  std::size_t valid_count = 0;
  /// Pixels contributing to the angular error; 0 means M-AE was undefined and counted as 0.
  std::size_t angular_count = 0;
  ChannelRange pred_range;
  ChannelRange gt_range;
};

struct ChannelScore {
  std::vector<ChannelRecord> channels;

  std::size_t scorable_count() const;
};

/// Reference flows of every channel of `z_traj`, computed once per run.
struct ReferenceFlows {
  std::vector<FlowField> flows;
  std::vector<ChannelRange> ranges;
};
ReferenceFlows reference_flows(const Tensor& z_traj, const FlowParams& params);

ChannelScore channel_scores(const Tensor& x0_hat, const Tensor& z_traj, const ValidityMask& masks,
                            const FlowMetricConfig& cfg);
ChannelScore channel_scores(const Tensor& x0_hat, const ReferenceFlows& reference, const ValidityMask& masks,
                            const FlowMetricConfig& cfg);

/// CSV rows `step,channel,scorable,score,epe,ae,fl,valid_count`.
void write_score_csv_header(std::ostream& os);
void write_score_csv_rows(std::ostream& os, std::size_t step, const ChannelScore& scores);

}  // namespace trajguide
