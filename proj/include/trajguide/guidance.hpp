#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <vector>

#include "trajguide/flow_metrics.hpp"
#include "trajguide/oracle.hpp"
#include "trajguide/rng.hpp"
#include "trajguide/sampler.hpp"
#include "trajguide/schedule.hpp"
#include "trajguide/tensor.hpp"

namespace trajguide {

enum class RenoiseScheduler { kFlowLinear, kDdimSqrt, kCustom };
enum class RenoiseNoise { kReusePerRun, kRedrawPerStep };
enum class DsgNormalization { kRescaleOri, kUnitRenorm };

std::string to_string(RenoiseScheduler s);
std::string to_string(RenoiseNoise n);
std::string to_string(DsgNormalization n);
RenoiseScheduler renoise_scheduler_from_string(const std::string& name);
RenoiseNoise renoise_noise_from_string(const std::string& name);
DsgNormalization dsg_normalization_from_string(const std::string& name);

struct GuidanceConfig {
  /// Trajectory injection (fuse + re-noise). FLF and DSG act on the injected
  /// latent, so with IRR off the run is plain sampling.
  bool irr_enabled = true;
  RenoiseScheduler renoise = RenoiseScheduler::kFlowLinear;
  /// Weight per schedule index (0 = data end) for RenoiseScheduler::kCustom.
  std::vector<double> custom_weights;
  RenoiseNoise renoise_noise = RenoiseNoise::kReusePerRun;
  std::size_t irr_recursions = 1;

  bool flf_enabled = true;
  double lambda_start = 1.5;
  double lambda_end = 0.0;

  bool dsg_enabled = true;
  double rho = 1.0;
  DsgNormalization dsg_normalization = DsgNormalization::kRescaleOri;

  FlowMetricConfig flow_cfg;

  void validate() const;
  friend bool operator==(const GuidanceConfig&, const GuidanceConfig&) = default;
};

/// M * z_traj + (1 - M) * x0_hat, mask broadcast over channels.
Tensor fuse_masked(const Tensor& x0_hat, const Tensor& z_traj, const ValidityMask& mask);

/// w(sigma) at schedule index `step` for the configured scheduler.
double renoise_weight(std::size_t step, const GuidanceConfig& cfg, const NoiseSchedule& schedule);

/// (1 - w) * fused + w * eps with w = renoise_weight(step).
Tensor irr_renoise(const Tensor& fused, const Tensor& eps, std::size_t step, const GuidanceConfig& cfg,
                   const NoiseSchedule& schedule);
Tensor irr_renoise(const Tensor& fused, const Tensor& eps, double w);

/// Selection coefficient for denoising iteration `iteration` of `total`
/// (iteration 0 is the first, noisiest step).
double lambda_at(const GuidanceConfig& cfg, std::size_t iteration, std::size_t total);

struct FlfSelection {
  std::vector<std::size_t> selected;
  double delta = 0.0;
  double mu = 0.0;
  double sigma = 0.0;
};

/// Channels with S >= mu - lambda * sigma (population statistics over
/// scorable channels; 1e-12 slack absorbs rounding in the mean).
FlfSelection flf_select(const ChannelScore& scores, double lambda);
FlfSelection flf_select(const ChannelScore& scores, std::size_t iteration, std::size_t total,
                        const GuidanceConfig& cfg);

/// Masked fusion on the selected channels; the others are copied unchanged.
Tensor flf_update(const Tensor& x0_hat, const Tensor& z_traj, const ValidityMask& masks,
                  const std::vector<std::size_t>& selected);

struct DsgResult {
  Tensor v_corr;
  double alpha = 1.0;
  double beta = 0.0;
  /// False when either field has (near) zero norm and no correction was applied.
  bool defined = true;
};

DsgResult dsg_correct(const Tensor& v_traj, const Tensor& v_ori, double rho,
                      DsgNormalization normalization = DsgNormalization::kRescaleOri);

struct TraceEntry {
  std::size_t step = 0;        // schedule index the step starts from
  double noise_level = 0.0;    // sigma at that index
  double renoise_weight = 0.0;
  std::optional<FlfSelection> selection;
  std::vector<double> channel_scores;  // NaN for unscorable channels
  std::optional<DsgResult> dsg;        // v_corr dropped, scalars kept
  double correction_norm = 0.0;
  double adherence = 0.0;  // mean |x0_hat - z_traj| on observed cells
};

struct GuidanceTrace {
  std::vector<TraceEntry> entries;
  std::size_t channels = 0;

  void append(TraceEntry entry) { entries.push_back(std::move(entry)); }
  std::size_t size() const { return entries.size(); }
};

/// CSV columns: step,noise_level,renoise_weight,delta,mu_s,sigma_s,selected_mask,
/// alpha,beta,correction_norm,adherence. Columns of disabled mechanisms are empty.
void write_trace_csv(std::ostream& os, const GuidanceTrace& trace);

struct GuidedResult {
  Tensor sample;
  GuidanceTrace trace;
};

/// Mean |a - b| over cells where the mask is set (broadcast over channels).
double observed_adherence(const Tensor& a, const Tensor& b, const ValidityMask& mask);

/// Guided sampling from `initial_noise` at the noise end of `schedule`.
/// `rng` supplies per-step re-noise draws when RenoiseNoise::kRedrawPerStep.
GuidedResult guided_sample(const Tensor& initial_noise, const DenoiserOracle& oracle, const Tensor& z_traj,
                           const ValidityMask& masks, const GuidanceConfig& cfg, const NoiseSchedule& schedule,
                           KeyedRng* rng = nullptr);

}  // namespace trajguide
