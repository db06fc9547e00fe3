#pragma once

#include <cstdint>

#include "trajguide/oracle.hpp"
#include "trajguide/schedule.hpp"
#include "trajguide/tensor.hpp"

namespace trajguide {

/// One chain's position on the schedule. step_index counts down from
/// schedule.steps() (noise end) to 0 (data end).
struct SamplerState {
  Tensor x;
  std::size_t step_index = 0;
  NoiseSchedule schedule = NoiseSchedule::uniform_flow(1);
  std::uint64_t rng_seed = 0;
};

struct SamplerOptions {
  /// Smallest alpha_bar for which x0 extraction is attempted.
  double alpha_bar_floor = 1e-8;
};

/// x0 = (x_t - sqrt(1 - alpha_bar) * eps) / sqrt(alpha_bar) on a DDIM schedule
/// ((x_t - t * eps) / (1 - t) on a flow schedule), or x0 = x_t - t * v for a
/// velocity oracle on a flow schedule.
Tensor predict_x0(const SamplerState& state, const DenoiserOracle& oracle,
                  const SamplerOptions& options = {});

/// x_{t-1} = sqrt(alpha_bar_prev) * x0 + sqrt(1 - alpha_bar_prev) * eps.
Tensor ddim_update(const Tensor& x0_hat, const Tensor& eps_hat, double alpha_bar_prev);

SamplerState ddim_step(const SamplerState& state, const DenoiserOracle& oracle,
                       const SamplerOptions& options = {});

/// Velocity v = dx/dt of the flow path at the state's grid point.
/// Epsilon oracles are converted with v = (eps - x_t) / (1 - t).
Tensor flow_velocity(const SamplerState& state, const DenoiserOracle& oracle);

/// x_{t - dt} = x_t - dt * v(x_t, t). A perfect denoiser's last step lands on
/// its target exactly.
SamplerState flow_euler_step(const SamplerState& state, const DenoiserOracle& oracle);

/// Velocity in the general (alpha, sigma) form, v = eps - x0, for any schedule.
Tensor velocity_at(const Tensor& x, NoiseLevel level, const DenoiserOracle& oracle,
                   const SamplerOptions& options = {});

/// Inverse of velocity_at: splits (x, v) into the (x0, eps) pair satisfying
/// x = alpha * x0 + sigma * eps and v = eps - x0.
Posterior split_velocity(const Tensor& x, const Tensor& v, NoiseLevel level);

/// Classifier-free guidance: cond + weight * (cond - uncond).
Tensor cfg_combine(const Tensor& cond, const Tensor& uncond, double weight);

/// Runs the schedule to the data end with the sampler matching its kind.
Tensor sample(SamplerState state, const DenoiserOracle& oracle, const SamplerOptions& options = {});

struct EquivalenceOptions {
  Shape shape{1, 1, 4, 4};
  std::uint64_t seed = 0;
  /// Start of the shared t grid; DDIM's alpha_bar = (1 - t)^2 must stay above the floor.
  double t_max = 0.999;
};

struct EquivalenceResult {
  double max_deviation = 0.0;
  Tensor ddim_terminal;
  Tensor flow_terminal;
};

/// Runs DDIM (alpha_bar = (1 - t)^2, epsilon convention) and flow Euler
/// (velocity convention) on one t grid from the same noise draw, each chain
/// starting at its own noise level sigma(t_max) * z, and compares terminals.
EquivalenceResult ddim_fm_equivalence(const DenoiserOracle& oracle, std::size_t steps,
                                      const EquivalenceOptions& options = {});

double ddim_fm_equivalence_check(const DenoiserOracle& oracle, std::size_t steps,
                                 const EquivalenceOptions& options = {});

}  // namespace trajguide
