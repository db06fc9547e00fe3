#include "trajguide/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "trajguide/error.hpp"
#include "trajguide/rng.hpp"

namespace trajguide {
namespace {

void require_oracle_output(const Tensor& out) {
  if (!out.all_finite()) {
    throw Error("oracle produced non-finite values");
  }
}

void require_index(const SamplerState& state) {
  if (state.step_index > state.schedule.steps()) {
    throw Error("step_index " + std::to_string(state.step_index) + " beyond schedule");
  }
}

}  // namespace

Tensor predict_x0(const SamplerState& state, const DenoiserOracle& oracle, const SamplerOptions& options) {
  require_index(state);
  const std::size_t k = state.step_index;
  const NoiseSchedule& schedule = state.schedule;
  const Tensor& x = state.x;

  if (oracle.convention() == OutputConvention::kVelocity) {
    if (schedule.kind() != ScheduleKind::kLinearFlow) {
      throw Error("velocity oracles need a flow schedule for x0 extraction");
    }
    const double t = schedule.t(k);
    const Tensor v = oracle.output(x, schedule.level(k));
    require_oracle_output(v);
    if (const Tensor* known = oracle.known_data()) {
      return *known;
    }
    Tensor x0(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) {
      x0[i] = x[i] - t * v[i];
    }
    return x0;
  }

  const NoiseLevel level = schedule.level(k);
  if (level.alpha * level.alpha < options.alpha_bar_floor) {
    throw Error("schedule singularity: alpha_bar = " + std::to_string(level.alpha * level.alpha) + " at step " +
                std::to_string(k));
  }
  const Tensor eps = oracle.output(x, level);
  require_oracle_output(eps);
  if (const Tensor* known = oracle.known_data()) {
    return *known;
  }
  Tensor x0(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) {
    x0[i] = (x[i] - level.sigma * eps[i]) / level.alpha;
  }
  return x0;
}

Tensor ddim_update(const Tensor& x0_hat, const Tensor& eps_hat, double alpha_bar_prev) {
  require_same_shape(x0_hat, eps_hat, "ddim_update");
  const double signal = std::sqrt(alpha_bar_prev);
  const double noise = std::sqrt(1.0 - alpha_bar_prev);
  Tensor out(x0_hat.shape());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = signal * x0_hat[i] + noise * eps_hat[i];
  }
  return out;
}

SamplerState ddim_step(const SamplerState& state, const DenoiserOracle& oracle, const SamplerOptions& options) {
  if (state.step_index == 0) {
    throw Error("ddim_step: already at the data end");
  }
  if (state.schedule.kind() != ScheduleKind::kDiscreteDdim) {
    throw Error("ddim_step needs a discrete DDIM schedule");
  }
  if (oracle.convention() != OutputConvention::kEpsilon) {
    throw Error("ddim_step needs an epsilon-prediction oracle");
  }
  const Tensor x0 = predict_x0(state, oracle, options);
  const Tensor eps = oracle.output(state.x, state.schedule.level(state.step_index));
  SamplerState next = state;
  next.step_index = state.step_index - 1;
  next.x = ddim_update(x0, eps, state.schedule.alpha_bar(next.step_index));
  return next;
}

Tensor flow_velocity(const SamplerState& state, const DenoiserOracle& oracle) {
  require_index(state);
  if (state.schedule.kind() != ScheduleKind::kLinearFlow) {
    throw Error("flow sampling needs a flow schedule");
  }
  const std::size_t k = state.step_index;
  const double t = state.schedule.t(k);
  const Tensor out = oracle.output(state.x, state.schedule.level(k));
  require_oracle_output(out);
  if (oracle.convention() == OutputConvention::kVelocity) {
    return out;
  }
  if (t >= 1.0) {
    throw Error("flow endpoint singularity: epsilon conversion undefined at t = 1");
  }
  // dx/dt = (eps - x_t) / (1 - t), which collapses to eps - x0 on the flow path.
  Tensor v(out.shape());
  for (std::size_t i = 0; i < v.size(); ++i) {
    v[i] = (out[i] - state.x[i]) / (1.0 - t);
  }
  return v;
}

SamplerState flow_euler_step(const SamplerState& state, const DenoiserOracle& oracle) {
  if (state.step_index == 0) {
    throw Error("flow_euler_step: already at the data end");
  }
  const Tensor v = flow_velocity(state, oracle);
  const std::size_t k = state.step_index;
  const double dt = state.schedule.t(k) - state.schedule.t(k - 1);
  SamplerState next = state;
  next.step_index = k - 1;
  const Tensor* known = oracle.known_data();
  if (known && state.schedule.t(k - 1) == 0.0) {
    next.x = *known;
    return next;
  }
  for (std::size_t i = 0; i < next.x.size(); ++i) {
    next.x[i] = state.x[i] - dt * v[i];
  }
  return next;
}

Tensor velocity_at(const Tensor& x, NoiseLevel level, const DenoiserOracle& oracle, const SamplerOptions& options) {
  const Tensor out = oracle.output(x, level);
  require_oracle_output(out);
  if (oracle.convention() == OutputConvention::kVelocity) {
    return out;
  }
  if (level.alpha * level.alpha < options.alpha_bar_floor) {
    throw Error("schedule singularity: alpha = " + std::to_string(level.alpha));
  }
  Tensor v(x.shape());
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double x0 = (x[i] - level.sigma * out[i]) / level.alpha;
    v[i] = out[i] - x0;
  }
  return v;
}

Posterior split_velocity(const Tensor& x, const Tensor& v, NoiseLevel level) {
  require_same_shape(x, v, "split_velocity");
  // x = a*x0 + s*eps and eps = x0 + v give x0 = (x - s*v) / (a + s).
  const double denom = level.alpha + level.sigma;
  Posterior p{Tensor(x.shape()), Tensor(x.shape())};
  for (std::size_t i = 0; i < x.size(); ++i) {
    p.x0[i] = (x[i] - level.sigma * v[i]) / denom;
    p.eps[i] = p.x0[i] + v[i];
  }
  return p;
}

Tensor cfg_combine(const Tensor& cond, const Tensor& uncond, double weight) {
  require_same_shape(cond, uncond, "cfg_combine");
  Tensor out(cond.shape());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = cond[i] + weight * (cond[i] - uncond[i]);
  }
  return out;
}

Tensor sample(SamplerState state, const DenoiserOracle& oracle, const SamplerOptions& options) {
  while (state.step_index > 0) {
    state = state.schedule.kind() == ScheduleKind::kDiscreteDdim ? ddim_step(state, oracle, options)
                                                                 : flow_euler_step(state, oracle);
  }
  return std::move(state.x);
}

EquivalenceResult ddim_fm_equivalence(const DenoiserOracle& oracle, std::size_t steps,
                                      const EquivalenceOptions& options) {
  KeyedRng rng(options.seed);
  const Tensor z = rng.gaussian(options.shape, NoiseKey{NoisePurpose::kInitial, 0, 0});

  auto start = [&](const NoiseSchedule& schedule) {
    SamplerState s{Tensor(options.shape), schedule.steps(), schedule, options.seed};
    const double sigma = schedule.level(schedule.steps()).sigma;
    for (std::size_t i = 0; i < z.size(); ++i) {
      s.x[i] = sigma * z[i];
    }
    return s;
  };

  const NoiseSchedule ddim = NoiseSchedule::ddim_from_flow(steps, options.t_max);
  const NoiseSchedule flow = NoiseSchedule::uniform_flow(steps, options.t_max);

  EquivalenceResult result;
  result.ddim_terminal = sample(start(ddim), oracle.with_convention(OutputConvention::kEpsilon));
  result.flow_terminal = sample(start(flow), oracle.with_convention(OutputConvention::kVelocity));
  result.max_deviation = max_abs_diff(result.ddim_terminal, result.flow_terminal);
  return result;
}

double ddim_fm_equivalence_check(const DenoiserOracle& oracle, std::size_t steps,
                                 const EquivalenceOptions& options) {
  return ddim_fm_equivalence(oracle, steps, options).max_deviation;
}

}  // namespace trajguide
