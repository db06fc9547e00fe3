#include "trajguide/guidance.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <string>

#include "trajguide/error.hpp"

namespace trajguide {
namespace {

constexpr double kSelectSlack = 1e-12;
constexpr double kDsgMinNorm = 1e-12;

template <typename E>
E enum_from_string(const std::string& name, std::initializer_list<E> values, const char* what) {
  for (E v : values)
    if (to_string(v) == name) return v;
  throw Error(std::string("unknown ") + what + " '" + name + "'");
}

void require_mask_fits(const ValidityMask& mask, const Shape& latent) {
  if (!mask.broadcasts_to(latent))
    throw Error("mask " + to_string(mask.shape()) + " does not fit latent " + to_string(latent));
}

void require_finite_at(const Tensor& x, std::size_t step, const char* what) {
  if (!x.all_finite()) throw Error(std::string("non-finite ") + what + " at step " + std::to_string(step));
}

}  // namespace

std::string to_string(RenoiseScheduler s) {
  switch (s) {
    case RenoiseScheduler::kFlowLinear: return "flow_linear";
    case RenoiseScheduler::kDdimSqrt: return "ddim_sqrt";
    case RenoiseScheduler::kCustom: return "custom";
  }
  return "unknown";
}

std::string to_string(RenoiseNoise n) {
  return n == RenoiseNoise::kReusePerRun ? "reuse_per_run" : "redraw_per_step";
}

std::string to_string(DsgNormalization n) {
  return n == DsgNormalization::kRescaleOri ? "rescale_ori" : "unit_renorm";
}

RenoiseScheduler renoise_scheduler_from_string(const std::string& name) {
  return enum_from_string(name, {RenoiseScheduler::kFlowLinear, RenoiseScheduler::kDdimSqrt, RenoiseScheduler::kCustom},
                          "re-noise scheduler");
}

RenoiseNoise renoise_noise_from_string(const std::string& name) {
  return enum_from_string(name, {RenoiseNoise::kReusePerRun, RenoiseNoise::kRedrawPerStep}, "re-noise mode");
}

DsgNormalization dsg_normalization_from_string(const std::string& name) {
  return enum_from_string(name, {DsgNormalization::kRescaleOri, DsgNormalization::kUnitRenorm}, "DSG normalization");
}

void GuidanceConfig::validate() const {
  if (irr_recursions == 0) throw Error("irr_recursions must be at least 1");
  if (!std::isfinite(lambda_start) || !std::isfinite(lambda_end)) throw Error("lambda schedule must be finite");
  if (lambda_start < lambda_end) throw Error("lambda schedule must run loose to tight (lambda_start >= lambda_end)");
  if (!std::isfinite(rho) || rho < 0.0) throw Error("rho must be finite and non-negative");
  if (renoise == RenoiseScheduler::kCustom) {
    if (custom_weights.empty()) throw Error("custom re-noise scheduler needs a weight table");
    for (double w : custom_weights)
      if (!(w >= 0.0 && w <= 1.0)) throw Error("invalid renoise weight " + std::to_string(w) + " in custom table");
  }
  flow_cfg.validate();
}

Tensor fuse_masked(const Tensor& x0_hat, const Tensor& z_traj, const ValidityMask& mask) {
  require_same_shape(x0_hat, z_traj, "fuse_masked");
  const Shape& s = x0_hat.shape();
  require_mask_fits(mask, s);
  Tensor out = x0_hat;
  for (std::size_t c = 0; c < s.channels; ++c)
    for (std::size_t t = 0; t < s.frames; ++t)
      for (std::size_t y = 0; y < s.height; ++y)
        for (std::size_t x = 0; x < s.width; ++x)
          if (mask.observed(c, t, y, x)) out.at(c, t, y, x) = z_traj.at(c, t, y, x);
  return out;
}

double renoise_weight(std::size_t step, const GuidanceConfig& cfg, const NoiseSchedule& schedule) {
  switch (cfg.renoise) {
    case RenoiseScheduler::kFlowLinear:
      if (schedule.kind() != ScheduleKind::kLinearFlow) throw Error("flow_linear re-noise needs a flow schedule");
      return schedule.t(step);
    case RenoiseScheduler::kDdimSqrt:
      return std::sqrt(1.0 - schedule.alpha_bar(step));
    case RenoiseScheduler::kCustom:
      if (cfg.custom_weights.size() != schedule.grid().size())
        throw Error("custom re-noise table has " + std::to_string(cfg.custom_weights.size()) + " entries, schedule has " +
                    std::to_string(schedule.grid().size()) + " levels");
      return cfg.custom_weights[step];
  }
  return 0.0;
}

Tensor irr_renoise(const Tensor& fused, const Tensor& eps, double w) {
  require_same_shape(fused, eps, "irr_renoise");
  if (!(w >= 0.0 && w <= 1.0)) throw Error("invalid renoise weight " + std::to_string(w));
  Tensor out(fused.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = (1.0 - w) * fused[i] + w * eps[i];
  return out;
}

Tensor irr_renoise(const Tensor& fused, const Tensor& eps, std::size_t step, const GuidanceConfig& cfg,
                   const NoiseSchedule& schedule) {
  return irr_renoise(fused, eps, renoise_weight(step, cfg, schedule));
}

double lambda_at(const GuidanceConfig& cfg, std::size_t iteration, std::size_t total) {
  if (total <= 1) return cfg.lambda_start;
  const double a = static_cast<double>(std::min(iteration, total - 1)) / static_cast<double>(total - 1);
  return cfg.lambda_start + (cfg.lambda_end - cfg.lambda_start) * a;
}

FlfSelection flf_select(const ChannelScore& scores, double lambda) {
  FlfSelection out;
  std::size_t n = 0;
  double sum = 0.0;
  for (const auto& r : scores.channels)
    if (r.scorable) {
      sum += r.score;
      ++n;
    }
  if (n == 0) {
    warn("flf_select: no scorable channel; nothing selected");
    out.delta = out.mu = out.sigma = std::numeric_limits<double>::quiet_NaN();
    return out;
  }
  out.mu = sum / static_cast<double>(n);
  double var = 0.0;
  for (const auto& r : scores.channels)
    if (r.scorable) var += (r.score - out.mu) * (r.score - out.mu);
  out.sigma = std::sqrt(var / static_cast<double>(n));
  out.delta = out.sigma == 0.0 ? out.mu : out.mu - lambda * out.sigma;
  for (std::size_t c = 0; c < scores.channels.size(); ++c)
    if (scores.channels[c].scorable && scores.channels[c].score >= out.delta - kSelectSlack) out.selected.push_back(c);
  return out;
}

FlfSelection flf_select(const ChannelScore& scores, std::size_t iteration, std::size_t total,
                        const GuidanceConfig& cfg) {
  return flf_select(scores, lambda_at(cfg, iteration, total));
}

Tensor flf_update(const Tensor& x0_hat, const Tensor& z_traj, const ValidityMask& masks,
                  const std::vector<std::size_t>& selected) {
  require_same_shape(x0_hat, z_traj, "flf_update");
  const Shape& s = x0_hat.shape();
  require_mask_fits(masks, s);
  std::vector<bool> seen(s.channels, false);
  Tensor out = x0_hat;
  for (std::size_t c : selected) {
    if (c >= s.channels) throw Error("selected channel " + std::to_string(c) + " out of range");
    if (seen[c]) throw Error("channel " + std::to_string(c) + " selected twice");
    seen[c] = true;
    for (std::size_t t = 0; t < s.frames; ++t)
      for (std::size_t y = 0; y < s.height; ++y)
        for (std::size_t x = 0; x < s.width; ++x)
          if (masks.observed(c, t, y, x)) out.at(c, t, y, x) = z_traj.at(c, t, y, x);
  }
  return out;
}

DsgResult dsg_correct(const Tensor& v_traj, const Tensor& v_ori, double rho, DsgNormalization normalization) {
  require_same_shape(v_traj, v_ori, "dsg_correct");
  if (!std::isfinite(rho) || rho < 0.0) throw Error("rho must be finite and non-negative");
  const auto a = v_traj.values();
  const auto b = v_ori.values();
  double aa = 0.0;
  double bb = 0.0;
  double ab = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    aa += a[i] * a[i];
    bb += b[i] * b[i];
    ab += a[i] * b[i];
  }
  const double na = std::sqrt(aa);
  const double nb = std::sqrt(bb);
  DsgResult out{v_traj, std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN(), false};
  if (na < kDsgMinNorm || nb < kDsgMinNorm) return out;
  out.defined = true;
  out.alpha = std::clamp(ab / std::sqrt(aa * bb), -1.0, 1.0);
  out.beta = std::sqrt(std::max(0.0, 1.0 - out.alpha * out.alpha));
  if (rho == 0.0 || out.beta == 0.0) return out;

  const double k = rho * out.beta;
  auto& v = out.v_corr;
  if (normalization == DsgNormalization::kRescaleOri) {
    const double scale = out.alpha * na / nb;
    for (std::size_t i = 0; i < a.size(); ++i) v[i] = a[i] + k * (a[i] - scale * b[i]);
    return out;
  }
  double cc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    v[i] = a[i] / na + k * (a[i] / na - out.alpha * b[i] / nb);
    cc += v[i] * v[i];
  }
  const double nc = std::sqrt(cc);
  if (nc < kDsgMinNorm) return out;
  for (double& x : v.values()) x *= na / nc;
  return out;
}

double observed_adherence(const Tensor& a, const Tensor& b, const ValidityMask& mask) {
  require_same_shape(a, b, "observed_adherence");
  const Shape& s = a.shape();
  require_mask_fits(mask, s);
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t c = 0; c < s.channels; ++c)
    for (std::size_t t = 0; t < s.frames; ++t)
      for (std::size_t y = 0; y < s.height; ++y)
        for (std::size_t x = 0; x < s.width; ++x)
          if (mask.observed(c, t, y, x)) {
            sum += std::abs(a.at(c, t, y, x) - b.at(c, t, y, x));
            ++n;
          }
  if (n == 0) throw Error("empty valid region");
  return sum / static_cast<double>(n);
}

void write_trace_csv(std::ostream& os, const GuidanceTrace& trace) {
  os << "step,noise_level,renoise_weight,delta,mu_s,sigma_s,selected_mask,alpha,beta,correction_norm,adherence\n";
  for (const auto& e : trace.entries) {
    os << e.step << ',' << e.noise_level << ',' << e.renoise_weight << ',';
    if (e.selection) {
      std::string bits(trace.channels, '0');
      for (std::size_t c : e.selection->selected) bits[c] = '1';
      os << e.selection->delta << ',' << e.selection->mu << ',' << e.selection->sigma << ',' << bits << ',';
    } else {
      os << ",,,,";
    }
    if (e.dsg) {
      os << e.dsg->alpha << ',' << e.dsg->beta << ',' << e.correction_norm << ',';
    } else {
      os << ",,,";
    }
    os << e.adherence << '\n';
  }
}

GuidedResult guided_sample(const Tensor& initial_noise, const DenoiserOracle& oracle, const Tensor& z_traj,
                           const ValidityMask& masks, const GuidanceConfig& cfg, const NoiseSchedule& schedule,
                           KeyedRng* rng) {
  cfg.validate();
  require_same_shape(initial_noise, z_traj, "guided_sample");
  require_finite(initial_noise, "initial noise");
  require_finite(z_traj, "trajectory latent");
  const Shape& shape = initial_noise.shape();
  require_mask_fits(masks, shape);
  if (cfg.irr_enabled && cfg.renoise_noise == RenoiseNoise::kRedrawPerStep && rng == nullptr)
    throw Error("per-step re-noise draws need a keyed generator");

  const bool flow = schedule.kind() == ScheduleKind::kLinearFlow;
  const std::size_t total = schedule.steps();
  const bool use_flf = cfg.irr_enabled && cfg.flf_enabled;
  ReferenceFlows reference;
  if (use_flf) reference = reference_flows(z_traj, cfg.flow_cfg.flow);

  GuidedResult result{initial_noise, {}};
  result.trace.channels = shape.channels;
  SamplerState state{initial_noise, total, schedule, rng ? rng->seed() : 0};

  auto plain_step = [&](const SamplerState& s) { return flow ? flow_euler_step(s, oracle) : ddim_step(s, oracle); };

  for (std::size_t k = total; k > 0; --k) {
    const std::size_t iteration = total - k;
    const NoiseLevel level = schedule.level(k);
    TraceEntry entry;
    entry.step = k;
    entry.noise_level = level.sigma;

    if (!cfg.irr_enabled) {
      entry.adherence = observed_adherence(predict_x0(state, oracle), z_traj, masks);
      state = plain_step(state);
      require_finite_at(state.x, k, "sample");
      result.trace.append(std::move(entry));
      continue;
    }

    entry.renoise_weight = renoise_weight(k, cfg, schedule);
    SamplerState guided = state;
    for (std::size_t r = 0; r < cfg.irr_recursions; ++r) {
      const Tensor x0 = predict_x0(guided, oracle);
      require_finite_at(x0, k, "x0 estimate");
      Tensor fused;
      if (use_flf) {
        const ChannelScore scores = channel_scores(x0, reference, masks, cfg.flow_cfg);
        FlfSelection sel = flf_select(scores, iteration, total, cfg);
        fused = flf_update(x0, z_traj, masks, sel.selected);
        entry.channel_scores.clear();
        for (const auto& rec : scores.channels)
          entry.channel_scores.push_back(rec.scorable ? rec.score : std::numeric_limits<double>::quiet_NaN());
        entry.selection = std::move(sel);
      } else {
        fused = fuse_masked(x0, z_traj, masks);
      }
      entry.adherence = observed_adherence(x0, z_traj, masks);
      if (cfg.renoise_noise == RenoiseNoise::kReusePerRun) {
        guided.x = irr_renoise(fused, initial_noise, entry.renoise_weight);
      } else {
        const Tensor eps = rng->gaussian(shape, NoiseKey{NoisePurpose::kRenoise, k, r});
        guided.x = irr_renoise(fused, eps, entry.renoise_weight);
      }
      require_finite_at(guided.x, k, "re-noised latent");
    }

    if (!cfg.dsg_enabled) {
      state = plain_step(guided);
    } else {
      const Tensor v_ori = velocity_at(state.x, level, oracle);
      const Tensor v_traj = velocity_at(guided.x, level, oracle);
      DsgResult d = dsg_correct(v_traj, v_ori, cfg.rho, cfg.dsg_normalization);
      double corr = 0.0;
      for (std::size_t i = 0; i < v_traj.size(); ++i) corr += (d.v_corr[i] - v_traj[i]) * (d.v_corr[i] - v_traj[i]);
      entry.correction_norm = std::sqrt(corr);
      SamplerState next = guided;
      next.step_index = k - 1;
      if (flow) {
        const double dt = schedule.t(k) - schedule.t(k - 1);
        for (std::size_t i = 0; i < next.x.size(); ++i) next.x[i] = guided.x[i] - dt * d.v_corr[i];
      } else {
        // v = eps - x0 on the (alpha, sigma) path; recover the pair and take the DDIM update.
        const Posterior p = split_velocity(guided.x, d.v_corr, level);
        next.x = ddim_update(p.x0, p.eps, schedule.alpha_bar(k - 1));
      }
      state = std::move(next);
      d.v_corr = Tensor();
      entry.dsg = std::move(d);
    }
    require_finite_at(state.x, k, "sample");
    result.trace.append(std::move(entry));
  }
  result.sample = std::move(state.x);
  return result;
}

}  // namespace trajguide
