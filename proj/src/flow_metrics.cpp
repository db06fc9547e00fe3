#include "trajguide/flow_metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>

#include "trajguide/error.hpp"

namespace trajguide {
namespace {

struct Layout {
  std::size_t pairs;
  std::size_t plane;
};

Layout check_inputs(const FlowField& pred, const FlowField& gt, const ValidityMask& mask) {
  const Shape& s = pred.shape();
  if (s.channels != 2) throw Error("flow fields must have two components, got " + to_string(s));
  if (!(gt.shape() == s)) throw Error("flow shapes differ: " + to_string(s) + " vs " + to_string(gt.shape()));
  const Shape& m = mask.shape();
  if (m.channels != 1 || m.frames != s.frames || m.height != s.height || m.width != s.width)
    throw Error("flow mask shape " + to_string(m) + " does not match flow " + to_string(s));
  return Layout{s.frames, s.plane()};
}

}  // namespace

double FlowMetricConfig::n_A_rad() const { return n_A_deg * std::numbers::pi / 180.0; }

void FlowMetricConfig::validate() const {
  if (!(n_E > 0.0) || !(n_A_deg > 0.0) || !(n_F > 0.0)) throw Error("normalization constants must be positive");
  double sum = 0.0;
  for (double g : gamma) {
    if (!(g > 0.0)) throw Error("score weights must be positive");
    sum += g;
  }
  if (std::abs(sum - 1.0) > 1e-12) throw Error("score weights must sum to 1");
  if (!(fl_epe_threshold > 0.0) || !(fl_rel_threshold > 0.0)) throw Error("outlier thresholds must be positive");
  flow.validate();
}

double masked_epe(const FlowField& pred, const FlowField& gt, const ValidityMask& mask) {
  const auto [pairs, plane] = check_inputs(pred, gt, mask);
  const auto m = mask.values();
  const auto p = pred.values();
  const auto g = gt.values();
  const std::size_t off = pairs * plane;
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < off; ++i) {
    if (!m[i]) continue;
    sum += std::hypot(p[i] - g[i], p[off + i] - g[off + i]);
    ++n;
  }
  if (n == 0) throw Error("empty valid region");
  return sum / static_cast<double>(n);
}

double masked_ae(const FlowField& pred, const FlowField& gt, const ValidityMask& mask) {
  const auto [pairs, plane] = check_inputs(pred, gt, mask);
  const auto m = mask.values();
  const auto p = pred.values();
  const auto g = gt.values();
  const std::size_t off = pairs * plane;
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < off; ++i) {
    if (!m[i]) continue;
    const double np = std::hypot(p[i], p[off + i]);
    const double ng = std::hypot(g[i], g[off + i]);
    if (np < kZeroFlowNorm || ng < kZeroFlowNorm) continue;
    const double c = (p[i] * g[i] + p[off + i] * g[off + i]) / (np * ng);
    sum += std::acos(std::clamp(c, -1.0, 1.0));
    ++n;
  }
  if (n == 0) throw Error("empty valid region: no pixel with nonzero predicted and reference flow");
  return sum / static_cast<double>(n);
}

double fl_all(const FlowField& pred, const FlowField& gt, const ValidityMask& mask, const FlowMetricConfig& cfg) {
  const auto [pairs, plane] = check_inputs(pred, gt, mask);
  const auto m = mask.values();
  const auto p = pred.values();
  const auto g = gt.values();
  const std::size_t off = pairs * plane;
  std::size_t outliers = 0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < off; ++i) {
    if (!m[i]) continue;
    ++n;
    const double epe = std::hypot(p[i] - g[i], p[off + i] - g[off + i]);
    const double ng = std::hypot(g[i], g[off + i]);
    const bool big = epe > cfg.fl_epe_threshold;
    const bool rel = ng > kZeroFlowNorm && epe / ng > cfg.fl_rel_threshold;
    if (cfg.fl_rule == FlOutlierRule::kAny ? (big || rel) : (big && rel)) ++outliers;
  }
  if (n == 0) throw Error("empty valid region");
  return static_cast<double>(outliers) / static_cast<double>(n);
}

double similarity_score(double epe, double ae, double fl, const FlowMetricConfig& cfg) {
  const double ne = std::min(epe / cfg.n_E, 1.0);
  const double na = std::min(ae / cfg.n_A_rad(), 1.0);
  const double nf = std::min(fl / cfg.n_F, 1.0);
  return cfg.gamma[0] * (1.0 - ne) + cfg.gamma[1] * (1.0 - na) + cfg.gamma[2] * (1.0 - nf);
}

ValidityMask pair_mask(const ValidityMask& frame_mask, std::size_t channel) {
  const Shape& s = frame_mask.shape();
  if (s.frames < 2) throw Error("pair mask needs at least two frames");
  ValidityMask out(Shape{1, s.frames - 1, s.height, s.width});
  for (std::size_t t = 0; t + 1 < s.frames; ++t)
    for (std::size_t y = 0; y < s.height; ++y)
      for (std::size_t x = 0; x < s.width; ++x)
        out.at(0, t, y, x) = frame_mask.observed(channel, t, y, x) && frame_mask.observed(channel, t + 1, y, x);
  return out;
}

std::size_t ChannelScore::scorable_count() const {
  return static_cast<std::size_t>(
      std::count_if(channels.begin(), channels.end(), [](const ChannelRecord& r) { return r.scorable; }));
}

ReferenceFlows reference_flows(const Tensor& z_traj, const FlowParams& params) {
  ReferenceFlows out;
  for (std::size_t c = 0; c < z_traj.shape().channels; ++c) {
    Tensor ch = z_traj.channel(c);
    out.ranges.push_back(normalize_channel(ch));
    out.flows.push_back(estimate_flow(z_traj.channel(c), params));
  }
  return out;
}

ChannelScore channel_scores(const Tensor& x0_hat, const Tensor& z_traj, const ValidityMask& masks,
                            const FlowMetricConfig& cfg) {
  require_same_shape(x0_hat, z_traj, "channel_scores");
  return channel_scores(x0_hat, reference_flows(z_traj, cfg.flow), masks, cfg);
}

ChannelScore channel_scores(const Tensor& x0_hat, const ReferenceFlows& reference, const ValidityMask& masks,
                            const FlowMetricConfig& cfg) {
  cfg.validate();
  const Shape& s = x0_hat.shape();
  if (reference.flows.size() != s.channels) throw Error("reference flow count does not match latent channels");
  if (!masks.broadcasts_to(s)) throw Error("mask " + to_string(masks.shape()) + " does not fit latent " + to_string(s));
  ChannelScore out;
  out.channels.resize(s.channels);
  for (std::size_t c = 0; c < s.channels; ++c) {
    ChannelRecord& rec = out.channels[c];
    rec.gt_range = reference.ranges[c];
    const ValidityMask omega = pair_mask(masks, c);
    rec.valid_count = omega.count();
    if (rec.valid_count == 0) continue;
    Tensor ch = x0_hat.channel(c);
    rec.pred_range = ChannelRange{*std::min_element(ch.values().begin(), ch.values().end()),
                                  *std::max_element(ch.values().begin(), ch.values().end())};
    const FlowField pred = estimate_flow(ch, cfg.flow);
    const FlowField& gt = reference.flows[c];
    rec.epe = masked_epe(pred, gt, omega);
    rec.fl = fl_all(pred, gt, omega, cfg);
    const auto p = pred.values();
    const auto g = gt.values();
    const std::size_t off = p.size() / 2;
    for (std::size_t i = 0; i < off; ++i)
      if (omega.values()[i] && std::hypot(p[i], p[off + i]) >= kZeroFlowNorm &&
          std::hypot(g[i], g[off + i]) >= kZeroFlowNorm)
        ++rec.angular_count;
    rec.ae = rec.angular_count > 0 ? masked_ae(pred, gt, omega) : 0.0;
    rec.score = similarity_score(rec.epe, rec.ae, rec.fl, cfg);
    rec.scorable = true;
  }
  return out;
}

void write_score_csv_header(std::ostream& os) { os << "step,channel,scorable,score,epe,ae,fl,valid_count\n"; }

void write_score_csv_rows(std::ostream& os, std::size_t step, const ChannelScore& scores) {
  for (std::size_t c = 0; c < scores.channels.size(); ++c) {
    const auto& r = scores.channels[c];
    os << step << ',' << c << ',' << (r.scorable ? 1 : 0) << ',' << r.score << ',' << r.epe << ',' << r.ae << ','
       << r.fl << ',' << r.valid_count << '\n';
  }
}

}  // namespace trajguide
