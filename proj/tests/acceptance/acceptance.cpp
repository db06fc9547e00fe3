// Acceptance suite: one PASS/FAIL line per criterion.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <functional>
#include <numbers>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <Eigen/Geometry>

#include "trajguide/config.hpp"
#include "trajguide/error.hpp"
#include "trajguide/experiment.hpp"
#include "trajguide/flow_metrics.hpp"
#include "trajguide/guidance.hpp"
#include "trajguide/oracle.hpp"
#include "trajguide/rng.hpp"
#include "trajguide/sampler.hpp"
#include "trajguide/scene.hpp"
#include "trajguide/traj_eval.hpp"
#include "trajguide/warp.hpp"

using namespace trajguide;
namespace fs = std::filesystem;

namespace {

constexpr double kPi = std::numbers::pi;

// Pinned tolerances and budgets.
constexpr double kEquivalenceTol = 1e-3;
constexpr double kRecomposeRelTol = 1e-10;
constexpr double kWarpPixelTol = 0.51;
constexpr double kWarpFraction = 0.99;
constexpr double kMetricTol = 1e-12;
constexpr double kAdherenceTol = 0.05;
constexpr double kSim3Tol = 1e-9;

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  int id;
  std::string title;
  double budget_s;
  std::function<Outcome()> body;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

Tensor random_tensor(const Shape& s, std::mt19937_64& gen, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> d(lo, hi);
  Tensor t(s);
  for (double& v : t.values()) v = d(gen);
  return t;
}

ValidityMask random_mask(const Shape& s, std::mt19937_64& gen) {
  std::bernoulli_distribution d(0.5);
  ValidityMask m(s);
  for (auto& v : m.values()) v = d(gen);
  return m;
}

bool bit_equal(const Tensor& a, const Tensor& b) {
  if (!(a.shape() == b.shape())) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (std::memcmp(&a.values()[i], &b.values()[i], sizeof(double)) != 0) return false;
  return true;
}

Outcome equivalence() {
  const auto oracle = DenoiserOracle::isotropic_gaussian(Tensor::scalar(0.0), 1.0);
  EquivalenceOptions opt;
  opt.shape = Shape{1, 1, 8, 8};
  double prev = INFINITY, at1000 = INFINITY;
  bool monotone = true;
  std::string series;
  for (std::size_t n : {125u, 250u, 500u, 1000u, 2000u}) {
    const double d = ddim_fm_equivalence_check(oracle, n, opt);
    monotone = monotone && d <= prev;
    prev = d;
    if (n == 1000) at1000 = d;
    series += (series.empty() ? "" : " ") + fmt("%.2e", d);
  }
  return {at1000 <= kEquivalenceTol && monotone,
          "dev@1000=" + fmt("%.3e", at1000) + " tol=" + fmt("%.0e", kEquivalenceTol) +
              (monotone ? " monotone" : " NOT monotone") + " [" + series + "]"};
}

Outcome recomposition() {
  std::mt19937_64 gen(1);
  std::uniform_real_distribution<double> ab(1e-3, 1.0 - 1e-3);
  const auto oracle = DenoiserOracle::isotropic_gaussian(Tensor::scalar(0.2), 0.5);
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const double a = ab(gen);
    const NoiseSchedule s = NoiseSchedule::discrete_ddim({1.0, a});
    const Tensor x = random_tensor(Shape{1, 1, 4, 4}, gen, -3.0, 3.0);
    const SamplerState st{x, 1, s, 0};
    const Tensor x0 = predict_x0(st, oracle);
    const Tensor eps = oracle.output(x, s.level(1));
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double back = std::sqrt(a) * x0[i] + std::sqrt(1.0 - a) * eps[i];
      worst = std::max(worst, std::abs(back - x[i]) / std::max(1.0, std::abs(x[i])));
    }
  }
  return {worst <= kRecomposeRelTol, "max rel err " + fmt("%.2e", worst) + " over 1000 states"};
}

Outcome warp_exactness() {
  const std::size_t H = 128, W = 128;
  const Intrinsics K = Intrinsics::from_fov(60.0, H, W);
  const CameraPose src(K, Mat3::Identity(), Vec3::Zero());
  SceneSpec scene;
  PlanePrimitive plane;
  plane.center = Vec3(0.0, 0.0, 5.0);
  plane.half_width = plane.half_height = 100.0;
  plane.texture.kind = TextureKind::kValueNoise;
  scene.planes.push_back(plane);
  scene.channels = 3;
  const RenderResult r = render(scene, src, H, W);
  const WarpResult id = warp(r.image, r.depth, src, src);
  const bool identity = bit_equal(id.image, r.image) && id.mask.count() == H * W;

  // Channels hold each source pixel's own coordinates so the landing spot can be checked.
  Tensor coords(Shape{2, 1, H, W});
  for (std::size_t y = 0; y < H; ++y)
    for (std::size_t x = 0; x < W; ++x) {
      coords.at(0, 0, y, x) = static_cast<double>(x);
      coords.at(1, 0, y, x) = static_cast<double>(y);
    }
  const double b = 0.3;
  const CameraPose tar(K, Mat3::Identity(), Vec3(-b, 0.0, 0.0));
  const WarpResult w = warp(coords, r.depth, src, tar);
  std::size_t valid = 0, good = 0;
  for (std::size_t y = 0; y < H; ++y)
    for (std::size_t x = 0; x < W; ++x) {
      if (!w.mask.at(0, 0, y, x)) continue;
      ++valid;
      const double sx = w.image.at(0, 0, y, x), sy = w.image.at(1, 0, y, x);
      const double d = r.depth.at(static_cast<std::size_t>(sy), static_cast<std::size_t>(sx));
      const double ex = sx - K.fx * b / d;
      if (std::abs(ex - x) <= kWarpPixelTol && std::abs(sy - y) <= kWarpPixelTol) ++good;
    }
  const double frac = valid ? static_cast<double>(good) / valid : 0.0;
  return {identity && frac >= kWarpFraction,
          std::string(identity ? "identity bit-exact" : "identity NOT exact") + ", translation " + fmt("%.4f", frac) +
              " of " + std::to_string(valid) + " valid px within " + fmt("%.2f", kWarpPixelTol) + " px"};
}

Outcome flow_metric_oracle() {
  std::mt19937_64 gen(4);
  FlowMetricConfig cfg;
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const FlowField p = random_tensor(Shape{2, 1, 8, 8}, gen, -6.0, 6.0);
    const FlowField g = random_tensor(Shape{2, 1, 8, 8}, gen, -6.0, 6.0);
    ValidityMask m = random_mask(Shape{1, 1, 8, 8}, gen);
    m.at(0, 0, 3, 3) = 1;
    double epe = 0.0, ae = 0.0;
    std::size_t n = 0, na = 0, out = 0;
    for (std::size_t y = 0; y < 8; ++y)
      for (std::size_t x = 0; x < 8; ++x) {
        if (!m.at(0, 0, y, x)) continue;
        const double pu = p.at(0, 0, y, x), pv = p.at(1, 0, y, x), gu = g.at(0, 0, y, x), gv = g.at(1, 0, y, x);
        const double e = std::sqrt((pu - gu) * (pu - gu) + (pv - gv) * (pv - gv));
        const double np = std::sqrt(pu * pu + pv * pv), ng = std::sqrt(gu * gu + gv * gv);
        epe += e;
        ++n;
        if (np >= 1e-8 && ng >= 1e-8) {
          ae += std::acos(std::max(-1.0, std::min(1.0, (pu * gu + pv * gv) / (np * ng))));
          ++na;
        }
        if (e > 3.0 || (ng > 1e-8 && e / ng > 0.05)) ++out;
      }
    worst = std::max(worst, std::abs(masked_epe(p, g, m) - epe / n));
    worst = std::max(worst, std::abs(masked_ae(p, g, m) - ae / na));
    worst = std::max(worst, std::abs(fl_all(p, g, m, cfg) - static_cast<double>(out) / n));
  }
  const double s = similarity_score(5.0, 15.0 * kPi / 180.0, 0.25, cfg);
  const bool half = std::abs(s - 0.5) <= kMetricTol;
  return {worst <= kMetricTol && half, "max |diff| " + fmt("%.2e", worst) + " over 1000 trials, S(half)=" +
                                           fmt("%.15f", s)};
}

Outcome flf() {
  std::mt19937_64 gen(5);
  std::bernoulli_distribution pick(0.5);
  bool untouched = true;
  for (int trial = 0; trial < 100; ++trial) {
    const Shape s{4, 3, 6, 6};
    const Tensor x0 = random_tensor(s, gen), z = random_tensor(s, gen);
    const ValidityMask m = random_mask(Shape{1, 3, 6, 6}, gen);
    std::vector<std::size_t> sel;
    for (std::size_t c = 0; c < 4; ++c)
      if (pick(gen)) sel.push_back(c);
    const Tensor out = flf_update(x0, z, m, sel);
    for (std::size_t c = 0; c < 4; ++c)
      if (std::find(sel.begin(), sel.end(), c) == sel.end()) untouched = untouched && bit_equal(out.channel(c), x0.channel(c));
  }
  auto scores = [](std::initializer_list<double> v) {
    ChannelScore cs;
    for (double s : v) {
      ChannelRecord r;
      r.scorable = true;
      r.score = s;
      cs.channels.push_back(r);
    }
    return cs;
  };
  const FlfSelection hand = flf_select(scores({0.9, 0.5, 0.1}), 1.0);
  const double want = 0.5 - std::sqrt(0.32 / 3.0);
  const bool threshold = std::abs(hand.delta - want) <= 1e-12 && hand.selected == std::vector<std::size_t>{0, 1};
  const bool equal = flf_select(scores({0.4, 0.4, 0.4}), 1.0).selected.size() == 3;
  return {untouched && threshold && equal, std::string(untouched ? "no-touch ok" : "no-touch VIOLATED") +
                                               ", delta=" + fmt("%.6f", hand.delta) +
                                               (equal ? ", equal scores select all" : ", equal scores FAIL")};
}

Outcome dsg() {
  std::mt19937_64 gen(6);
  bool fixed = true, monotone = true;
  double scale_dev = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const Shape s{2, 2, 4, 4};
    const Tensor a = random_tensor(s, gen), b = random_tensor(s, gen);
    fixed = fixed && bit_equal(dsg_correct(a, a, 1.7).v_corr, a) && bit_equal(dsg_correct(a, b, 0.0).v_corr, a);
    double prev = -1.0;
    for (int i = 0; i < 20; ++i) {
      const Tensor v = dsg_correct(a, b, 0.2 * i).v_corr;
      double d = 0.0;
      for (std::size_t k = 0; k < v.size(); ++k) d += (v[k] - a[k]) * (v[k] - a[k]);
      d = std::sqrt(d);
      monotone = monotone && d >= prev;
      prev = d;
    }
    Tensor b2 = b;
    for (double& v : b2.values()) v *= 0.01 + 10.0 * trial;
    scale_dev = std::max(scale_dev, max_abs_diff(dsg_correct(a, b, 0.9).v_corr, dsg_correct(a, b2, 0.9).v_corr));
  }
  return {fixed && monotone && scale_dev <= 1e-12,
          std::string(fixed ? "fixed points exact" : "fixed points FAIL") + (monotone ? ", monotone in rho" : ", NOT monotone") +
              ", rescale dev " + fmt("%.2e", scale_dev)};
}

Tensor moving_pattern(const Shape& s, double speed) {
  Tensor z(s);
  for (std::size_t c = 0; c < s.channels; ++c)
    for (std::size_t t = 0; t < s.frames; ++t)
      for (std::size_t y = 0; y < s.height; ++y)
        for (std::size_t x = 0; x < s.width; ++x)
          z.at(c, t, y, x) = 0.5 + 0.4 * std::sin(0.5 * (x - speed * t) + 0.9 * c) * std::cos(0.35 * y + 0.3 * c);
  return z;
}

struct BenchmarkRuns {
  std::optional<RunManifest> first;
  std::optional<RunManifest> second;
  std::string error;
};

Outcome adherence(const fs::path& config_path, const fs::path& work, BenchmarkRuns& runs) {
  // Perfect denoiser and full observation.
  KeyedRng rng(11);
  const Shape s{4, 3, 16, 16};
  const Tensor noise = rng.gaussian(s, {NoisePurpose::kInitial, 0, 0});
  const Tensor target = moving_pattern(s, 1.0);
  GuidanceConfig plain;
  plain.flf_enabled = false;
  plain.dsg_enabled = false;
  const GuidedResult exact = guided_sample(noise, DenoiserOracle::tabulated(target, OutputConvention::kVelocity), target,
                                           ValidityMask(Shape{1, 3, 16, 16}, 1), plain,
                                           NoiseSchedule::uniform_flow(50, 0.999));
  const double exact_dev = max_abs_diff(exact.sample, target);

  // Mixture oracle, left half observed, fuse and re-noise only.
  ValidityMask half(Shape{1, 3, 16, 16});
  for (std::size_t t = 0; t < 3; ++t)
    for (std::size_t y = 0; y < 16; ++y)
      for (std::size_t x = 0; x < 8; ++x) half.at(0, t, y, x) = 1;
  const auto gmm = DenoiserOracle::gaussian_mixture({0.5, 0.5}, {moving_pattern(s, -1.0), target}, {1e-4, 1e-4})
                       .with_convention(OutputConvention::kVelocity);
  const GuidedResult g = guided_sample(noise, gmm, target, half, plain, NoiseSchedule::uniform_flow(50, 0.999), &rng);
  const double half_dev = observed_adherence(g.sample, target, half);
  bool bounded = g.sample.all_finite();
  for (double v : g.sample.values()) bounded = bounded && v > -0.5 && v < 1.5;

  bool best = false;
  std::string bench = "benchmark not run";
  try {
    ExperimentConfig cfg = load_config(config_path);
    cfg.output_dir = (work / "first").string();
    runs.first = run_experiment(cfg);
    if (!runs.first->success) {
      bench = "benchmark failed at " + runs.first->failed_stage()->name + ": " + runs.first->failed_stage()->error;
    } else {
      best = runs.first->full_stack_best.value_or(false);
      const double full = runs.first->summary.at(cell_name(true, true, true));
      double runner_up = INFINITY;
      for (const auto& [name, v] : runs.first->summary)
        if (name != cell_name(true, true, true)) runner_up = std::min(runner_up, v);
      bench = "full stack " + fmt("%.6f", full) + " vs next best " + fmt("%.6f", runner_up);
    }
  } catch (const std::exception& e) {
    runs.error = e.what();
    bench = std::string("benchmark error: ") + e.what();
  }
  return {exact_dev == 0.0 && half_dev <= kAdherenceTol && bounded && best,
          "perfect-denoiser dev " + fmt("%.1e", exact_dev) + ", half-mask dev " + fmt("%.4f", half_dev) + " (tol " +
              fmt("%.2f", kAdherenceTol) + "), " + bench};
}

Mat3 random_rotation(std::mt19937_64& gen) {
  std::normal_distribution<double> n(0.0, 1.0);
  return Eigen::Quaterniond(n(gen), n(gen), n(gen), n(gen)).normalized().toRotationMatrix();
}

Outcome trajectory_metrics() {
  std::mt19937_64 gen(8);
  std::normal_distribution<double> d(0.0, 1.0);
  std::uniform_real_distribution<double> sc(0.3, 4.0);
  auto random_traj = [&](std::size_t n) {
    std::vector<Pose> p;
    for (std::size_t i = 0; i < n; ++i) p.push_back(Pose{random_rotation(gen), Vec3(d(gen), d(gen), d(gen))});
    return PoseTrajectory(p);
  };
  double sim3 = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const PoseTrajectory ref = random_traj(10);
    const Sim3Transform g{sc(gen), random_rotation(gen), Vec3(d(gen), d(gen), d(gen))};
    const Alignment a = align_sim3(g.inverse().apply(ref), ref);
    sim3 = std::max({sim3, std::abs(a.transform.s - g.s) / g.s, (a.transform.R - g.R).norm(),
                     (a.transform.t - g.t).norm() / (1.0 + g.t.norm())});
  }
  double loop = 0.0, loop_r = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const PoseTrajectory ref = random_traj(10), est = random_traj(10);
    double a = 0.0, t = 0.0, r = 0.0;
    for (std::size_t i = 0; i < 10; ++i) a += (est[i].t - ref[i].t).squaredNorm();
    for (std::size_t i = 0; i < 9; ++i) {
      const Vec3 dr = ref[i].R.transpose() * (ref[i + 1].t - ref[i].t);
      const Vec3 de = est[i].R.transpose() * (est[i + 1].t - est[i].t);
      t += (dr - de).squaredNorm();
      const Eigen::Quaterniond q((ref[i].R.transpose() * ref[i + 1].R).transpose() * (est[i].R.transpose() * est[i + 1].R));
      const double ang = 2.0 * std::atan2(q.vec().norm(), std::abs(q.w())) * 180.0 / kPi;
      r += ang * ang;
    }
    loop = std::max({loop, std::abs(ate(est, ref).rmse - std::sqrt(a / 10)), std::abs(rpe_t(est, ref).rmse - std::sqrt(t / 9))});
    loop_r = std::max(loop_r, std::abs(rpe_r(est, ref).rmse - std::sqrt(r / 9)));
  }
  const PoseTrajectory same = random_traj(10);
  const bool zero = ate(same, same).rmse == 0.0 && rpe_t(same, same).rmse == 0.0 && rpe_r(same, same).rmse == 0.0;
  // The rotation angle oracle works in degrees through a quaternion, so it carries more rounding.
  return {sim3 <= kSim3Tol && loop <= kMetricTol && loop_r <= 1e-10 && zero,
          "sim3 err " + fmt("%.1e", sim3) + ", ATE/RPE-T loop diff " + fmt("%.1e", loop) + ", RPE-R loop diff " +
              fmt("%.1e", loop_r) + (zero ? ", identical -> 0" : ", identical NOT 0")};
}

Outcome determinism(const fs::path& config_path, const fs::path& work, BenchmarkRuns& runs) {
  if (!runs.first) return {false, "no first run: " + runs.error};
  ExperimentConfig cfg = load_config(config_path);
  cfg.output_dir = (work / "second").string();
  runs.second = run_experiment(cfg);
  const bool same = runs.first->manifest_hash == runs.second->manifest_hash;
  const bool audit = runs.second->dsg_rng_audit.value_or(false);
  return {same && audit, "manifest " + runs.first->manifest_hash.substr(0, 16) + (same ? " == " : " != ") +
                             runs.second->manifest_hash.substr(0, 16) +
                             (audit ? ", DSG on/off draw logs identical" : ", DSG audit FAILED")};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  std::vector<int> known;
  std::string config = "configs/desk_benchmark.json";
  std::string work = "acceptance_runs";
  app.add_option("--known-failure", known, "Criteria expected to fail (reported, not fatal)");
  app.add_option("--config", config, "Frozen benchmark config")->check(CLI::ExistingFile);
  app.add_option("--work", work, "Scratch directory for benchmark runs");
  CLI11_PARSE(app, argc, argv);

  set_warning_handler([](const std::string&) {});
  BenchmarkRuns runs;
  const std::vector<Criterion> criteria{
      {1, "DDIM/flow equivalence", 10.0, equivalence},
      {2, "sampler recomposition", 1.0, recomposition},
      {3, "warp exactness", 5.0, warp_exactness},
      {4, "flow metric oracle", 5.0, flow_metric_oracle},
      {5, "FLF no-touch and threshold", 1.0, flf},
      {6, "DSG fixed points and monotonicity", 2.0, dsg},
      {7, "observed-region adherence", 300.0, [&] { return adherence(config, work, runs); }},
      {8, "trajectory metrics", 2.0, trajectory_metrics},
      {9, "determinism", 60.0, [&] { return determinism(config, work, runs); }},
  };

  std::set<int> failed;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.body();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = secs <= c.budget_s;
    const bool pass = o.pass && in_time;
    if (!pass) failed.insert(c.id);
    std::printf("CRITERION %d %s  %s: %s (%.2fs, budget %.0fs%s)\n", c.id, pass ? "PASS" : "FAIL", c.title.c_str(),
                o.detail.c_str(), secs, c.budget_s, in_time ? "" : ", OVER BUDGET");
    std::fflush(stdout);
  }
  const std::set<int> expected(known.begin(), known.end());
  std::printf("%zu/%zu criteria passed", criteria.size() - failed.size(), criteria.size());
  if (!expected.empty()) {
    std::printf("; known failures:");
    for (int k : expected) std::printf(" %d", k);
  }
  std::printf("\n");
  return failed == expected ? 0 : 1;
}
