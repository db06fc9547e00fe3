#include <chrono>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "trajguide/config.hpp"
#include "trajguide/error.hpp"
#include "trajguide/experiment.hpp"
#include "trajguide/flow_metrics.hpp"
#include "trajguide/io.hpp"
#include "trajguide/oracle.hpp"
#include "trajguide/sampler.hpp"
#include "trajguide/traj_eval.hpp"

using namespace trajguide;

namespace {

int cmd_run(const std::string& path, const std::vector<std::uint64_t>& seeds, const std::string& out,
            const std::string& ablate, std::size_t parallel, bool plots) {
  ExperimentConfig cfg = load_config(path);
  if (!seeds.empty()) cfg.seeds = seeds;
  if (!out.empty()) cfg.output_dir = out;
  if (!ablate.empty()) cfg.ablation = ablate == "none" ? std::vector<std::string>{} : parse_ablation_list(ablate);
  if (parallel) cfg.parallel = parallel;
  cfg.validate();

  const RunManifest m = run_experiment(cfg);
  for (const auto& s : m.stages)
    std::printf("stage %-10s %s %.2fs%s%s\n", s.name.c_str(), s.ok ? "ok  " : "FAIL", s.seconds,
                s.error.empty() ? "" : "  ", s.error.c_str());
  if (!m.cells.empty()) std::printf("\n%-6s %-16s %12s %12s %12s\n", "seed", "cell", "adherence", "vs_guide", "unobserved");
  for (const auto& c : m.cells)
    std::printf("%-6llu %-16s %12.6f %12.6f %12.6f%s\n", static_cast<unsigned long long>(c.seed), c.cell.c_str(),
                c.adherence, c.adherence_traj, c.unobserved_error, c.matches_unguided ? "  (= unguided)" : "");
  for (const auto& t : m.trajectory)
    std::printf("trajectory %-8s ATE %.3g  RPE-T %.3g  RPE-R %.3g deg %s\n", t.source.c_str(), t.ate, t.rpe_t, t.rpe_r,
                t.note.c_str());
  if (m.full_stack_best) std::printf("full stack best: %s\n", *m.full_stack_best ? "yes" : "no");
  if (m.dsg_rng_audit) std::printf("dsg rng audit: %s\n", *m.dsg_rng_audit ? "pass" : "FAIL");

  bool ok = m.success;
  if (ok && plots) {
    try {
      emit_plots(m);
    } catch (const Error& e) {
      std::fprintf(stderr, "plots: %s\n", e.what());
      ok = false;
    }
  }
  std::printf("run dir %s\nmanifest %s\n", m.run_dir.string().c_str(), m.manifest_hash.c_str());
  return ok ? 0 : 1;
}

int cmd_eval_traj(const std::string& est_path, const std::string& ref_path) {
  const PoseTrajectory est = read_pose_file(est_path);
  const PoseTrajectory ref = read_pose_file(ref_path);
  const TrajectoryMetrics m = evaluate_trajectory(est, ref);
  std::printf("poses   %zu\nscale   %.9g\nATE     %.9g\nRPE-T   %.9g\nRPE-R   %.9g deg\n", est.size(), m.transform.s,
              m.ate.rmse, m.rpe_t.rmse, m.rpe_r.rmse);
  return 0;
}

int cmd_score_flow(const std::string& a_path, const std::string& b_path, const std::string& mask_path,
                   bool fields) {
  const Tensor a = read_tensor(a_path);
  const Tensor b = read_tensor(b_path);
  const ValidityMask mask = read_mask(mask_path);
  FlowMetricConfig cfg;
  if (fields) {
    const double epe = masked_epe(a, b, mask);
    const double ae = masked_ae(a, b, mask);
    const double fl = fl_all(a, b, mask, cfg);
    std::printf("M-EPE %.9g\nM-AE  %.9g deg\nFl    %.9g\nS     %.9g\n", epe, ae * 180.0 / M_PI, fl,
                similarity_score(epe, ae, fl, cfg));
    return 0;
  }
  const ChannelScore scores = channel_scores(a, b, mask, cfg);
  std::printf("%-8s %10s %10s %10s %10s %8s\n", "channel", "S", "M-EPE", "M-AE", "Fl", "valid");
  for (std::size_t c = 0; c < scores.channels.size(); ++c) {
    const ChannelRecord& r = scores.channels[c];
    if (!r.scorable) {
      std::printf("%-8zu %10s\n", c, "-");
      continue;
    }
    std::printf("%-8zu %10.6f %10.6f %10.4f %10.6f %8zu\n", c, r.score, r.epe, r.ae * 180.0 / M_PI, r.fl,
                r.valid_count);
  }
  return 0;
}

int cmd_check_equivalence(std::size_t steps, double threshold, std::size_t doublings) {
  const DenoiserOracle oracle = DenoiserOracle::isotropic_gaussian(Tensor::scalar(0.0), 1.0);
  EquivalenceOptions opt;
  opt.shape = Shape{1, 1, 8, 8};
  std::vector<std::size_t> grid;
  for (std::size_t d = 0; d <= doublings; ++d) grid.push_back(std::max<std::size_t>(1, steps >> (doublings - d)));
  if (doublings > 0) grid.push_back(steps * 2);
  const auto t0 = std::chrono::steady_clock::now();
  double prev = INFINITY, at_steps = INFINITY;
  bool monotone = true;
  for (std::size_t n : grid) {
    const double dev = ddim_fm_equivalence_check(oracle, n, opt);
    if (dev > prev) monotone = false;
    prev = dev;
    if (n == steps) at_steps = dev;
    std::printf("steps %6zu  max deviation %.3e\n", n, dev);
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const bool within = at_steps <= threshold;
  std::printf("deviation at %zu steps %.3e (threshold %.1e): %s\n", steps, at_steps, threshold,
              within ? "pass" : "FAIL");
  std::printf("monotone non-increasing: %s\n", monotone ? "pass" : "FAIL");
  std::printf("elapsed %.2fs\n", secs);
  return within && monotone ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Trajectory-guided sampling experiments"};
  app.require_subcommand(1);
  app.set_version_flag("--version", TRAJGUIDE_VERSION);

  auto* run = app.add_subcommand("run", "Run an experiment config");
  std::string config_path, out_dir, ablate;
  std::vector<std::uint64_t> seeds;
  std::size_t parallel = 0;
  bool no_plots = false;
  run->add_option("config", config_path, "JSON experiment config")->required()->check(CLI::ExistingFile);
  run->add_option("--seed", seeds, "Override the seed list");
  run->add_option("--out", out_dir, "Output root (run goes to <out>/<hash>)");
  run->add_option("--ablate", ablate, "Mechanisms to toggle, e.g. irr,flf,dsg (or 'none')");
  run->add_option("--parallel", parallel, "Worker threads over seed x cell");
  run->add_flag("--no-plots", no_plots, "Skip plot-data CSVs");

  auto* eval = app.add_subcommand("eval-traj", "ATE / RPE of an estimated trajectory");
  std::string est_path, ref_path;
  eval->add_option("est", est_path, "Estimated poses")->required()->check(CLI::ExistingFile);
  eval->add_option("ref", ref_path, "Reference poses")->required()->check(CLI::ExistingFile);

  auto* score = app.add_subcommand("score-flow", "Per-channel flow similarity of two latent videos");
  std::string a_path, b_path, mask_path;
  bool fields = false;
  score->add_option("a", a_path, "Candidate tensor")->required()->check(CLI::ExistingFile);
  score->add_option("b", b_path, "Reference tensor")->required()->check(CLI::ExistingFile);
  score->add_option("mask", mask_path, "Validity mask tensor")->required()->check(CLI::ExistingFile);
  score->add_flag("--fields", fields, "Inputs are flow fields [2,T-1,H,W]; print the raw metrics");

  auto* eq = app.add_subcommand("check-equivalence", "Compare DDIM and flow Euler on a shared schedule");
  std::size_t steps = 1000, doublings = 3;
  double threshold = 1e-3;
  eq->add_option("--steps", steps, "Step count the threshold applies to");
  eq->add_option("--threshold", threshold, "Maximum terminal deviation");
  eq->add_option("--doublings", doublings, "Doublings below the step count (one more is run above)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) return cmd_run(config_path, seeds, out_dir, ablate, parallel, !no_plots);
    if (*eval) return cmd_eval_traj(est_path, ref_path);
    if (*score) return cmd_score_flow(a_path, b_path, mask_path, fields);
    if (*eq) return cmd_check_equivalence(steps, threshold, doublings);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 1;
}
