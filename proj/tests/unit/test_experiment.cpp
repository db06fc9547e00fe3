#include <filesystem>
#include <fstream>
#include <string>

#include <gtest/gtest.h>

#include "trajguide/config.hpp"
#include "trajguide/error.hpp"
#include "trajguide/experiment.hpp"
#include "unit/helpers.hpp"

using namespace trajguide;
namespace fs = std::filesystem;

namespace {

ExperimentConfig tiny(const std::string& out) {
  ExperimentConfig cfg = parse_config(R"({
    "name": "tiny",
    "height": 16,
    "width": 16,
    "scene": {
      "channels": 2,
      "planes": [{"center": [0, 0, 7], "half_width": 6, "half_height": 6,
                  "texture": {"kind": "value_noise", "scale": 0.6, "seed": 3}}],
      "spheres": [{"center": [0.3, 0.2, 4.5], "radius": 0.8}]
    },
    "trajectory": {"kind": "orbit", "frames": 3, "sweep_deg": 6},
    "schedule": {"steps": 5},
    "oracle": {"kind": "gaussian_mixture", "distractors": [{"texture_seed_shift": 2}]},
    "seeds": [0],
    "ablation": ["dsg"]
  })");
  cfg.output_dir = out;
  return cfg;
}

std::size_t line_count(const fs::path& p) {
  std::ifstream in(p);
  std::size_t n = 0;
  std::string line;
  while (std::getline(in, line)) ++n;
  return n;
}

std::string first_line(const fs::path& p) {
  std::ifstream in(p);
  std::string line;
  std::getline(in, line);
  return line;
}

struct Quiet {
  WarningHandler prev = set_warning_handler([](const std::string&) {});
  ~Quiet() { set_warning_handler(prev); }
};

}  // namespace

TEST(Ablation, CellGridOrder) {
  GuidanceConfig base;
  const auto cells = ablation_cells(base, {"irr", "flf", "dsg"});
  ASSERT_EQ(cells.size(), 8u);
  EXPECT_EQ(cell_name(cells[0].irr_enabled, cells[0].flf_enabled, cells[0].dsg_enabled), "irr0_flf0_dsg0");
  EXPECT_EQ(cell_name(cells[7].irr_enabled, cells[7].flf_enabled, cells[7].dsg_enabled), "irr1_flf1_dsg1");
  const auto one = ablation_cells(base, {"dsg"});
  ASSERT_EQ(one.size(), 2u);
  EXPECT_TRUE(one[0].irr_enabled && one[0].flf_enabled && !one[0].dsg_enabled);
  EXPECT_EQ(ablation_cells(base, {}).size(), 1u);
}

TEST(Experiment, RunWritesArtifacts) {
  Quiet q;
  const ExperimentConfig cfg = tiny(testutil::scratch("exp_run").string());
  const RunManifest m = run_experiment(cfg);
  ASSERT_TRUE(m.success) << (m.failed_stage() ? m.failed_stage()->error : "");
  EXPECT_EQ(m.cells.size(), 2u);
  EXPECT_EQ(m.stages.size(), 6u);
  ASSERT_TRUE(m.dsg_rng_audit.has_value());
  EXPECT_TRUE(*m.dsg_rng_audit);
  EXPECT_FALSE(m.full_stack_best.has_value());
  EXPECT_TRUE(fs::exists(m.run_dir / "manifest.json"));
  EXPECT_TRUE(fs::exists(m.run_dir / "config.json"));
  EXPECT_TRUE(fs::exists(m.run_dir / "metrics" / "cells.csv"));
  for (const auto& f : m.files) EXPECT_TRUE(fs::exists(m.run_dir / f.path)) << f.path;
  for (const auto& c : m.cells) {
    EXPECT_EQ(line_count(m.run_dir / c.trace_file), cfg.schedule.steps + 1);
    EXPECT_FALSE(c.matches_unguided);
  }
  ASSERT_FALSE(m.trajectory.empty());
  EXPECT_LE(m.trajectory.front().ate, 1e-9);
}

TEST(Experiment, SameConfigSameManifestHash) {
  Quiet q;
  ExperimentConfig a = tiny(testutil::scratch("exp_det_a").string());
  ExperimentConfig b = tiny(testutil::scratch("exp_det_b").string());
  b.parallel = 2;
  const RunManifest ma = run_experiment(a);
  const RunManifest mb = run_experiment(b);
  EXPECT_EQ(ma.manifest_hash, mb.manifest_hash);
  ExperimentConfig c = a;
  c.seeds = {5};
  EXPECT_NE(run_experiment(c).manifest_hash, ma.manifest_hash);
}

TEST(Experiment, NullGuidanceMatchesUnguided) {
  Quiet q;
  ExperimentConfig cfg = tiny(testutil::scratch("exp_null").string());
  cfg.ablation = {"irr"};
  const RunManifest m = run_experiment(cfg);
  ASSERT_TRUE(m.success);
  for (const auto& c : m.cells) EXPECT_EQ(c.matches_unguided, !c.irr) << c.cell;
}

TEST(Experiment, PlotsFollowEnabledMechanisms) {
  Quiet q;
  const RunManifest m = run_experiment(tiny(testutil::scratch("exp_plots").string()));
  ASSERT_TRUE(m.success);
  emit_plots(m);
  const fs::path plots = m.run_dir / "plots";
  for (const auto& c : m.cells) {
    const std::string id = "seed" + std::to_string(c.seed) + "_" + c.cell;
    const fs::path curves = plots / ("curves_" + id + ".csv");
    EXPECT_EQ(line_count(curves), m.steps + 1);
    const std::string header = first_line(curves);
    EXPECT_NE(header.find("delta"), std::string::npos);
    EXPECT_EQ(header.find("alpha") != std::string::npos, c.dsg);
    EXPECT_EQ(line_count(plots / ("heatmap_" + id + ".csv")), m.channels + 1);
  }
  EXPECT_EQ(line_count(plots / "adherence_vs_step.csv"), m.steps + 1);
}

TEST(Experiment, StageFailureIsRecorded) {
  Quiet q;
  ExperimentConfig cfg = tiny(testutil::scratch("exp_fail").string());
  cfg.estimated_poses = "/nonexistent/poses.txt";
  const RunManifest m = run_experiment(cfg);
  EXPECT_FALSE(m.success);
  ASSERT_NE(m.failed_stage(), nullptr);
  EXPECT_EQ(m.failed_stage()->name, "trajectory");
  EXPECT_EQ(m.stages.back().error, "skipped after earlier failure");
  EXPECT_TRUE(fs::exists(m.run_dir / "manifest.json"));
}

TEST(Experiment, InvalidConfigThrows) {
  ExperimentConfig cfg = tiny(testutil::scratch("exp_invalid").string());
  cfg.seeds.clear();
  EXPECT_THROW(run_experiment(cfg), Error);
}
