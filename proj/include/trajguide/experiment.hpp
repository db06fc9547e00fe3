#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "trajguide/config.hpp"

namespace trajguide {

struct StageRecord {
  std::string name;
  bool ok = false;
  std::string error;
  double seconds = 0.0;
};

struct FileRecord {
  std::string path;  // relative to the run directory
  std::string sha256;
  std::uintmax_t bytes = 0;
};

struct CellResult {
  std::uint64_t seed = 0;
  std::string cell;
  bool irr = false;
  bool flf = false;
  bool dsg = false;
  /// Mean |sample - clean render| over observed latent cells.
  double adherence = 0.0;
  /// Mean |sample - guidance latent| over observed latent cells.
  double adherence_traj = 0.0;
  /// Mean |sample - clean render| over unobserved cells (0 when none).
  double unobserved_error = 0.0;
  std::string sample_hash;
  bool matches_unguided = false;
  /// Digest of the keyed generator's draw log for this chain.
  std::string draw_checksum;
  std::size_t renoise_draws = 0;
  std::string trace_file;
  std::string scores_file;
  std::string error;
  double seconds = 0.0;
};

struct TrajectoryRecord {
  std::string source;  // "warp" or "external"
  std::size_t poses = 0;
  double ate = 0.0;
  double rpe_t = 0.0;
  double rpe_r = 0.0;
  std::string note;
};

struct RunManifest {
  std::string config_hash;
  std::string version;
  std::string name;
  std::filesystem::path run_dir;
  std::size_t steps = 0;
  std::size_t channels = 0;
  std::vector<StageRecord> stages;
  std::vector<FileRecord> files;
  std::vector<CellResult> cells;
  std::map<std::uint64_t, std::string> unguided_hashes;
  std::vector<TrajectoryRecord> trajectory;
  /// Mean adherence per cell name over seeds.
  std::map<std::string, double> summary;
  /// Set when all three mechanisms are ablated.
  std::optional<bool> full_stack_best;
  /// Set when DSG is ablated: DSG on/off pairs consumed identical draws.
  std::optional<bool> dsg_rng_audit;
  double wall_clock = 0.0;
  bool success = false;
  /// SHA-256 of the manifest without timings.
  std::string manifest_hash;

  const StageRecord* failed_stage() const;
};

/// Runs every stage and writes <output_dir>/<hash prefix>/{config.json,
/// frames,traces,metrics,manifest.json}. Stage failures are recorded rather
/// than thrown; only an invalid config or an unwritable directory throws.
RunManifest run_experiment(const ExperimentConfig& config);

std::string manifest_to_json(const RunManifest& manifest, int indent = 2);

/// Writes plots/curves_<id>.csv, plots/heatmap_<id>.csv and
/// plots/adherence_vs_step.csv from the trace files named in the manifest.
/// alpha/beta columns are omitted for cells without DSG, delta for cells
/// without FLF. Returns the written paths.
std::vector<std::filesystem::path> emit_plots(const RunManifest& manifest);

/// Cell name such as "irr1_flf0_dsg1".
std::string cell_name(bool irr, bool flf, bool dsg);

/// Guidance settings for every ablation cell, in grid order.
std::vector<GuidanceConfig> ablation_cells(const GuidanceConfig& base, const std::vector<std::string>& mechanisms);

}  // namespace trajguide
