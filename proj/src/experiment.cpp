#include "trajguide/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "trajguide/error.hpp"
#include "trajguide/guidance.hpp"
#include "trajguide/io.hpp"
#include "trajguide/oracle.hpp"
#include "trajguide/rng.hpp"
#include "trajguide/scene.hpp"
#include "trajguide/traj_eval.hpp"
#include "trajguide/warp.hpp"

namespace trajguide {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Prepared {
  std::vector<CameraPose> target_poses;
  VideoRender truth;
  Tensor truth_latent;
  Tensor z_traj;
  ValidityMask masks;
  std::optional<DenoiserOracle> oracle;
  NoiseSchedule schedule = NoiseSchedule::uniform_flow(1);
};

SceneSpec shifted_textures(SceneSpec scene, std::uint64_t shift) {
  for (auto& p : scene.planes) p.texture.seed += shift;
  for (auto& s : scene.spheres) s.texture.seed += shift;
  return scene;
}

ValidityMask replicate_channels(const ValidityMask& mask, std::size_t channels) {
  Shape s = mask.shape();
  s.channels = channels;
  ValidityMask out(s);
  const std::size_t n = mask.values().size();
  for (std::size_t c = 0; c < channels; ++c)
    std::copy(mask.values().begin(), mask.values().end(), out.values().begin() + c * n);
  return out;
}

void stage_scene(const ExperimentConfig& cfg, Prepared& p) {
  p.target_poses = make_trajectory(cfg.trajectory);
  p.truth = render_video(cfg.scene, p.target_poses, cfg.height, cfg.width, true);
}

void stage_warp(const ExperimentConfig& cfg, Prepared& p) {
  const std::size_t T = p.target_poses.size();
  const Shape pix{cfg.scene.channels, T, cfg.height, cfg.width};
  Tensor guidance;
  ValidityMask mask;
  if (cfg.mask.source == MaskSource::kWarp) {
    std::vector<CameraPose> src_poses(T, p.target_poses.front());
    Tensor frames(pix);
    std::vector<DepthMap> depths;
    if (cfg.guidance_source == GuidanceSource::kFirstFrame) {
      const RenderResult first = render(cfg.scene, p.target_poses.front(), cfg.height, cfg.width, 0.0);
      for (std::size_t k = 0; k < T; ++k) frames.set_frame(k, first.image);
      depths.assign(T, first.depth);
    } else {
      const VideoRender fixed = render_video(cfg.scene, src_poses, cfg.height, cfg.width, true);
      frames = fixed.video;
      depths = fixed.depths;
    }
    SequenceWarp sw = warp_sequence(frames, depths, src_poses, p.target_poses);
    guidance = std::move(sw.video);
    mask = std::move(sw.masks);
  } else {
    guidance = p.truth.video;
    mask = ValidityMask(Shape{1, T, cfg.height, cfg.width}, 0);
    for (std::size_t t = 0; t < T; ++t)
      for (std::size_t y = 0; y < cfg.height; ++y)
        for (std::size_t x = 0; x < cfg.width; ++x)
          mask.at(0, t, y, x) = cfg.mask.source == MaskSource::kFull || x < cfg.width / 2;
  }

  p.truth_latent = embed_video(p.truth.video, cfg.embedding);
  p.z_traj = embed_video(guidance, cfg.embedding);
  p.masks = embed_mask(mask, cfg.embedding.pool);
  if (p.masks.count() == 0) warn("guidance mask is empty; guidance has no effect");

  if (!cfg.corruption.channels.empty() && cfg.corruption.noise_sd > 0.0) {
    KeyedRng rng(cfg.corruption.seed);
    const Tensor noise = rng.gaussian(p.z_traj.shape(), {NoisePurpose::kScene, 0, 0});
    const std::size_t block = p.z_traj.shape().frames * p.z_traj.shape().plane();
    for (std::size_t c : cfg.corruption.channels) {
      if (c >= p.z_traj.shape().channels) throw Error("corruption channel out of range");
      for (std::size_t i = c * block; i < (c + 1) * block; ++i) p.z_traj[i] += cfg.corruption.noise_sd * noise[i];
    }
  }
  if (cfg.mask.per_channel) p.masks = replicate_channels(p.masks, p.z_traj.shape().channels);
}

void stage_oracle(const ExperimentConfig& cfg, Prepared& p) {
  p.schedule = cfg.schedule.build();
  const OracleSpec& o = cfg.oracle;
  switch (o.kind) {
    case OracleChoice::kTabulated:
      p.oracle = DenoiserOracle::tabulated(p.truth_latent, o.convention);
      break;
    case OracleChoice::kIsotropicGaussian:
      p.oracle = DenoiserOracle::isotropic_gaussian(Tensor::scalar(o.mean), o.variance, o.convention);
      break;
    case OracleChoice::kConstantEps:
      p.oracle = DenoiserOracle::constant_eps(o.eps, o.convention);
      break;
    case OracleChoice::kGaussianMixture: {
      std::vector<Tensor> means{p.truth_latent};
      for (const auto& d : o.distractors) {
        const std::vector<CameraPose> poses = d.trajectory ? make_trajectory(*d.trajectory) : p.target_poses;
        if (poses.size() != p.target_poses.size()) throw Error("distractor trajectory frame count differs");
        const SceneSpec scene = shifted_textures(cfg.scene, d.texture_seed_shift);
        means.push_back(embed_video(render_video(scene, poses, cfg.height, cfg.width, true).video, cfg.embedding));
      }
      const std::size_t n = means.size();
      p.oracle = DenoiserOracle::gaussian_mixture(std::vector<double>(n, 1.0 / static_cast<double>(n)),
                                                  std::move(means), std::vector<double>(n, o.variance),
                                                  o.convention);
      break;
    }
  }
}

std::string draw_digest(const std::vector<DrawRecord>& log) {
  std::ostringstream os;
  for (const auto& r : log)
    os << static_cast<std::uint32_t>(r.key.purpose) << ':' << r.key.step << ':' << r.key.sub << ':' << r.count << ':'
       << r.checksum << ';';
  return sha256_hex(os.str()).substr(0, 16);
}

double unobserved_error(const Tensor& a, const Tensor& b, const ValidityMask& mask) {
  const Shape& s = a.shape();
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t c = 0; c < s.channels; ++c)
    for (std::size_t t = 0; t < s.frames; ++t)
      for (std::size_t y = 0; y < s.height; ++y)
        for (std::size_t x = 0; x < s.width; ++x)
          if (!mask.observed(c, t, y, x)) {
            sum += std::abs(a.at(c, t, y, x) - b.at(c, t, y, x));
            ++n;
          }
  return n ? sum / static_cast<double>(n) : 0.0;
}

void write_scores_csv(const fs::path& path, const GuidanceTrace& trace) {
  std::ostringstream os;
  os << "step";
  for (std::size_t c = 0; c < trace.channels; ++c) os << ",c" << c;
  os << '\n';
  os.precision(17);
  for (const auto& e : trace.entries) {
    os << e.step;
    for (std::size_t c = 0; c < trace.channels; ++c) {
      os << ',';
      if (c < e.channel_scores.size() && std::isfinite(e.channel_scores[c])) os << e.channel_scores[c];
    }
    os << '\n';
  }
  write_text_atomic(path, os.str());
}

std::string job_id(std::uint64_t seed, const std::string& cell) { return "seed" + std::to_string(seed) + "_" + cell; }

void run_jobs(std::size_t count, std::size_t parallel, const std::function<void(std::size_t)>& job) {
  const std::size_t workers = std::max<std::size_t>(1, std::min(parallel, count));
  if (workers == 1) {
    for (std::size_t i = 0; i < count; ++i) job(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) job(i);
    });
  for (auto& t : pool) t.join();
}

std::vector<TrajectoryRecord> stage_trajectory(const ExperimentConfig& cfg, const Prepared& p, const fs::path& dir) {
  const PoseTrajectory reference = PoseTrajectory::from_cameras(make_trajectory(cfg.trajectory));
  write_pose_file((dir / "metrics" / "target_poses.txt").string(), reference);
  std::vector<std::pair<std::string, PoseTrajectory>> sources{
      {"warp", PoseTrajectory::from_cameras(p.target_poses)}};
  if (!cfg.estimated_poses.empty()) sources.emplace_back("external", read_pose_file(cfg.estimated_poses));

  std::vector<TrajectoryRecord> out;
  for (const auto& [name, est] : sources) {
    TrajectoryRecord r;
    r.source = name;
    r.poses = est.size();
    if (est.size() != reference.size()) throw Error(name + " trajectory has " + std::to_string(est.size()) +
                                                    " poses, expected " + std::to_string(reference.size()));
    try {
      const TrajectoryMetrics m = evaluate_trajectory(est, reference);
      r.ate = m.ate.rmse;
      r.rpe_t = m.rpe_t.rmse;
      r.rpe_r = m.rpe_r.rmse;
    } catch (const Error& e) {
      if (name == "external") throw;
      // Short or static camera paths cannot be similarity-aligned.
      r.note = e.what();
    }
    out.push_back(r);
  }
  std::ostringstream os;
  os.precision(17);
  os << "source,poses,ate_rmse,rpe_t_rmse,rpe_r_deg,note\n";
  for (const auto& r : out) os << r.source << ',' << r.poses << ',' << r.ate << ',' << r.rpe_t << ',' << r.rpe_r << ",\"" << r.note << "\"\n";
  write_text_atomic(dir / "metrics" / "trajectory.csv", os.str());
  return out;
}

json manifest_json(const RunManifest& m, bool with_timing) {
  json stages = json::array();
  for (const auto& s : m.stages) {
    json j{{"name", s.name}, {"ok", s.ok}, {"error", s.error}};
    if (with_timing) j["seconds"] = s.seconds;
    stages.push_back(j);
  }
  json files = json::array();
  for (const auto& f : m.files) files.push_back({{"path", f.path}, {"sha256", f.sha256}, {"bytes", f.bytes}});
  json cells = json::array();
  for (const auto& c : m.cells) {
    json j{{"seed", c.seed},
           {"cell", c.cell},
           {"irr", c.irr},
           {"flf", c.flf},
           {"dsg", c.dsg},
           {"adherence", c.adherence},
           {"adherence_traj", c.adherence_traj},
           {"unobserved_error", c.unobserved_error},
           {"sample_hash", c.sample_hash},
           {"matches_unguided", c.matches_unguided},
           {"draw_checksum", c.draw_checksum},
           {"renoise_draws", c.renoise_draws},
           {"trace", c.trace_file},
           {"scores", c.scores_file},
           {"error", c.error}};
    if (with_timing) j["seconds"] = c.seconds;
    cells.push_back(j);
  }
  json unguided = json::object();
  for (const auto& [seed, h] : m.unguided_hashes) unguided[std::to_string(seed)] = h;
  json traj = json::array();
  for (const auto& t : m.trajectory)
    traj.push_back({{"source", t.source}, {"poses", t.poses}, {"ate", t.ate}, {"rpe_t", t.rpe_t}, {"rpe_r_deg", t.rpe_r}, {"note", t.note}});
  json j{{"config_hash", m.config_hash},
         {"version", m.version},
         {"name", m.name},
         {"steps", m.steps},
         {"channels", m.channels},
         {"success", m.success},
         {"stages", stages},
         {"files", files},
         {"cells", cells},
         {"unguided_hashes", unguided},
         {"trajectory", traj},
         {"summary", m.summary},
         {"full_stack_best", m.full_stack_best ? json(*m.full_stack_best) : json(nullptr)},
         {"dsg_rng_audit", m.dsg_rng_audit ? json(*m.dsg_rng_audit) : json(nullptr)}};
  if (with_timing) {
    j["wall_clock"] = m.wall_clock;
    j["manifest_hash"] = m.manifest_hash;
  }
  return j;
}

std::vector<FileRecord> inventory(const fs::path& dir) {
  std::vector<FileRecord> out;
  for (const auto& entry : fs::recursive_directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const std::string rel = fs::relative(entry.path(), dir).generic_string();
    if (rel == "manifest.json" || rel.rfind("plots/", 0) == 0) continue;
    out.push_back({rel, sha256_file(entry.path()), entry.file_size()});
  }
  std::sort(out.begin(), out.end(), [](const FileRecord& a, const FileRecord& b) { return a.path < b.path; });
  return out;
}

// Minimal reader for the CSV files this module writes (no quoting inside
// numeric columns).
struct Csv {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::ptrdiff_t column(const std::string& name) const {
    const auto it = std::find(header.begin(), header.end(), name);
    return it == header.end() ? -1 : it - header.begin();
  }
};

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

Csv read_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("missing trace file " + path.string());
  Csv csv;
  std::string line;
  if (!std::getline(in, line)) throw Error("empty trace file " + path.string());
  csv.header = split_line(line);
  while (std::getline(in, line))
    if (!line.empty()) csv.rows.push_back(split_line(line));
  return csv;
}

}  // namespace

const StageRecord* RunManifest::failed_stage() const {
  for (const auto& s : stages)
    if (!s.ok) return &s;
  return nullptr;
}

std::string cell_name(bool irr, bool flf, bool dsg) {
  return std::string("irr") + (irr ? "1" : "0") + "_flf" + (flf ? "1" : "0") + "_dsg" + (dsg ? "1" : "0");
}

std::vector<GuidanceConfig> ablation_cells(const GuidanceConfig& base, const std::vector<std::string>& mechanisms) {
  const bool a_irr = std::count(mechanisms.begin(), mechanisms.end(), "irr") > 0;
  const bool a_flf = std::count(mechanisms.begin(), mechanisms.end(), "flf") > 0;
  const bool a_dsg = std::count(mechanisms.begin(), mechanisms.end(), "dsg") > 0;
  for (const auto& m : mechanisms)
    if (m != "irr" && m != "flf" && m != "dsg") throw Error("unknown ablation mechanism '" + m + "'");
  std::vector<GuidanceConfig> out;
  for (int irr = 0; irr < 2; ++irr) {
    if (!a_irr && irr != static_cast<int>(base.irr_enabled)) continue;
    for (int flf = 0; flf < 2; ++flf) {
      if (!a_flf && flf != static_cast<int>(base.flf_enabled)) continue;
      for (int dsg = 0; dsg < 2; ++dsg) {
        if (!a_dsg && dsg != static_cast<int>(base.dsg_enabled)) continue;
        GuidanceConfig g = base;
        g.irr_enabled = irr;
        g.flf_enabled = flf;
        g.dsg_enabled = dsg;
        out.push_back(g);
      }
    }
  }
  return out;
}

RunManifest run_experiment(const ExperimentConfig& config) {
  config.validate();
  const auto t_run = Clock::now();
  RunManifest m;
  m.config_hash = config_hash(config);
  m.version = TRAJGUIDE_VERSION;
  m.name = config.name;
  m.steps = config.schedule.steps;
  m.run_dir = fs::path(config.output_dir) / m.config_hash.substr(0, 16);

  const fs::path& dir = m.run_dir;
  std::error_code ec;
  fs::remove_all(dir, ec);
  for (const char* sub : {"frames", "traces", "metrics"}) {
    fs::create_directories(dir / sub, ec);
    if (ec) throw Error("cannot create output directory " + (dir / sub).string() + ": " + ec.message());
  }
  write_text_atomic(dir / "config.json", canonical_config_json(config) + "\n");

  Prepared p;
  bool blocked = false;
  auto stage = [&](const std::string& name, const std::function<void()>& body) {
    StageRecord rec;
    rec.name = name;
    if (blocked) {
      rec.error = "skipped after earlier failure";
      m.stages.push_back(rec);
      return;
    }
    const auto t0 = Clock::now();
    try {
      body();
      rec.ok = true;
    } catch (const std::exception& e) {
      rec.error = e.what();
      blocked = true;
    }
    rec.seconds = seconds_since(t0);
    m.stages.push_back(rec);
  };

  stage("scene", [&] {
    stage_scene(config, p);
    write_tensor(dir / "frames" / "truth.ltns", p.truth.video);
    write_depth(dir / "frames" / "depth_0.ltns", p.truth.depths.front());
    write_channel_strip(dir / "frames" / "truth_0.pgm", p.truth.video, 0);
  });
  stage("warp", [&] {
    stage_warp(config, p);
    m.channels = p.z_traj.shape().channels;
    write_tensor(dir / "frames" / "guidance.ltns", p.z_traj);
    write_mask(dir / "frames" / "mask.ltns", p.masks);
  });
  stage("oracle", [&] { stage_oracle(config, p); });
  stage("trajectory", [&] { m.trajectory = stage_trajectory(config, p, dir); });

  stage("sampling", [&] {
    const std::vector<GuidanceConfig> cells = ablation_cells(config.guidance, config.ablation);
    const Shape shape = p.z_traj.shape();

    for (std::uint64_t seed : config.seeds) {
      KeyedRng rng(seed);
      const Tensor noise = rng.gaussian(shape, {NoisePurpose::kInitial, 0, 0});
      GuidanceConfig off = config.guidance;
      off.irr_enabled = false;
      const GuidedResult r = guided_sample(noise, *p.oracle, p.z_traj, p.masks, off, p.schedule, &rng);
      m.unguided_hashes[seed] = tensor_hash(r.sample);
    }

    const std::size_t jobs = config.seeds.size() * cells.size();
    m.cells.resize(jobs);
    run_jobs(jobs, config.parallel, [&](std::size_t j) {
      const std::uint64_t seed = config.seeds[j / cells.size()];
      const GuidanceConfig& g = cells[j % cells.size()];
      CellResult& out = m.cells[j];
      out.seed = seed;
      out.irr = g.irr_enabled;
      out.flf = g.flf_enabled;
      out.dsg = g.dsg_enabled;
      out.cell = cell_name(out.irr, out.flf, out.dsg);
      const auto t0 = Clock::now();
      try {
        KeyedRng rng(seed);
        const Tensor noise = rng.gaussian(shape, {NoisePurpose::kInitial, 0, 0});
        const GuidedResult r = guided_sample(noise, *p.oracle, p.z_traj, p.masks, g, p.schedule, &rng);
        out.adherence = observed_adherence(r.sample, p.truth_latent, p.masks);
        out.adherence_traj = observed_adherence(r.sample, p.z_traj, p.masks);
        out.unobserved_error = unobserved_error(r.sample, p.truth_latent, p.masks);
        out.sample_hash = tensor_hash(r.sample);
        out.matches_unguided = out.sample_hash == m.unguided_hashes.at(seed);
        out.draw_checksum = draw_digest(rng.log());
        out.renoise_draws = static_cast<std::size_t>(std::count_if(
            rng.log().begin(), rng.log().end(), [](const DrawRecord& d) { return d.key.purpose == NoisePurpose::kRenoise; }));

        const std::string id = job_id(seed, out.cell);
        write_tensor(dir / "frames" / (id + ".ltns"), r.sample);
        write_channel_strip(dir / "frames" / (id + "_last.pgm"), r.sample, shape.frames - 1);
        std::ostringstream trace;
        write_trace_csv(trace, r.trace);
        out.trace_file = "traces/" + id + ".csv";
        write_text_atomic(dir / out.trace_file, trace.str());
        out.scores_file = "traces/" + id + "_scores.csv";
        write_scores_csv(dir / out.scores_file, r.trace);
      } catch (const std::exception& e) {
        out.error = e.what();
      }
      out.seconds = seconds_since(t0);
    });
    for (const auto& c : m.cells)
      if (!c.error.empty()) throw Error("cell " + job_id(c.seed, c.cell) + ": " + c.error);
  });

  stage("metrics", [&] {
    std::map<std::string, std::pair<double, std::size_t>> acc;
    for (const auto& c : m.cells) {
      auto& a = acc[c.cell];
      a.first += c.adherence;
      ++a.second;
    }
    for (const auto& [name, a] : acc) m.summary[name] = a.first / static_cast<double>(a.second);

    const auto has = [&](const char* mech) {
      return std::count(config.ablation.begin(), config.ablation.end(), mech) > 0;
    };
    if (has("irr") && has("flf") && has("dsg")) {
      const double full = m.summary.at(cell_name(true, true, true));
      bool best = true;
      for (const auto& [name, v] : m.summary)
        if (name != cell_name(true, true, true) && !(full < v)) best = false;
      m.full_stack_best = best;
    }
    if (has("dsg")) {
      bool same = true;
      for (const auto& a : m.cells)
        for (const auto& b : m.cells)
          if (a.seed == b.seed && a.irr == b.irr && a.flf == b.flf && a.dsg != b.dsg)
            same = same && a.draw_checksum == b.draw_checksum;
      m.dsg_rng_audit = same;
    }

    std::ostringstream os;
    os.precision(17);
    os << "seed,cell,irr,flf,dsg,adherence,adherence_traj,unobserved_error,matches_unguided,renoise_draws,sample_hash\n";
    for (const auto& c : m.cells)
      os << c.seed << ',' << c.cell << ',' << c.irr << ',' << c.flf << ',' << c.dsg << ',' << c.adherence << ','
         << c.adherence_traj << ',' << c.unobserved_error << ',' << c.matches_unguided << ',' << c.renoise_draws << ','
         << c.sample_hash << '\n';
    write_text_atomic(dir / "metrics" / "cells.csv", os.str());

    std::ostringstream sm;
    sm.precision(17);
    sm << "cell,mean_adherence\n";
    for (const auto& [name, v] : m.summary) sm << name << ',' << v << '\n';
    write_text_atomic(dir / "metrics" / "summary.csv", sm.str());
  });

  m.files = inventory(dir);
  m.success = m.failed_stage() == nullptr;
  m.manifest_hash = sha256_hex(manifest_json(m, false).dump());
  m.wall_clock = seconds_since(t_run);
  write_text_atomic(dir / "manifest.json", manifest_to_json(m) + "\n");
  return m;
}

std::string manifest_to_json(const RunManifest& manifest, int indent) {
  return manifest_json(manifest, true).dump(indent);
}

std::vector<fs::path> emit_plots(const RunManifest& manifest) {
  if (manifest.cells.empty()) throw Error("manifest has no sampling cells");
  const fs::path plots = manifest.run_dir / "plots";
  fs::create_directories(plots);
  std::vector<fs::path> written;
  std::vector<std::string> adherence_names;
  std::vector<std::vector<std::string>> adherence_cols;
  std::vector<std::string> steps;

  for (const auto& c : manifest.cells) {
    if (c.trace_file.empty()) throw Error("cell " + c.cell + " has no trace file");
    const Csv trace = read_csv(manifest.run_dir / c.trace_file);
    const std::string id = job_id(c.seed, c.cell);

    std::vector<std::string> cols{"step", "noise_level", "renoise_weight"};
    if (c.irr && c.flf) cols.insert(cols.end(), {"delta", "mu_s", "sigma_s"});
    if (c.irr && c.dsg) cols.insert(cols.end(), {"alpha", "beta", "correction_norm"});
    cols.push_back("adherence");
    std::vector<std::ptrdiff_t> idx;
    for (const auto& name : cols) {
      idx.push_back(trace.column(name));
      if (idx.back() < 0) throw Error("trace " + c.trace_file + " lacks column " + name);
    }
    std::ostringstream os;
    for (std::size_t i = 0; i < cols.size(); ++i) os << (i ? "," : "") << cols[i];
    os << '\n';
    for (const auto& row : trace.rows) {
      for (std::size_t i = 0; i < idx.size(); ++i)
        os << (i ? "," : "") << (static_cast<std::size_t>(idx[i]) < row.size() ? row[idx[i]] : "");
      os << '\n';
    }
    written.push_back(plots / ("curves_" + id + ".csv"));
    write_text_atomic(written.back(), os.str());

    if (c.irr && c.flf) {
      const Csv scores = read_csv(manifest.run_dir / c.scores_file);
      std::ostringstream hm;
      hm << "channel";
      for (const auto& row : scores.rows) hm << ",step" << row.at(0);
      hm << '\n';
      for (std::size_t ch = 1; ch < scores.header.size(); ++ch) {
        hm << ch - 1;
        for (const auto& row : scores.rows) hm << ',' << (ch < row.size() ? row[ch] : "");
        hm << '\n';
      }
      written.push_back(plots / ("heatmap_" + id + ".csv"));
      write_text_atomic(written.back(), hm.str());
    }

    const std::ptrdiff_t a = trace.column("adherence");
    std::vector<std::string> col;
    for (const auto& row : trace.rows) col.push_back(row.at(a));
    if (steps.empty())
      for (const auto& row : trace.rows) steps.push_back(row.at(0));
    adherence_names.push_back(id);
    adherence_cols.push_back(std::move(col));
  }

  std::ostringstream os;
  os << "step";
  for (const auto& n : adherence_names) os << ',' << n;
  os << '\n';
  for (std::size_t r = 0; r < steps.size(); ++r) {
    os << steps[r];
    for (const auto& col : adherence_cols) os << ',' << (r < col.size() ? col[r] : "");
    os << '\n';
  }
  written.push_back(plots / "adherence_vs_step.csv");
  write_text_atomic(written.back(), os.str());
  return written;
}

}  // namespace trajguide
