#include "trajguide/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "trajguide/error.hpp"
#include "trajguide/io.hpp"

namespace trajguide {
namespace {

using json = nlohmann::json;

// Object reader that tracks which keys were consumed so leftovers can be
// reported as unknown.
class Obj {
 public:
  Obj(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j.is_object()) throw Error(path_ + ": expected an object");
  }

  const json* find(const char* key) {
    const auto it = j_.find(key);
    if (it == j_.end()) return nullptr;
    used_.insert(key);
    return &*it;
  }

  std::string at(const char* key) const { return path_ + "." + key; }

  template <typename T>
  void get(const char* key, T& out);

  void finish() const {
    for (const auto& item : j_.items())
      if (!used_.count(item.key())) throw Error(path_ + ": unknown key '" + item.key() + "'");
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> used_;
};

double as_double(const json& j, const std::string& path) {
  if (!j.is_number()) throw Error(path + ": expected a number");
  return j.get<double>();
}

std::uint64_t as_uint(const json& j, const std::string& path) {
  if (!j.is_number_unsigned()) {
    if (j.is_number_integer() && j.get<std::int64_t>() >= 0) return j.get<std::uint64_t>();
    throw Error(path + ": expected a non-negative integer");
  }
  return j.get<std::uint64_t>();
}

bool as_bool(const json& j, const std::string& path) {
  if (!j.is_boolean()) throw Error(path + ": expected true or false");
  return j.get<bool>();
}

std::string as_string(const json& j, const std::string& path) {
  if (!j.is_string()) throw Error(path + ": expected a string");
  return j.get<std::string>();
}

std::vector<double> as_doubles(const json& j, const std::string& path, std::size_t n = 0) {
  if (!j.is_array()) throw Error(path + ": expected an array");
  if (n && j.size() != n) throw Error(path + ": expected " + std::to_string(n) + " numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(as_double(j[i], path + "[" + std::to_string(i) + "]"));
  return out;
}

Vec3 as_vec3(const json& j, const std::string& path) {
  const auto v = as_doubles(j, path, 3);
  return Vec3(v[0], v[1], v[2]);
}

Mat3 as_mat3(const json& j, const std::string& path) {
  const auto v = as_doubles(j, path, 9);
  Mat3 m;
  m << v[0], v[1], v[2], v[3], v[4], v[5], v[6], v[7], v[8];
  return m;
}

template <>
void Obj::get<double>(const char* key, double& out) {
  if (const json* j = find(key)) out = as_double(*j, at(key));
}
template <>
void Obj::get<std::size_t>(const char* key, std::size_t& out) {
  if (const json* j = find(key)) out = static_cast<std::size_t>(as_uint(*j, at(key)));
}
template <>
void Obj::get<bool>(const char* key, bool& out) {
  if (const json* j = find(key)) out = as_bool(*j, at(key));
}
template <>
void Obj::get<std::string>(const char* key, std::string& out) {
  if (const json* j = find(key)) out = as_string(*j, at(key));
}
template <>
void Obj::get<Vec3>(const char* key, Vec3& out) {
  if (const json* j = find(key)) out = as_vec3(*j, at(key));
}

json vec_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }
json mat_json(const Mat3& m) {
  json a = json::array();
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) a.push_back(m(r, c));
  return a;
}

std::string schedule_kind_name(ScheduleKind k) { return k == ScheduleKind::kLinearFlow ? "linear_flow" : "discrete_ddim"; }
ScheduleKind schedule_kind_from(const std::string& s, const std::string& path) {
  if (s == "linear_flow") return ScheduleKind::kLinearFlow;
  if (s == "discrete_ddim") return ScheduleKind::kDiscreteDdim;
  throw Error(path + ": unknown schedule kind '" + s + "'");
}

std::string convention_name(OutputConvention c) { return c == OutputConvention::kVelocity ? "velocity" : "epsilon"; }
OutputConvention convention_from(const std::string& s, const std::string& path) {
  if (s == "velocity") return OutputConvention::kVelocity;
  if (s == "epsilon") return OutputConvention::kEpsilon;
  throw Error(path + ": unknown output convention '" + s + "'");
}

OracleChoice oracle_from(const std::string& s, const std::string& path) {
  for (auto o : {OracleChoice::kGaussianMixture, OracleChoice::kTabulated, OracleChoice::kIsotropicGaussian,
                 OracleChoice::kConstantEps})
    if (to_string(o) == s) return o;
  throw Error(path + ": unknown oracle kind '" + s + "'");
}

std::string mask_source_name(MaskSource m) {
  switch (m) {
    case MaskSource::kWarp: return "warp";
    case MaskSource::kLeftHalf: return "left_half";
    case MaskSource::kFull: return "full";
  }
  return "warp";
}
MaskSource mask_source_from(const std::string& s, const std::string& path) {
  for (auto m : {MaskSource::kWarp, MaskSource::kLeftHalf, MaskSource::kFull})
    if (mask_source_name(m) == s) return m;
  throw Error(path + ": unknown mask source '" + s + "'");
}

std::string guidance_source_name(GuidanceSource g) { return g == GuidanceSource::kFirstFrame ? "first_frame" : "per_frame"; }
GuidanceSource guidance_source_from(const std::string& s, const std::string& path) {
  if (s == "first_frame") return GuidanceSource::kFirstFrame;
  if (s == "per_frame") return GuidanceSource::kPerFrame;
  throw Error(path + ": unknown guidance source '" + s + "'");
}

template <typename F>
auto wrap(const std::string& path, F&& f) {
  try {
    return f();
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    throw Error(path + ": " + e.what());
  }
}

Texture parse_texture(const json& j, const std::string& path) {
  Obj o(j, path);
  Texture t;
  std::string kind = to_string(t.kind);
  o.get("kind", kind);
  t.kind = wrap(path, [&] { return texture_kind_from_string(kind); });
  o.get("scale", t.scale);
  std::size_t seed = t.seed;
  o.get("seed", seed);
  t.seed = seed;
  o.get("value", t.value);
  o.finish();
  return t;
}

RigidMotion parse_motion(const json& j, const std::string& path) {
  Obj o(j, path);
  RigidMotion m;
  o.get("velocity", m.velocity);
  o.get("angular_velocity", m.angular_velocity);
  o.finish();
  return m;
}

SceneSpec parse_scene(const json& j, const std::string& path) {
  Obj o(j, path);
  SceneSpec s;
  o.get("channels", s.channels);
  o.get("far_plane", s.far_plane);
  o.get("background", s.background);
  if (const json* planes = o.find("planes")) {
    if (!planes->is_array()) throw Error(o.at("planes") + ": expected an array");
    for (std::size_t i = 0; i < planes->size(); ++i) {
      const std::string p = o.at("planes") + "[" + std::to_string(i) + "]";
      Obj po((*planes)[i], p);
      PlanePrimitive pl;
      po.get("center", pl.center);
      po.get("normal", pl.normal);
      po.get("axis_u", pl.axis_u);
      po.get("half_width", pl.half_width);
      po.get("half_height", pl.half_height);
      if (const json* t = po.find("texture")) pl.texture = parse_texture(*t, p + ".texture");
      if (const json* m = po.find("motion")) pl.motion = parse_motion(*m, p + ".motion");
      po.finish();
      s.planes.push_back(pl);
    }
  }
  if (const json* spheres = o.find("spheres")) {
    if (!spheres->is_array()) throw Error(o.at("spheres") + ": expected an array");
    for (std::size_t i = 0; i < spheres->size(); ++i) {
      const std::string p = o.at("spheres") + "[" + std::to_string(i) + "]";
      Obj so((*spheres)[i], p);
      SpherePrimitive sp;
      so.get("center", sp.center);
      so.get("radius", sp.radius);
      if (const json* t = so.find("texture")) sp.texture = parse_texture(*t, p + ".texture");
      if (const json* m = so.find("motion")) sp.motion = parse_motion(*m, p + ".motion");
      so.finish();
      s.spheres.push_back(sp);
    }
  }
  o.finish();
  return s;
}

Intrinsics parse_intrinsics(const json& j, const std::string& path) {
  Obj o(j, path);
  Intrinsics k;
  o.get("fx", k.fx);
  o.get("fy", k.fy);
  o.get("cx", k.cx);
  o.get("cy", k.cy);
  o.finish();
  return k;
}

TrajectorySpec parse_trajectory(const json& j, const std::string& path, TrajectorySpec t, std::size_t height,
                                std::size_t width, bool default_fov) {
  Obj o(j, path);
  std::string kind = to_string(t.kind);
  o.get("kind", kind);
  t.kind = wrap(path, [&] { return trajectory_kind_from_string(kind); });
  o.get("frames", t.frames);
  const json* intr = o.find("intrinsics");
  const json* fov = o.find("hfov_deg");
  if (intr && fov) throw Error(path + ": give either intrinsics or hfov_deg, not both");
  if (intr) {
    t.intrinsics = parse_intrinsics(*intr, path + ".intrinsics");
  } else if (fov) {
    t.intrinsics = wrap(path, [&] { return Intrinsics::from_fov(as_double(*fov, o.at("hfov_deg")), height, width); });
  } else if (default_fov) {
    t.intrinsics = Intrinsics::from_fov(50.0, height, width);
  }
  o.get("target", t.target);
  o.get("radius", t.radius);
  o.get("start_deg", t.start_deg);
  o.get("sweep_deg", t.sweep_deg);
  o.get("height", t.height);
  o.get("end_distance", t.end_distance);
  o.get("pan_deg", t.pan_deg);
  o.get("max_rotation_step_deg", t.max_rotation_step_deg);
  o.get("max_translation_step", t.max_translation_step);
  if (const json* custom = o.find("custom")) {
    if (!custom->is_array()) throw Error(o.at("custom") + ": expected an array");
    t.custom.clear();
    for (std::size_t i = 0; i < custom->size(); ++i) {
      const std::string p = o.at("custom") + "[" + std::to_string(i) + "]";
      Obj co((*custom)[i], p);
      const json* K = co.find("K");
      const json* R = co.find("R");
      const json* tr = co.find("t");
      if (!R || !tr) throw Error(p + ": custom poses need R and t");
      const Mat3 Km = K ? as_mat3(*K, p + ".K") : t.intrinsics.matrix();
      co.finish();
      t.custom.push_back(wrap(p, [&] { return CameraPose(Km, as_mat3(*R, p + ".R"), as_vec3(*tr, p + ".t")); }));
    }
  }
  o.finish();
  return t;
}

FlowMetricConfig parse_flow(const json& j, const std::string& path) {
  Obj o(j, path);
  FlowMetricConfig f;
  o.get("n_E", f.n_E);
  o.get("n_A_deg", f.n_A_deg);
  o.get("n_F", f.n_F);
  if (const json* g = o.find("gamma")) {
    const auto v = as_doubles(*g, o.at("gamma"), 3);
    f.gamma = {v[0], v[1], v[2]};
  }
  o.get("fl_epe_threshold", f.fl_epe_threshold);
  o.get("fl_rel_threshold", f.fl_rel_threshold);
  std::string rule = f.fl_rule == FlOutlierRule::kAny ? "any" : "all";
  o.get("fl_rule", rule);
  if (rule != "any" && rule != "all") throw Error(o.at("fl_rule") + ": expected 'any' or 'all'");
  f.fl_rule = rule == "any" ? FlOutlierRule::kAny : FlOutlierRule::kAll;
  o.get("levels", f.flow.levels);
  o.get("pyr_scale", f.flow.pyr_scale);
  o.get("window", f.flow.window);
  o.get("iterations", f.flow.iterations);
  o.get("poly_n", f.flow.poly_n);
  o.get("poly_sigma", f.flow.poly_sigma);
  o.finish();
  return f;
}

GuidanceConfig parse_guidance(const json& j, const std::string& path) {
  Obj o(j, path);
  GuidanceConfig g;
  o.get("irr", g.irr_enabled);
  std::string s = to_string(g.renoise);
  o.get("renoise", s);
  g.renoise = wrap(path, [&] { return renoise_scheduler_from_string(s); });
  if (const json* w = o.find("custom_weights")) g.custom_weights = as_doubles(*w, o.at("custom_weights"));
  s = to_string(g.renoise_noise);
  o.get("renoise_noise", s);
  g.renoise_noise = wrap(path, [&] { return renoise_noise_from_string(s); });
  o.get("irr_recursions", g.irr_recursions);
  o.get("flf", g.flf_enabled);
  o.get("lambda_start", g.lambda_start);
  o.get("lambda_end", g.lambda_end);
  o.get("dsg", g.dsg_enabled);
  o.get("rho", g.rho);
  s = to_string(g.dsg_normalization);
  o.get("dsg_normalization", s);
  g.dsg_normalization = wrap(path, [&] { return dsg_normalization_from_string(s); });
  if (const json* f = o.find("flow")) g.flow_cfg = parse_flow(*f, path + ".flow");
  o.finish();
  return g;
}

json trajectory_json(const TrajectorySpec& t) {
  json j{{"kind", to_string(t.kind)},
         {"frames", t.frames},
         {"intrinsics", {{"fx", t.intrinsics.fx}, {"fy", t.intrinsics.fy}, {"cx", t.intrinsics.cx}, {"cy", t.intrinsics.cy}}},
         {"target", vec_json(t.target)},
         {"radius", t.radius},
         {"start_deg", t.start_deg},
         {"sweep_deg", t.sweep_deg},
         {"height", t.height},
         {"end_distance", t.end_distance},
         {"pan_deg", t.pan_deg},
         {"max_rotation_step_deg", t.max_rotation_step_deg},
         {"max_translation_step", t.max_translation_step}};
  if (!t.custom.empty()) {
    json c = json::array();
    for (const auto& p : t.custom) c.push_back({{"K", mat_json(p.K())}, {"R", mat_json(p.R())}, {"t", vec_json(p.t())}});
    j["custom"] = c;
  }
  return j;
}

json texture_json(const Texture& t) {
  return {{"kind", to_string(t.kind)}, {"scale", t.scale}, {"seed", t.seed}, {"value", t.value}};
}

json motion_json(const RigidMotion& m) {
  return {{"velocity", vec_json(m.velocity)}, {"angular_velocity", vec_json(m.angular_velocity)}};
}

json to_json(const ExperimentConfig& c) {
  json planes = json::array();
  for (const auto& p : c.scene.planes)
    planes.push_back({{"center", vec_json(p.center)},
                      {"normal", vec_json(p.normal)},
                      {"axis_u", vec_json(p.axis_u)},
                      {"half_width", p.half_width},
                      {"half_height", p.half_height},
                      {"texture", texture_json(p.texture)},
                      {"motion", motion_json(p.motion)}});
  json spheres = json::array();
  for (const auto& s : c.scene.spheres)
    spheres.push_back({{"center", vec_json(s.center)},
                       {"radius", s.radius},
                       {"texture", texture_json(s.texture)},
                       {"motion", motion_json(s.motion)}});
  json distractors = json::array();
  for (const auto& d : c.oracle.distractors) {
    json dj{{"texture_seed_shift", d.texture_seed_shift}};
    if (d.trajectory) dj["trajectory"] = trajectory_json(*d.trajectory);
    distractors.push_back(dj);
  }
  const auto& g = c.guidance;
  const auto& f = g.flow_cfg;
  return json{
      {"name", c.name},
      {"height", c.height},
      {"width", c.width},
      {"scene",
       {{"channels", c.scene.channels},
        {"far_plane", c.scene.far_plane},
        {"background", c.scene.background},
        {"planes", planes},
        {"spheres", spheres}}},
      {"trajectory", trajectory_json(c.trajectory)},
      {"guidance_source", guidance_source_name(c.guidance_source)},
      {"embedding", {{"pool", c.embedding.pool}, {"channel_mix", c.embedding.channel_mix}, {"mix_seed", c.embedding.mix_seed}}},
      {"corruption", {{"channels", c.corruption.channels}, {"noise_sd", c.corruption.noise_sd}, {"seed", c.corruption.seed}}},
      {"mask", {{"source", mask_source_name(c.mask.source)}, {"per_channel", c.mask.per_channel}}},
      {"schedule", {{"kind", schedule_kind_name(c.schedule.kind)}, {"steps", c.schedule.steps}, {"t_max", c.schedule.t_max}}},
      {"oracle",
       {{"kind", to_string(c.oracle.kind)},
        {"convention", convention_name(c.oracle.convention)},
        {"variance", c.oracle.variance},
        {"mean", c.oracle.mean},
        {"eps", c.oracle.eps},
        {"distractors", distractors}}},
      {"guidance",
       {{"irr", g.irr_enabled},
        {"renoise", to_string(g.renoise)},
        {"custom_weights", g.custom_weights},
        {"renoise_noise", to_string(g.renoise_noise)},
        {"irr_recursions", g.irr_recursions},
        {"flf", g.flf_enabled},
        {"lambda_start", g.lambda_start},
        {"lambda_end", g.lambda_end},
        {"dsg", g.dsg_enabled},
        {"rho", g.rho},
        {"dsg_normalization", to_string(g.dsg_normalization)},
        {"flow",
         {{"n_E", f.n_E},
          {"n_A_deg", f.n_A_deg},
          {"n_F", f.n_F},
          {"gamma", f.gamma},
          {"fl_epe_threshold", f.fl_epe_threshold},
          {"fl_rel_threshold", f.fl_rel_threshold},
          {"fl_rule", f.fl_rule == FlOutlierRule::kAny ? "any" : "all"},
          {"levels", f.flow.levels},
          {"pyr_scale", f.flow.pyr_scale},
          {"window", f.flow.window},
          {"iterations", f.flow.iterations},
          {"poly_n", f.flow.poly_n},
          {"poly_sigma", f.flow.poly_sigma}}}}},
      {"seeds", c.seeds},
      {"ablation", c.ablation},
      {"output_dir", c.output_dir},
      {"parallel", c.parallel},
      {"estimated_poses", c.estimated_poses}};
}

}  // namespace

std::string to_string(OracleChoice o) {
  switch (o) {
    case OracleChoice::kGaussianMixture: return "gaussian_mixture";
    case OracleChoice::kTabulated: return "tabulated";
    case OracleChoice::kIsotropicGaussian: return "isotropic_gaussian";
    case OracleChoice::kConstantEps: return "constant_eps";
  }
  return "unknown";
}

NoiseSchedule ScheduleSpec::build() const {
  if (kind == ScheduleKind::kLinearFlow) return NoiseSchedule::uniform_flow(steps, t_max);
  return NoiseSchedule::ddim_from_flow(steps, t_max);
}

void ExperimentConfig::validate() const {
  if (height == 0 || width == 0) throw Error("resolution must be positive");
  if (scene.empty()) throw Error("scene has no primitives");
  scene.validate();
  make_trajectory(trajectory);
  if (embedding.pool == 0 || height % embedding.pool || width % embedding.pool)
    throw Error("embedding.pool must divide the resolution");
  for (std::size_t c : corruption.channels)
    if (c >= scene.channels) throw Error("corruption channel " + std::to_string(c) + " out of range");
  if (!(corruption.noise_sd >= 0.0) || !std::isfinite(corruption.noise_sd))
    throw Error("corruption.noise_sd must be non-negative");
  if (schedule.steps == 0) throw Error("schedule.steps must be positive");
  if (!(schedule.t_max > 0.0 && schedule.t_max <= 1.0)) throw Error("schedule.t_max must lie in (0, 1]");
  if (schedule.kind == ScheduleKind::kDiscreteDdim && !(schedule.t_max < 1.0))
    throw Error("discrete_ddim schedules need t_max < 1");
  if (schedule.kind == ScheduleKind::kDiscreteDdim && oracle.convention == OutputConvention::kVelocity)
    throw Error("discrete_ddim schedules need an epsilon oracle");
  if (guidance.renoise == RenoiseScheduler::kFlowLinear && schedule.kind != ScheduleKind::kLinearFlow)
    throw Error("flow_linear re-noising needs a linear_flow schedule");
  if (guidance.renoise == RenoiseScheduler::kCustom && guidance.custom_weights.size() != schedule.steps + 1)
    throw Error("custom re-noise table needs steps + 1 entries");
  if ((oracle.kind == OracleChoice::kGaussianMixture || oracle.kind == OracleChoice::kIsotropicGaussian) &&
      !(oracle.variance > 0.0))
    throw Error("oracle.variance must be positive");
  for (const auto& d : oracle.distractors)
    if (d.trajectory) make_trajectory(*d.trajectory);
  guidance.validate();
  if (seeds.empty()) throw Error("at least one seed is required");
  std::set<std::uint64_t> uniq(seeds.begin(), seeds.end());
  if (uniq.size() != seeds.size()) throw Error("seeds must be distinct");
  std::set<std::string> abl;
  for (const auto& a : ablation) {
    if (a != "irr" && a != "flf" && a != "dsg") throw Error("unknown ablation mechanism '" + a + "'");
    if (!abl.insert(a).second) throw Error("ablation mechanism '" + a + "' listed twice");
  }
  const bool flf_possible = (guidance.flf_enabled || abl.count("flf")) && (guidance.irr_enabled || abl.count("irr"));
  if (flf_possible) {
    if (trajectory.frames < 2) throw Error("flow gating needs at least two frames");
    const std::size_t side = std::min(height, width) / embedding.pool;
    if (side < guidance.flow_cfg.flow.window)
      throw Error("latent frames are smaller than the flow window (" + std::to_string(guidance.flow_cfg.flow.window) +
                  ")");
  }
  if (parallel == 0) throw Error("parallel must be at least 1");
}

ExperimentConfig parse_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw Error(std::string("config is not valid JSON: ") + e.what());
  }
  Obj o(j, "config");
  ExperimentConfig c;
  o.get("name", c.name);
  o.get("height", c.height);
  o.get("width", c.width);
  if (const json* s = o.find("scene")) c.scene = parse_scene(*s, "config.scene");
  const json* traj = o.find("trajectory");
  c.trajectory.intrinsics = Intrinsics::from_fov(50.0, std::max<std::size_t>(c.height, 1), std::max<std::size_t>(c.width, 1));
  if (traj) c.trajectory = parse_trajectory(*traj, "config.trajectory", c.trajectory, c.height, c.width, false);
  std::string gs = guidance_source_name(c.guidance_source);
  o.get("guidance_source", gs);
  c.guidance_source = guidance_source_from(gs, "config.guidance_source");
  if (const json* e = o.find("embedding")) {
    Obj eo(*e, "config.embedding");
    eo.get("pool", c.embedding.pool);
    eo.get("channel_mix", c.embedding.channel_mix);
    std::size_t seed = c.embedding.mix_seed;
    eo.get("mix_seed", seed);
    c.embedding.mix_seed = seed;
    eo.finish();
  }
  if (const json* e = o.find("corruption")) {
    Obj co(*e, "config.corruption");
    if (const json* ch = co.find("channels")) {
      if (!ch->is_array()) throw Error("config.corruption.channels: expected an array");
      for (const auto& v : *ch) c.corruption.channels.push_back(static_cast<std::size_t>(as_uint(v, "config.corruption.channels")));
    }
    co.get("noise_sd", c.corruption.noise_sd);
    std::size_t seed = c.corruption.seed;
    co.get("seed", seed);
    c.corruption.seed = seed;
    co.finish();
  }
  if (const json* e = o.find("mask")) {
    Obj mo(*e, "config.mask");
    std::string src = mask_source_name(c.mask.source);
    mo.get("source", src);
    c.mask.source = mask_source_from(src, "config.mask.source");
    mo.get("per_channel", c.mask.per_channel);
    mo.finish();
  }
  if (const json* e = o.find("schedule")) {
    Obj so(*e, "config.schedule");
    std::string kind = schedule_kind_name(c.schedule.kind);
    so.get("kind", kind);
    c.schedule.kind = schedule_kind_from(kind, "config.schedule.kind");
    so.get("steps", c.schedule.steps);
    so.get("t_max", c.schedule.t_max);
    so.finish();
  }
  if (const json* e = o.find("oracle")) {
    Obj oo(*e, "config.oracle");
    std::string kind = to_string(c.oracle.kind);
    oo.get("kind", kind);
    c.oracle.kind = oracle_from(kind, "config.oracle.kind");
    std::string conv = convention_name(c.oracle.convention);
    oo.get("convention", conv);
    c.oracle.convention = convention_from(conv, "config.oracle.convention");
    oo.get("variance", c.oracle.variance);
    oo.get("mean", c.oracle.mean);
    oo.get("eps", c.oracle.eps);
    if (const json* ds = oo.find("distractors")) {
      if (!ds->is_array()) throw Error("config.oracle.distractors: expected an array");
      for (std::size_t i = 0; i < ds->size(); ++i) {
        const std::string p = "config.oracle.distractors[" + std::to_string(i) + "]";
        Obj d((*ds)[i], p);
        DistractorSpec spec;
        if (const json* t = d.find("trajectory"))
          spec.trajectory = parse_trajectory(*t, p + ".trajectory", c.trajectory, c.height, c.width, false);
        std::size_t shift = 0;
        d.get("texture_seed_shift", shift);
        spec.texture_seed_shift = shift;
        d.finish();
        c.oracle.distractors.push_back(std::move(spec));
      }
    }
    oo.finish();
  }
  if (const json* g = o.find("guidance")) c.guidance = parse_guidance(*g, "config.guidance");
  if (const json* s = o.find("seeds")) {
    if (!s->is_array()) throw Error("config.seeds: expected an array");
    c.seeds.clear();
    for (const auto& v : *s) c.seeds.push_back(as_uint(v, "config.seeds"));
  }
  if (const json* a = o.find("ablation")) {
    if (!a->is_array()) throw Error("config.ablation: expected an array");
    for (const auto& v : *a) c.ablation.push_back(as_string(v, "config.ablation"));
  }
  o.get("output_dir", c.output_dir);
  o.get("parallel", c.parallel);
  o.get("estimated_poses", c.estimated_poses);
  o.finish();
  c.validate();
  return c;
}

GuidanceConfig parse_guidance_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw Error(std::string("guidance is not valid JSON: ") + e.what());
  }
  GuidanceConfig g = parse_guidance(j, "guidance");
  g.validate();
  return g;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string config_to_json(const ExperimentConfig& cfg, int indent) { return to_json(cfg).dump(indent); }

std::string canonical_config_json(const ExperimentConfig& cfg, int indent) {
  json j = to_json(cfg);
  j.erase("output_dir");
  j.erase("parallel");
  return j.dump(indent);
}

std::string config_hash(const ExperimentConfig& cfg) { return sha256_hex(canonical_config_json(cfg, -1)); }

std::vector<std::string> parse_ablation_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item.erase(std::remove_if(item.begin(), item.end(), [](unsigned char ch) { return std::isspace(ch); }), item.end());
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

}  // namespace trajguide
