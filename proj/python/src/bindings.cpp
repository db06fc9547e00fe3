#include <cmath>
#include <cstring>
#include <optional>
#include <sstream>

#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "trajguide/config.hpp"
#include "trajguide/error.hpp"
#include "trajguide/experiment.hpp"
#include "trajguide/flow.hpp"
#include "trajguide/flow_metrics.hpp"
#include "trajguide/guidance.hpp"
#include "trajguide/oracle.hpp"
#include "trajguide/rng.hpp"
#include "trajguide/sampler.hpp"
#include "trajguide/schedule.hpp"
#include "trajguide/traj_eval.hpp"
#include "trajguide/warp.hpp"

namespace py = pybind11;
using namespace trajguide;

namespace {

using DArray = py::array_t<double, py::array::c_style | py::array::forcecast>;
using MArray = py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>;

Shape shape_of(const py::buffer_info& info) {
  if (info.ndim != 4) throw Error("expected a 4-d [C, T, H, W] array, got ndim " + std::to_string(info.ndim));
  return Shape{static_cast<std::size_t>(info.shape[0]), static_cast<std::size_t>(info.shape[1]),
               static_cast<std::size_t>(info.shape[2]), static_cast<std::size_t>(info.shape[3])};
}

Tensor to_tensor(const DArray& a) {
  const py::buffer_info info = a.request();
  const Shape s = shape_of(info);
  const auto* p = static_cast<const double*>(info.ptr);
  return Tensor(s, std::vector<double>(p, p + s.numel()));
}

ValidityMask to_mask(const MArray& a) {
  const py::buffer_info info = a.request();
  const Shape s = shape_of(info);
  const auto* p = static_cast<const std::uint8_t*>(info.ptr);
  std::vector<std::uint8_t> v(p, p + s.numel());
  for (auto& x : v) x = x ? 1 : 0;
  return ValidityMask(s, std::move(v));
}

py::array_t<double> to_numpy(const Tensor& t) {
  const Shape& s = t.shape();
  py::array_t<double> out({s.channels, s.frames, s.height, s.width});
  std::memcpy(out.mutable_data(), t.values().data(), t.size() * sizeof(double));
  return out;
}

py::array_t<bool> to_numpy(const ValidityMask& m) {
  const Shape& s = m.shape();
  py::array_t<bool> out({s.channels, s.frames, s.height, s.width});
  bool* p = out.mutable_data();
  for (std::size_t i = 0; i < m.values().size(); ++i) p[i] = m.values()[i] != 0;
  return out;
}

DepthMap to_depth(const DArray& a) {
  const py::buffer_info info = a.request();
  if (info.ndim != 2) throw Error("depth must be a 2-d [H, W] array");
  const auto h = static_cast<std::size_t>(info.shape[0]), w = static_cast<std::size_t>(info.shape[1]);
  const auto* p = static_cast<const double*>(info.ptr);
  DepthMap d(h, w);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) {
      const double z = p[y * w + x];
      if (std::isfinite(z) && z > 0.0)
        d.set(y, x, z);
      else
        d.set_invalid(y, x);
    }
  return d;
}

py::array_t<double> depth_to_numpy(const DepthMap& d) {
  py::array_t<double> out({d.height(), d.width()});
  double* p = out.mutable_data();
  for (std::size_t y = 0; y < d.height(); ++y)
    for (std::size_t x = 0; x < d.width(); ++x) p[y * d.width() + x] = d.valid(y, x) ? d.at(y, x) : NAN;
  return out;
}

// [N, 4, 4] camera-to-world matrices.
PoseTrajectory to_trajectory(const DArray& a) {
  const py::buffer_info info = a.request();
  if (info.ndim != 3 || info.shape[1] != 4 || info.shape[2] != 4) throw Error("poses must be an [N, 4, 4] array");
  const auto* p = static_cast<const double*>(info.ptr);
  std::vector<Pose> poses(static_cast<std::size_t>(info.shape[0]));
  for (std::size_t i = 0; i < poses.size(); ++i) {
    const double* m = p + 16 * i;
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) poses[i].R(r, c) = m[4 * r + c];
      poses[i].t(r) = m[4 * r + 3];
    }
  }
  return PoseTrajectory(std::move(poses));
}

py::array_t<double> trajectory_to_numpy(const PoseTrajectory& traj) {
  py::array_t<double> out({traj.size(), std::size_t{4}, std::size_t{4}});
  double* p = out.mutable_data();
  for (std::size_t i = 0; i < traj.size(); ++i) {
    double* m = p + 16 * i;
    for (int r = 0; r < 4; ++r)
      for (int c = 0; c < 4; ++c) m[4 * r + c] = r == 3 ? (c == 3 ? 1.0 : 0.0) : (c == 3 ? traj[i].t(r) : traj[i].R(r, c));
  }
  return out;
}

py::dict sim3_dict(const Sim3Transform& s) {
  py::dict d;
  d["s"] = s.s;
  d["R"] = s.R;
  d["t"] = s.t;
  return d;
}

py::dict series_dict(const ErrorSeries& e) {
  py::dict d;
  d["rmse"] = e.rmse;
  d["values"] = e.values;
  return d;
}

py::dict selection_dict(const FlfSelection& s) {
  py::dict d;
  d["selected"] = s.selected;
  d["delta"] = s.delta;
  d["mu"] = s.mu;
  d["sigma"] = s.sigma;
  return d;
}

py::dict entry_dict(const TraceEntry& e) {
  py::dict d;
  d["step"] = e.step;
  d["noise_level"] = e.noise_level;
  d["renoise_weight"] = e.renoise_weight;
  d["selection"] = e.selection ? py::object(selection_dict(*e.selection)) : py::none();
  d["channel_scores"] = e.channel_scores;
  if (e.dsg) {
    py::dict g;
    g["alpha"] = e.dsg->alpha;
    g["beta"] = e.dsg->beta;
    g["defined"] = e.dsg->defined;
    d["dsg"] = g;
  } else {
    d["dsg"] = py::none();
  }
  d["correction_norm"] = e.correction_norm;
  d["adherence"] = e.adherence;
  return d;
}

ChannelScore scores_from_list(const std::vector<std::optional<double>>& values) {
  ChannelScore s;
  for (const auto& v : values) {
    ChannelRecord r;
    r.scorable = v.has_value();
    r.score = v.value_or(0.0);
    s.channels.push_back(r);
  }
  return s;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Trajectory-guided sampling: schedules, oracles, guidance, flow metrics and trajectory evaluation";
  m.attr("__version__") = TRAJGUIDE_VERSION;

  py::register_exception<Error>(m, "TrajguideError", PyExc_ValueError);

  m.def(
      "set_warnings_enabled",
      [](bool enabled) {
        if (enabled)
          set_warning_handler({});
        else
          set_warning_handler([](const std::string&) {});
      },
      py::arg("enabled"));

  py::enum_<OutputConvention>(m, "OutputConvention")
      .value("EPSILON", OutputConvention::kEpsilon)
      .value("VELOCITY", OutputConvention::kVelocity);
  py::enum_<ScheduleKind>(m, "ScheduleKind")
      .value("DISCRETE_DDIM", ScheduleKind::kDiscreteDdim)
      .value("LINEAR_FLOW", ScheduleKind::kLinearFlow);

  py::class_<NoiseSchedule>(m, "NoiseSchedule")
      .def_static("discrete_ddim", &NoiseSchedule::discrete_ddim, py::arg("alpha_bar"))
      .def_static("linear_flow", &NoiseSchedule::linear_flow, py::arg("t_grid"))
      .def_static("uniform_flow", &NoiseSchedule::uniform_flow, py::arg("steps"), py::arg("t_max") = 1.0)
      .def_static("ddim_from_flow", &NoiseSchedule::ddim_from_flow, py::arg("steps"), py::arg("t_max"))
      .def_property_readonly("kind", &NoiseSchedule::kind)
      .def_property_readonly("steps", &NoiseSchedule::steps)
      .def_property_readonly("grid", &NoiseSchedule::grid)
      .def("level", [](const NoiseSchedule& s, std::size_t k) {
        const NoiseLevel l = s.level(k);
        return py::make_tuple(l.alpha, l.sigma);
      })
      .def("alpha_bar", &NoiseSchedule::alpha_bar)
      .def("t", &NoiseSchedule::t);

  py::class_<DenoiserOracle>(m, "DenoiserOracle")
      .def_static("constant_eps", &DenoiserOracle::constant_eps, py::arg("eps"),
                  py::arg("convention") = OutputConvention::kEpsilon)
      .def_static(
          "isotropic_gaussian",
          [](const DArray& mean, double variance, OutputConvention c) {
            return DenoiserOracle::isotropic_gaussian(to_tensor(mean), variance, c);
          },
          py::arg("mean"), py::arg("variance"), py::arg("convention") = OutputConvention::kEpsilon)
      .def_static(
          "gaussian_mixture",
          [](std::vector<double> weights, const std::vector<DArray>& means, std::vector<double> variances,
             OutputConvention c) {
            std::vector<Tensor> ms;
            for (const auto& a : means) ms.push_back(to_tensor(a));
            return DenoiserOracle::gaussian_mixture(std::move(weights), std::move(ms), std::move(variances), c);
          },
          py::arg("weights"), py::arg("means"), py::arg("variances"),
          py::arg("convention") = OutputConvention::kEpsilon)
      .def_static(
          "tabulated",
          [](const DArray& target, OutputConvention c) { return DenoiserOracle::tabulated(to_tensor(target), c); },
          py::arg("target"), py::arg("convention") = OutputConvention::kEpsilon)
      .def_property_readonly("convention", &DenoiserOracle::convention)
      .def("with_convention", &DenoiserOracle::with_convention)
      .def(
          "posterior",
          [](const DenoiserOracle& o, const DArray& x, double alpha, double sigma) {
            const Posterior p = o.posterior(to_tensor(x), NoiseLevel{alpha, sigma});
            return py::make_tuple(to_numpy(p.eps), to_numpy(p.x0));
          },
          py::arg("x"), py::arg("alpha"), py::arg("sigma"))
      .def(
          "output",
          [](const DenoiserOracle& o, const DArray& x, double alpha, double sigma) {
            return to_numpy(o.output(to_tensor(x), NoiseLevel{alpha, sigma}));
          },
          py::arg("x"), py::arg("alpha"), py::arg("sigma"));

  m.def(
      "sample",
      [](const DArray& noise, const DenoiserOracle& oracle, const NoiseSchedule& schedule) {
        SamplerState st{to_tensor(noise), schedule.steps(), schedule};
        return to_numpy(sample(std::move(st), oracle));
      },
      py::arg("noise"), py::arg("oracle"), py::arg("schedule"));

  m.def(
      "fuse_masked",
      [](const DArray& x0, const DArray& z, const MArray& mask) {
        return to_numpy(fuse_masked(to_tensor(x0), to_tensor(z), to_mask(mask)));
      },
      py::arg("x0_hat"), py::arg("z_traj"), py::arg("mask"));
  m.def(
      "irr_renoise",
      [](const DArray& fused, const DArray& eps, double w) {
        return to_numpy(irr_renoise(to_tensor(fused), to_tensor(eps), w));
      },
      py::arg("fused"), py::arg("eps"), py::arg("w"));
  m.def(
      "flf_select",
      [](const std::vector<std::optional<double>>& scores, double lambda) {
        return selection_dict(flf_select(scores_from_list(scores), lambda));
      },
      py::arg("scores"), py::arg("lam"), "Scores may contain None for unscorable channels.");
  m.def(
      "dsg_correct",
      [](const DArray& v_traj, const DArray& v_ori, double rho, const std::string& normalization) {
        const DsgResult r = dsg_correct(to_tensor(v_traj), to_tensor(v_ori), rho,
                                        dsg_normalization_from_string(normalization));
        py::dict d;
        d["v_corr"] = to_numpy(r.v_corr);
        d["alpha"] = r.alpha;
        d["beta"] = r.beta;
        d["defined"] = r.defined;
        return d;
      },
      py::arg("v_traj"), py::arg("v_ori"), py::arg("rho"), py::arg("normalization") = "rescale_ori");

  m.def(
      "guided_sample",
      [](const DArray& noise, const DenoiserOracle& oracle, const DArray& z_traj, const MArray& mask,
         const NoiseSchedule& schedule, const std::string& config_json, std::optional<std::uint64_t> seed) {
        const GuidanceConfig cfg = parse_guidance_config(config_json.empty() ? "{}" : config_json);
        std::optional<KeyedRng> rng;
        if (seed) rng.emplace(*seed);
        const GuidedResult r = guided_sample(to_tensor(noise), oracle, to_tensor(z_traj), to_mask(mask), cfg,
                                             schedule, rng ? &*rng : nullptr);
        py::list trace;
        for (const auto& e : r.trace.entries) trace.append(entry_dict(e));
        return py::make_tuple(to_numpy(r.sample), trace);
      },
      py::arg("noise"), py::arg("oracle"), py::arg("z_traj"), py::arg("mask"), py::arg("schedule"),
      py::arg("guidance") = "", py::arg("seed") = py::none());
  m.def(
      "observed_adherence",
      [](const DArray& a, const DArray& b, const MArray& mask) {
        return observed_adherence(to_tensor(a), to_tensor(b), to_mask(mask));
      },
      py::arg("a"), py::arg("b"), py::arg("mask"));

  m.def(
      "masked_epe", [](const DArray& p, const DArray& g, const MArray& mask) {
        return masked_epe(to_tensor(p), to_tensor(g), to_mask(mask));
      },
      py::arg("pred"), py::arg("gt"), py::arg("mask"));
  m.def(
      "masked_ae", [](const DArray& p, const DArray& g, const MArray& mask) {
        return masked_ae(to_tensor(p), to_tensor(g), to_mask(mask));
      },
      py::arg("pred"), py::arg("gt"), py::arg("mask"));
  m.def(
      "fl_all",
      [](const DArray& p, const DArray& g, const MArray& mask, const std::string& rule) {
        FlowMetricConfig cfg;
        if (rule == "any")
          cfg.fl_rule = FlOutlierRule::kAny;
        else if (rule == "all")
          cfg.fl_rule = FlOutlierRule::kAll;
        else
          throw Error("fl rule must be 'any' or 'all'");
        return fl_all(to_tensor(p), to_tensor(g), to_mask(mask), cfg);
      },
      py::arg("pred"), py::arg("gt"), py::arg("mask"), py::arg("rule") = "any");
  m.def(
      "similarity_score", [](double epe, double ae, double fl) {
        return similarity_score(epe, ae, fl, FlowMetricConfig{});
      },
      py::arg("epe"), py::arg("ae"), py::arg("fl"));
  m.def(
      "estimate_flow", [](const DArray& channel) { return to_numpy(estimate_flow(to_tensor(channel))); },
      py::arg("channel"));
  m.def(
      "channel_scores",
      [](const DArray& x0, const DArray& z, const MArray& mask) {
        const ChannelScore s = channel_scores(to_tensor(x0), to_tensor(z), to_mask(mask), FlowMetricConfig{});
        py::list out;
        for (const auto& r : s.channels) {
          py::dict d;
          d["scorable"] = r.scorable;
          d["score"] = r.score;
          d["epe"] = r.epe;
          d["ae"] = r.ae;
          d["fl"] = r.fl;
          d["valid_count"] = r.valid_count;
          out.append(d);
        }
        return out;
      },
      py::arg("x0_hat"), py::arg("z_traj"), py::arg("mask"));

  m.def(
      "warp",
      [](const DArray& src, const DArray& depth, const Eigen::Matrix3d& K, const Eigen::Matrix3d& R_src,
         const Eigen::Vector3d& t_src, const Eigen::Matrix3d& R_tar, const Eigen::Vector3d& t_tar) {
        const WarpResult r = warp(to_tensor(src), to_depth(depth), CameraPose(K, R_src, t_src),
                                  CameraPose(K, R_tar, t_tar));
        return py::make_tuple(to_numpy(r.image), to_numpy(r.mask), depth_to_numpy(r.depth));
      },
      py::arg("src"), py::arg("depth"), py::arg("K"), py::arg("R_src"), py::arg("t_src"), py::arg("R_tar"),
      py::arg("t_tar"), "World-to-camera extrinsics; depth entries that are not positive and finite are invalid.");

  m.def(
      "align_sim3",
      [](const DArray& est, const DArray& ref) {
        const Alignment a = align_sim3(to_trajectory(est), to_trajectory(ref));
        return py::make_tuple(trajectory_to_numpy(a.aligned), sim3_dict(a.transform));
      },
      py::arg("est"), py::arg("ref"));
  m.def(
      "evaluate_trajectory",
      [](const DArray& est, const DArray& ref) {
        const TrajectoryMetrics t = evaluate_trajectory(to_trajectory(est), to_trajectory(ref));
        py::dict d;
        d["transform"] = sim3_dict(t.transform);
        d["ate"] = series_dict(t.ate);
        d["rpe_t"] = series_dict(t.rpe_t);
        d["rpe_r"] = series_dict(t.rpe_r);
        return d;
      },
      py::arg("est"), py::arg("ref"));
  m.def(
      "read_pose_file", [](const std::string& path) { return trajectory_to_numpy(read_pose_file(path)); },
      py::arg("path"));

  m.def(
      "config_hash", [](const std::string& json) { return config_hash(parse_config(json)); }, py::arg("config_json"));
  m.def(
      "normalize_config", [](const std::string& json) { return canonical_config_json(parse_config(json)); },
      py::arg("config_json"));
  m.def(
      "run_experiment",
      [](const std::string& path, std::optional<std::string> output_dir, bool plots) {
        ExperimentConfig cfg = load_config(path);
        if (output_dir) cfg.output_dir = *output_dir;
        RunManifest man;
        {
          py::gil_scoped_release release;
          man = run_experiment(cfg);
          if (plots && man.success) emit_plots(man);
        }
        return manifest_to_json(man);
      },
      py::arg("config_path"), py::arg("output_dir") = py::none(), py::arg("plots") = false,
      "Runs a config file and returns the manifest as JSON text.");
}
