#pragma once

#include <cstddef>
#include <vector>

namespace trajguide {

enum class ScheduleKind { kDiscreteDdim, kLinearFlow };

/// Corruption coefficients at one grid point: x_t = alpha * x0 + sigma * eps.
struct NoiseLevel {
  double alpha = 1.0;
  double sigma = 0.0;
};

/// Grid of noise levels indexed by k in [0, steps]; k = 0 is the data end and
/// k = steps the noise end. Sampling walks k downwards.
///
/// DiscreteDdim stores cumulative attenuation alpha_bar[k] (strictly decreasing
/// in k, entries in (0, 1]) and uses alpha = sqrt(alpha_bar),
/// sigma = sqrt(1 - alpha_bar). LinearFlow stores a strictly increasing t grid
/// in [0, 1] and uses alpha = 1 - t, sigma = t (not variance preserving).
class NoiseSchedule {
 public:
  static NoiseSchedule discrete_ddim(std::vector<double> alpha_bar);
  static NoiseSchedule linear_flow(std::vector<double> t_grid);

  /// Uniform flow grid t_k = t_max * k / steps.
  static NoiseSchedule uniform_flow(std::size_t steps, double t_max = 1.0);
  /// DDIM schedule sharing the flow parameterization: alpha_bar_k = (1 - t_k)^2
  /// on the uniform grid. Requires t_max < 1 so every entry stays positive.
  static NoiseSchedule ddim_from_flow(std::size_t steps, double t_max);

  ScheduleKind kind() const { return kind_; }
  std::size_t steps() const { return grid_.size() - 1; }

  NoiseLevel level(std::size_t k) const;
  /// alpha_bar_k for DDIM; (1 - t_k)^2 for flow.
  double alpha_bar(std::size_t k) const;
  /// Flow time t_k (LinearFlow only).
  double t(std::size_t k) const;

  const std::vector<double>& grid() const { return grid_; }

  friend bool operator==(const NoiseSchedule&, const NoiseSchedule&) = default;

 private:
  NoiseSchedule(ScheduleKind kind, std::vector<double> grid) : kind_(kind), grid_(std::move(grid)) {}

  ScheduleKind kind_;
  std::vector<double> grid_;
};

}  // namespace trajguide
