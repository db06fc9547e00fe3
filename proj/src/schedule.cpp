#include "trajguide/schedule.hpp"

#include <cmath>
#include <string>

#include "trajguide/error.hpp"

namespace trajguide {

NoiseSchedule NoiseSchedule::discrete_ddim(std::vector<double> alpha_bar) {
  if (alpha_bar.size() < 2) {
    throw Error("DDIM schedule needs at least two levels");
  }
  for (std::size_t k = 0; k < alpha_bar.size(); ++k) {
    const double a = alpha_bar[k];
    if (!(a > 0.0 && a <= 1.0)) {
      throw Error("alpha_bar[" + std::to_string(k) + "] = " + std::to_string(a) + " outside (0, 1]");
    }
    if (k > 0 && !(a < alpha_bar[k - 1])) {
      throw Error("alpha_bar must be strictly decreasing towards the noise end");
    }
  }
  return NoiseSchedule(ScheduleKind::kDiscreteDdim, std::move(alpha_bar));
}

NoiseSchedule NoiseSchedule::linear_flow(std::vector<double> t_grid) {
  if (t_grid.size() < 2) {
    throw Error("flow schedule needs at least two grid points");
  }
  for (std::size_t k = 0; k < t_grid.size(); ++k) {
    const double t = t_grid[k];
    if (!(t >= 0.0 && t <= 1.0)) {
      throw Error("t_grid[" + std::to_string(k) + "] = " + std::to_string(t) + " outside [0, 1]");
    }
    if (k > 0 && !(t > t_grid[k - 1])) {
      throw Error("t_grid must be strictly increasing");
    }
  }
  return NoiseSchedule(ScheduleKind::kLinearFlow, std::move(t_grid));
}

NoiseSchedule NoiseSchedule::uniform_flow(std::size_t steps, double t_max) {
  if (steps == 0) {
    throw Error("schedule needs at least one step");
  }
  std::vector<double> grid(steps + 1);
  for (std::size_t k = 0; k <= steps; ++k) {
    grid[k] = t_max * static_cast<double>(k) / static_cast<double>(steps);
  }
  return linear_flow(std::move(grid));
}

NoiseSchedule NoiseSchedule::ddim_from_flow(std::size_t steps, double t_max) {
  if (!(t_max < 1.0)) {
    throw Error("ddim_from_flow requires t_max < 1 (alpha_bar would reach 0)");
  }
  const NoiseSchedule flow = uniform_flow(steps, t_max);
  std::vector<double> alpha_bar(flow.grid_.size());
  for (std::size_t k = 0; k < alpha_bar.size(); ++k) {
    const double a = 1.0 - flow.grid_[k];
    alpha_bar[k] = a * a;
  }
  return discrete_ddim(std::move(alpha_bar));
}

NoiseLevel NoiseSchedule::level(std::size_t k) const {
  if (k >= grid_.size()) {
    throw Error("schedule index " + std::to_string(k) + " out of range");
  }
  if (kind_ == ScheduleKind::kLinearFlow) {
    return {1.0 - grid_[k], grid_[k]};
  }
  return {std::sqrt(grid_[k]), std::sqrt(1.0 - grid_[k])};
}

double NoiseSchedule::alpha_bar(std::size_t k) const {
  if (k >= grid_.size()) {
    throw Error("schedule index " + std::to_string(k) + " out of range");
  }
  if (kind_ == ScheduleKind::kLinearFlow) {
    const double a = 1.0 - grid_[k];
    return a * a;
  }
  return grid_[k];
}

double NoiseSchedule::t(std::size_t k) const {
  if (kind_ != ScheduleKind::kLinearFlow) {
    throw Error("t(k) is only defined on flow schedules");
  }
  if (k >= grid_.size()) {
    throw Error("schedule index " + std::to_string(k) + " out of range");
  }
  return grid_[k];
}

}  // namespace trajguide
