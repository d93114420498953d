#pragma once

namespace energy_matching {

/// Piecewise-linear effective temperature:
///
///   eps(t) = 0                                   for t < t_star
///          = eps_max (t - t_star) / (1 - t_star)  for t_star <= t < 1
///          = eps_max                             for t >= 1
///
/// With t_star = 1 the ramp is empty and eps jumps to eps_max at t = 1.
struct TempSchedule {
  double t_star = 1.0;
  double eps_max = 0.01;

  void validate() const;
  double epsilon_at(double t) const;
};

}  // namespace energy_matching
