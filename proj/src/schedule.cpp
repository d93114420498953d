#include "energy_matching/schedule.hpp"

#include <cmath>
#include <string>

#include "energy_matching/error.hpp"

namespace energy_matching {

void TempSchedule::validate() const {
  if (!(t_star > 0.0 && t_star <= 1.0)) throw ConfigError("t_star must lie in (0, 1], got " + std::to_string(t_star));
  if (!(eps_max >= 0.0) || !std::isfinite(eps_max)) throw ConfigError("eps_max must be a nonnegative number");
}

double TempSchedule::epsilon_at(double t) const {
  if (!(t >= 0.0)) throw ConfigError("epsilon_at: time must be nonnegative");
  if (t >= 1.0) return eps_max;
  if (t < t_star) return 0.0;
  return eps_max * (t - t_star) / (1.0 - t_star);
}

}  // namespace energy_matching
