#include "riskdrive/trajectory.hpp"

#include <stdexcept>

namespace riskdrive {

double lane_change_y(double x, double x_r) {
  if (!(x_r > 0.0)) throw std::domain_error("lane_change_y: x_r must be positive");
  if (!(x >= 0.0 && x <= x_r)) {
    throw std::domain_error("lane_change_y: x outside [0, x_r]");
  }
  return -2.0 + (2.0 / x_r) * x - (3.0 / (x_r * x_r)) * x * x +
         (1.0 / (x_r * x_r * x_r)) * x * x * x;
}

double lateral_offset(LateralProfile profile, double u, double delta_y) {
  switch (profile) {
    case LateralProfile::verbatim: {
      const double sign = delta_y < 0.0 ? -1.0 : 1.0;
      return sign * (lane_change_y(u, 1.0) + 2.0);
    }
    case LateralProfile::smoothstep:
      return delta_y * (3.0 * u * u - 2.0 * u * u * u);
  }
  return 0.0;
}

double lateral_offset_rate(LateralProfile profile, double u, double delta_y) {
  switch (profile) {
    case LateralProfile::verbatim: {
      const double sign = delta_y < 0.0 ? -1.0 : 1.0;
      return sign * (2.0 - 6.0 * u + 3.0 * u * u);
    }
    case LateralProfile::smoothstep:
      return delta_y * 6.0 * u * (1.0 - u);
  }
  return 0.0;
}

}  // namespace riskdrive
