#pragma once

#include <array>

namespace riskdrive {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
};

// Oriented rectangle: center, half extents along its own axes, heading (rad).
struct OrientedBox {
  double cx = 0.0;
  double cy = 0.0;
  double half_length = 0.0;
  double half_width = 0.0;
  double heading = 0.0;

  std::array<Vec2, 4> corners() const;
};

// Separating-axis test. Touching boxes (zero penetration) do not overlap.
bool boxes_overlap(const OrientedBox& a, const OrientedBox& b);

}  // namespace riskdrive
