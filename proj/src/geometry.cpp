#include "riskdrive/geometry.hpp"

#include <algorithm>
#include <cmath>

namespace riskdrive {

std::array<Vec2, 4> OrientedBox::corners() const {
  const double c = std::cos(heading);
  const double s = std::sin(heading);
  const Vec2 ax{c * half_length, s * half_length};
  const Vec2 ay{-s * half_width, c * half_width};
  return {Vec2{cx + ax.x + ay.x, cy + ax.y + ay.y},
          Vec2{cx - ax.x + ay.x, cy - ax.y + ay.y},
          Vec2{cx - ax.x - ay.x, cy - ax.y - ay.y},
          Vec2{cx + ax.x - ay.x, cy + ax.y - ay.y}};
}

namespace {

void project(const std::array<Vec2, 4>& pts, Vec2 axis, double& lo, double& hi) {
  lo = hi = pts[0].x * axis.x + pts[0].y * axis.y;
  for (int i = 1; i < 4; ++i) {
    const double p = pts[i].x * axis.x + pts[i].y * axis.y;
    lo = std::min(lo, p);
    hi = std::max(hi, p);
  }
}

}  // namespace

bool boxes_overlap(const OrientedBox& a, const OrientedBox& b) {
  const auto pa = a.corners();
  const auto pb = b.corners();
  const Vec2 axes[4] = {{std::cos(a.heading), std::sin(a.heading)},
                        {-std::sin(a.heading), std::cos(a.heading)},
                        {std::cos(b.heading), std::sin(b.heading)},
                        {-std::sin(b.heading), std::cos(b.heading)}};
  for (const Vec2& axis : axes) {
    double alo, ahi, blo, bhi;
    project(pa, axis, alo, ahi);
    project(pb, axis, blo, bhi);
    if (ahi <= blo || bhi <= alo) return false;
  }
  return true;
}

}  // namespace riskdrive
