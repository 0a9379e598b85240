#include "riskdrive/export.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <ostream>

namespace riskdrive {

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

void write_grid_csv(const RiskGrid& grid, std::ostream& out) {
  for (int row = 0; row < grid.height_cells; ++row) {
    for (int col = 0; col < grid.width_cells; ++col) {
      if (col > 0) out << ',';
      out << format_double(grid.at(row, col));
    }
    out << '\n';
  }
}

double write_grid_pgm(const RiskGrid& grid, std::ostream& out) {
  double peak = 0.0;
  for (double v : grid.values) peak = std::max(peak, v);
  const double scale = peak > 0.0 ? peak : 1.0;
  out << "P5\n" << grid.width_cells << ' ' << grid.height_cells << "\n255\n";
  for (int row = grid.height_cells - 1; row >= 0; --row) {
    for (int col = 0; col < grid.width_cells; ++col) {
      const double g = std::clamp(std::round(255.0 * grid.at(row, col) / scale), 0.0, 255.0);
      out.put(static_cast<char>(static_cast<unsigned char>(g)));
    }
  }
  return scale;
}

}  // namespace riskdrive
