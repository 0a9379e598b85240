#pragma once

#include <iosfwd>
#include <string>

#include "riskdrive/risk_field.hpp"

namespace riskdrive {

// Shortest round-trip decimal form of a double ("nan", "inf" for non-finite).
std::string format_double(double v);

// One CSV line per grid row, row 0 first.
void write_grid_csv(const RiskGrid& grid, std::ostream& out);

// 8-bit binary PGM (P5). Gray = round(255 * value / scale_max), clamped, with
// the highest-y row at the top of the image. Returns scale_max (the grid
// maximum, or 1 for an all-zero grid).
double write_grid_pgm(const RiskGrid& grid, std::ostream& out);

}  // namespace riskdrive
