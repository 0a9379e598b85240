#pragma once

#include <iosfwd>
#include <span>
#include <vector>

#include "riskdrive/sim.hpp"

namespace riskdrive {

// Shaping constants of the static and dynamic risk fields.
struct RiskParams {
  double xi_x = 10.0;    // longitudinal spread, static field (m)
  double xi_y = 2.0;     // lateral spread (m)
  double xi_v = 12.0;    // longitudinal spread, dynamic field (m)
  double rho = 1.0;      // static shape exponent
  double lambda_d = 1.0; // dynamic shape exponent
  double eps_obs = 1.0;  // static weight
  double eps_hdv = 1.0;  // dynamic weight
  double sigma_l = 1.0;  // vehicle-length factor of the sigmoid offset
  double w_s = 0.5;      // static weight in hybrid / cumulative sums
  double w_d = 0.5;      // dynamic weight in hybrid / cumulative sums

  void validate() const;

  bool operator==(const RiskParams&) const = default;
};

struct RiskSample {
  double static_risk = 0.0;
  double dynamic_risk = 0.0;
};

// eps_obs * exp(-r_s), r_s = (dx^2/xi_x^2)^rho + (dy^2/xi_y^2)^rho,
// with dx = x_av - x_hdv and dy = y_av - y_hdv.
double static_risk(const VehicleState& av, const VehicleState& hdv, const RiskParams& p);

// eps_hdv * exp(-r_d) / (1 + exp(-v_rel * (dx - sigma_l * l * v_rel))),
// r_d = (dx^2/xi_v^2)^lambda + (dy^2/xi_y^2)^lambda, v_rel = +1 when the HDV
// is faster than the AV and -1 otherwise, l = HDV length.
double dynamic_risk(const VehicleState& av, const VehicleState& hdv, const RiskParams& p);

// Sum over HDVs of w_s * R_s + w_d * R_d.
double hybrid_risk(const VehicleState& av, std::span<const VehicleState> hdvs,
                   const RiskParams& p);

// Per-field sums over HDVs.
RiskSample field_sums(const VehicleState& av, std::span<const VehicleState> hdvs,
                      const RiskParams& p);

// Ego-frame raster layout. Column c, row r covers
// x in origin_x + [c, c+1) * cell_size and y in origin_y + [r, r+1) * cell_size,
// relative to the AV center; row 0 is the lowest y.
struct GridSpec {
  int width_cells = 32;
  int height_cells = 32;
  double cell_size = 2.0;
  double origin_x = -24.0;
  double origin_y = -32.0;

  void validate() const;
  double extent_x() const { return width_cells * cell_size; }
  double extent_y() const { return height_cells * cell_size; }

  bool operator==(const GridSpec&) const = default;
};

struct RiskGrid {
  int width_cells = 0;
  int height_cells = 0;
  double cell_size = 0.0;
  double origin_x = 0.0;
  double origin_y = 0.0;
  std::vector<double> values;  // row-major

  static RiskGrid zeros(const GridSpec& spec);

  double& at(int row, int col) { return values[static_cast<std::size_t>(row) * width_cells + col]; }
  double at(int row, int col) const {
    return values[static_cast<std::size_t>(row) * width_cells + col];
  }
  Vec2 cell_center(int row, int col) const {
    return {origin_x + (col + 0.5) * cell_size, origin_y + (row + 0.5) * cell_size};
  }
};

struct ObservationFrame {
  RiskGrid occupancy;  // 1 where a vehicle footprint touches the cell
  RiskGrid risk;       // hybrid risk at each cell center
  double ego_speed = 0.0;
};

enum class FieldKind { static_field, dynamic_field, hybrid };

// HDVs whose centers fall inside the grid's metric extent around the AV.
std::vector<VehicleState> hdvs_in_extent(const VehicleState& av,
                                         std::span<const VehicleState> hdvs,
                                         const GridSpec& spec);

// The AV moved to ego-frame offset (dx, dy); speed and size unchanged.
VehicleState probe_at(const VehicleState& av, double dx, double dy);

// OpenMP row-parallel rasterization and its serial reference. Both compute
// every cell with the same expression, so their outputs are bit-identical.
ObservationFrame rasterize(const World& world, const RiskParams& p, const GridSpec& spec);
ObservationFrame rasterize_serial(const World& world, const RiskParams& p,
                                  const GridSpec& spec);

RiskGrid rasterize_field(const VehicleState& av, std::span<const VehicleState> hdvs,
                         const RiskParams& p, const GridSpec& spec, FieldKind kind);

}  // namespace riskdrive
