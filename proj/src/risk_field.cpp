#include "riskdrive/risk_field.hpp"

#include <cmath>
#include <string>

#include "riskdrive/errors.hpp"

namespace riskdrive {

namespace {

void require(bool ok, const char* field, const char* what) {
  if (!ok) throw ConfigError(std::string("risk.") + field, what);
}

double shaped(double delta, double spread, double exponent) {
  const double q = (delta * delta) / (spread * spread);
  return exponent == 1.0 ? q : std::pow(q, exponent);
}

// 1 / (1 + exp(-z)) without overflow for large |z|.
double logistic(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

}  // namespace

void RiskParams::validate() const {
  require(xi_x > 0.0, "xi_x", "must be positive");
  require(xi_y > 0.0, "xi_y", "must be positive");
  require(xi_v > 0.0, "xi_v", "must be positive");
  require(rho > 0.0, "rho", "must be positive");
  require(lambda_d > 0.0, "lambda_d", "must be positive");
  require(eps_obs > 0.0, "eps_obs", "must be positive");
  require(eps_hdv > 0.0, "eps_hdv", "must be positive");
  require(sigma_l >= 0.0, "sigma_l", "must be >= 0");
  require(w_s >= 0.0, "w_s", "must be >= 0");
  require(w_d >= 0.0, "w_d", "must be >= 0");
  require(w_s + w_d > 0.0, "w_s", "w_s + w_d must be positive");
}

double static_risk(const VehicleState& av, const VehicleState& hdv, const RiskParams& p) {
  const double dx = av.x - hdv.x;
  const double dy = av.y - hdv.y;
  const double r = shaped(dx, p.xi_x, p.rho) + shaped(dy, p.xi_y, p.rho);
  return p.eps_obs * std::exp(-r);
}

double dynamic_risk(const VehicleState& av, const VehicleState& hdv, const RiskParams& p) {
  const double dx = av.x - hdv.x;
  const double dy = av.y - hdv.y;
  const double r = shaped(dx, p.xi_v, p.lambda_d) + shaped(dy, p.xi_y, p.lambda_d);
  const double v_rel = hdv.v > av.v ? 1.0 : -1.0;
  // eps / (1 + exp(-z)) == eps * logistic(z)
  const double z = v_rel * (dx - p.sigma_l * hdv.length * v_rel);
  return p.eps_hdv * std::exp(-r) * logistic(z);
}

double hybrid_risk(const VehicleState& av, std::span<const VehicleState> hdvs,
                   const RiskParams& p) {
  double total = 0.0;
  for (const auto& h : hdvs) {
    total += p.w_s * static_risk(av, h, p) + p.w_d * dynamic_risk(av, h, p);
  }
  return total;
}

RiskSample field_sums(const VehicleState& av, std::span<const VehicleState> hdvs,
                      const RiskParams& p) {
  RiskSample s;
  for (const auto& h : hdvs) {
    s.static_risk += static_risk(av, h, p);
    s.dynamic_risk += dynamic_risk(av, h, p);
  }
  return s;
}

void GridSpec::validate() const {
  if (width_cells <= 0) throw ConfigError("grid.width_cells", "must be positive");
  if (height_cells <= 0) throw ConfigError("grid.height_cells", "must be positive");
  if (!(cell_size > 0.0)) throw ConfigError("grid.cell_size", "must be positive");
}

RiskGrid RiskGrid::zeros(const GridSpec& spec) {
  RiskGrid g;
  g.width_cells = spec.width_cells;
  g.height_cells = spec.height_cells;
  g.cell_size = spec.cell_size;
  g.origin_x = spec.origin_x;
  g.origin_y = spec.origin_y;
  g.values.assign(static_cast<std::size_t>(spec.width_cells) * spec.height_cells, 0.0);
  return g;
}

std::vector<VehicleState> hdvs_in_extent(const VehicleState& av,
                                         std::span<const VehicleState> hdvs,
                                         const GridSpec& spec) {
  std::vector<VehicleState> out;
  for (const auto& h : hdvs) {
    const double ex = h.x - av.x - spec.origin_x;
    const double ey = h.y - av.y - spec.origin_y;
    if (ex >= 0.0 && ex < spec.extent_x() && ey >= 0.0 && ey < spec.extent_y()) {
      out.push_back(h);
    }
  }
  return out;
}

VehicleState probe_at(const VehicleState& av, double dx, double dy) {
  VehicleState p = av;
  p.x = av.x + dx;
  p.y = av.y + dy;
  return p;
}

namespace {

double cell_value(const VehicleState& probe, std::span<const VehicleState> hdvs,
                  const RiskParams& p, FieldKind kind) {
  switch (kind) {
    case FieldKind::static_field: {
      double s = 0.0;
      for (const auto& h : hdvs) s += static_risk(probe, h, p);
      return s;
    }
    case FieldKind::dynamic_field: {
      double s = 0.0;
      for (const auto& h : hdvs) s += dynamic_risk(probe, h, p);
      return s;
    }
    case FieldKind::hybrid:
      return hybrid_risk(probe, hdvs, p);
  }
  return 0.0;
}

void fill_row(const World& world, std::span<const VehicleState> in_range,
              const RiskParams& p, int row, ObservationFrame& frame) {
  const VehicleState& av = world.av;
  RiskGrid& risk = frame.risk;
  RiskGrid& occ = frame.occupancy;
  const double half = 0.5 * risk.cell_size;
  for (int col = 0; col < risk.width_cells; ++col) {
    const Vec2 c = risk.cell_center(row, col);
    risk.at(row, col) = hybrid_risk(probe_at(av, c.x, c.y), in_range, p);

    const OrientedBox cell{av.x + c.x, av.y + c.y, half, half, 0.0};
    bool hit = boxes_overlap(cell, av.footprint());
    for (std::size_t k = 0; !hit && k < world.hdvs.size(); ++k) {
      hit = boxes_overlap(cell, world.hdvs[k].footprint());
    }
    occ.at(row, col) = hit ? 1.0 : 0.0;
  }
}

ObservationFrame empty_frame(const World& world, const GridSpec& spec) {
  spec.validate();
  ObservationFrame frame;
  frame.risk = RiskGrid::zeros(spec);
  frame.occupancy = RiskGrid::zeros(spec);
  frame.ego_speed = world.av.v;
  return frame;
}

}  // namespace

ObservationFrame rasterize(const World& world, const RiskParams& p, const GridSpec& spec) {
  ObservationFrame frame = empty_frame(world, spec);
  const auto in_range = hdvs_in_extent(world.av, world.hdvs, spec);
  const long cells = static_cast<long>(spec.width_cells) * spec.height_cells;
#pragma omp parallel for schedule(static) if (cells >= 4096)
  for (int row = 0; row < spec.height_cells; ++row) {
    fill_row(world, in_range, p, row, frame);
  }
  return frame;
}

ObservationFrame rasterize_serial(const World& world, const RiskParams& p,
                                  const GridSpec& spec) {
  ObservationFrame frame = empty_frame(world, spec);
  const auto in_range = hdvs_in_extent(world.av, world.hdvs, spec);
  for (int row = 0; row < spec.height_cells; ++row) {
    fill_row(world, in_range, p, row, frame);
  }
  return frame;
}

RiskGrid rasterize_field(const VehicleState& av, std::span<const VehicleState> hdvs,
                         const RiskParams& p, const GridSpec& spec, FieldKind kind) {
  spec.validate();
  RiskGrid grid = RiskGrid::zeros(spec);
  const auto in_range = hdvs_in_extent(av, hdvs, spec);
#pragma omp parallel for schedule(static)
  for (int row = 0; row < spec.height_cells; ++row) {
    for (int col = 0; col < spec.width_cells; ++col) {
      const Vec2 c = grid.cell_center(row, col);
      grid.at(row, col) = cell_value(probe_at(av, c.x, c.y), in_range, p, kind);
    }
  }
  return grid;
}

}  // namespace riskdrive
