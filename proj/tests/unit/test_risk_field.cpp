#include <doctest.h>

#include <cmath>
#include <sstream>

#include "oracles.hpp"
#include "riskdrive/config.hpp"
#include "riskdrive/errors.hpp"
#include "riskdrive/export.hpp"
#include "riskdrive/risk_field.hpp"

using namespace riskdrive;

namespace {

VehicleState at(double x, double y, double v = 20.0) {
  VehicleState s;
  s.x = x;
  s.y = y;
  s.v = v;
  return s;
}

RiskParams random_params(Rng& rng) {
  RiskParams p;
  p.xi_x = uniform(rng, 2.0, 20.0);
  p.xi_y = uniform(rng, 0.5, 4.0);
  p.xi_v = uniform(rng, 2.0, 20.0);
  p.rho = uniform(rng, 0.5, 2.0);
  p.lambda_d = uniform(rng, 0.5, 2.0);
  p.eps_obs = uniform(rng, 0.1, 3.0);
  p.eps_hdv = uniform(rng, 0.1, 3.0);
  p.sigma_l = uniform(rng, 0.0, 2.0);
  return p;
}

}  // namespace

TEST_CASE("static risk: zero offset, hand value, lateral symmetry") {
  RiskParams p;
  CHECK(static_risk(at(3, 2), at(3, 2), p) == p.eps_obs);
  p.eps_obs = 2.75;
  CHECK(static_risk(at(0, 0), at(0, 0), p) == 2.75);
  p = RiskParams{};
  CHECK(static_risk(at(10, 0), at(0, 0), p) == doctest::Approx(std::exp(-1.0)).epsilon(1e-14));
  CHECK(static_risk(at(4, 1.5), at(0, 0), p) == static_risk(at(4, -1.5), at(0, 0), p));
}

TEST_CASE("static risk decays monotonically and is bounded on random draws") {
  Rng rng(11);
  for (int i = 0; i < 10000; ++i) {
    const RiskParams p = random_params(rng);
    const double dx = uniform(rng, -40, 40), dy = uniform(rng, -8, 8);
    const double grow = uniform(rng, 0.0, 5.0);
    const double base = static_risk(at(dx, dy), at(0, 0), p);
    const double sx = dx >= 0 ? dx + grow : dx - grow;
    const double sy = dy >= 0 ? dy + grow : dy - grow;
    CHECK(static_risk(at(sx, dy), at(0, 0), p) <= base);
    CHECK(static_risk(at(dx, sy), at(0, 0), p) <= base);
    CHECK(static_risk(at(dx, -dy), at(0, 0), p) == base);
    CHECK(base >= 0.0);
    CHECK(base <= p.eps_obs);
    CHECK(base == doctest::Approx(oracle::static_risk(dx, dy, p)).epsilon(1e-12));
  }
}

TEST_CASE("dynamic risk: hand value, relative-speed sign and sigmoid midpoint") {
  RiskParams p;
  p.xi_v = 10.0;
  p.sigma_l = 1.0;
  VehicleState hdv = at(0, 0, 30.0);  // faster than the AV: v_rel = +1
  CHECK(dynamic_risk(at(10, 0, 20.0), hdv, p) ==
        doctest::Approx(std::exp(-1.0) / (1.0 + std::exp(-5.0))).epsilon(1e-14));

  // Sigmoid midpoint dx = sigma * l * v_rel.
  for (double v_hdv : {30.0, 10.0}) {
    const double vrel = v_hdv > 20.0 ? 1.0 : -1.0;
    const double dx = p.sigma_l * 5.0 * vrel;
    const double dy = 0.7;
    const double rd = dx * dx / (p.xi_v * p.xi_v) + dy * dy / (p.xi_y * p.xi_y);
    CHECK(dynamic_risk(at(dx, dy, 20.0), at(0, 0, v_hdv), p) == p.eps_hdv * std::exp(-rd) / 2.0);
  }
  // Equal speeds count as v_rel = -1.
  CHECK(dynamic_risk(at(3, 0, 20.0), at(0, 0, 20.0), p) ==
        doctest::Approx(oracle::dynamic_risk(3, 0, 20.0, 20.0, 5.0, p)).epsilon(1e-14));
}

TEST_CASE("dynamic risk: bounds and gate direction on random draws") {
  Rng rng(12);
  for (int i = 0; i < 10000; ++i) {
    const RiskParams p = random_params(rng);
    const double dx = uniform(rng, -30, 30), dy = uniform(rng, -6, 6);
    const double v_av = uniform(rng, 10, 30), v_hdv = uniform(rng, 10, 30);
    const double len = uniform(rng, 3, 8);
    VehicleState hdv = at(0, 0, v_hdv);
    hdv.length = len;
    const double r = dynamic_risk(at(dx, dy, v_av), hdv, p);
    const double rd = std::pow(dx * dx / (p.xi_v * p.xi_v), p.lambda_d) +
                      std::pow(dy * dy / (p.xi_y * p.xi_y), p.lambda_d);
    CHECK(r >= 0.0);
    CHECK(r < p.eps_hdv);
    CHECK(r <= p.eps_hdv * std::exp(-rd));
    CHECK(r == doctest::Approx(oracle::dynamic_risk(dx, dy, v_av, v_hdv, len, p)).epsilon(1e-12));

    // With the HDV faster (v_rel = +1) the gate opens on the side where the
    // AV is ahead of the HDV (dx > 0) and closes behind it.
    const double d = uniform(rng, 0.01, 30.0);
    VehicleState fast = hdv;
    fast.v = v_av + 1.0;
    const double ahead = dynamic_risk(at(d, dy, v_av), fast, p);
    const double behind = dynamic_risk(at(-d, dy, v_av), fast, p);
    if (ahead > 0.0 || behind > 0.0) CHECK(ahead > behind);
  }
}

TEST_CASE("hybrid risk: empty, degenerate weights, additivity") {
  RiskParams p;
  const VehicleState av = at(0, 0, 22.0);
  const std::vector<VehicleState> none;
  CHECK(hybrid_risk(av, none, p) == 0.0);
  const std::vector<VehicleState> one{at(7, 1, 25.0)};
  p.w_s = 1.0;
  p.w_d = 0.0;
  CHECK(hybrid_risk(av, one, p) == static_risk(av, one[0], p));
  p = RiskParams{};
  const std::vector<VehicleState> two{one[0], one[0]};
  CHECK(hybrid_risk(av, two, p) == 2.0 * hybrid_risk(av, one, p));
  const RiskSample s = field_sums(av, two, p);
  CHECK(s.static_risk == 2.0 * static_risk(av, one[0], p));
}

TEST_CASE("risk parameters are validated") {
  RiskParams p;
  p.xi_x = 0.0;
  CHECK_THROWS_AS(p.validate(), ConfigError);
  p = RiskParams{};
  p.w_s = 0.0;
  p.w_d = 0.0;
  CHECK_THROWS_AS(p.validate(), ConfigError);
}

TEST_CASE("rasterize: parallel equals serial and cells equal hybrid risk at centers") {
  ScenarioConfig cfg;
  cfg.hdv_count = 5;
  RiskParams p;
  GridSpec spec;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const World w = reset(cfg, seed);
    const ObservationFrame a = rasterize(w, p, spec);
    const ObservationFrame b = rasterize_serial(w, p, spec);
    CHECK(a.risk.values == b.risk.values);
    CHECK(a.occupancy.values == b.occupancy.values);
    const auto in_range = hdvs_in_extent(w.av, w.hdvs, spec);
    for (int r = 0; r < spec.height_cells; ++r) {
      for (int c = 0; c < spec.width_cells; ++c) {
        const Vec2 ctr = a.risk.cell_center(r, c);
        CHECK(a.risk.at(r, c) == hybrid_risk(probe_at(w.av, ctr.x, ctr.y), in_range, p));
        const double o = a.occupancy.at(r, c);
        CHECK((o == 0.0 || o == 1.0));
      }
    }
  }
}

TEST_CASE("rasterize: empty road shows only the AV footprint") {
  ScenarioConfig cfg;
  cfg.hdv_count = 0;
  const World w = reset(cfg, 3);
  GridSpec spec;
  CHECK(spec.extent_x() == 64.0);
  CHECK(spec.extent_y() == 64.0);
  const ObservationFrame f = rasterize(w, RiskParams{}, spec);
  for (double v : f.risk.values) CHECK(v == 0.0);
  double occupied = 0.0;
  for (int r = 0; r < spec.height_cells; ++r) {
    for (int c = 0; c < spec.width_cells; ++c) {
      const Vec2 ctr = f.occupancy.cell_center(r, c);
      const bool near = std::abs(ctr.x) < 2.5 + 1.0 && std::abs(ctr.y) < 1.0 + 1.0;
      CHECK(f.occupancy.at(r, c) == (near ? 1.0 : 0.0));
      occupied += f.occupancy.at(r, c);
    }
  }
  CHECK(occupied > 0.0);
}

TEST_CASE("rasterize: HDVs outside the grid extent do not contribute") {
  ScenarioConfig cfg;
  World w;
  w.config = cfg;
  w.av = at(0, cfg.lane_center(1), 25.0);
  w.hdvs = {at(100.0, cfg.lane_center(1), 20.0)};
  const ObservationFrame f = rasterize(w, RiskParams{}, GridSpec{});
  for (double v : f.risk.values) CHECK(v == 0.0);
}

TEST_CASE("raster peak for a single slow HDV ahead agrees with dense re-sampling") {
  RiskParams p;
  GridSpec spec;
  const VehicleState av = at(0, 6, 25.0);
  const std::vector<VehicleState> hdvs{at(15.0, 6.5, 18.0)};

  auto argmax_cell = [&](const RiskGrid& g) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < g.values.size(); ++i)
      if (g.values[i] > g.values[best]) best = i;
    return std::pair<int, int>{int(best) / g.width_cells, int(best) % g.width_cells};
  };
  auto cell_of = [&](double ex, double ey) {
    return std::pair<int, int>{int(std::floor((ey - spec.origin_y) / spec.cell_size)),
                               int(std::floor((ex - spec.origin_x) / spec.cell_size))};
  };
  // Dense oracle: 4x finer sampling of the same field, argmax location.
  auto dense_peak = [&](FieldKind kind) {
    double best = -1.0, bx = 0.0, by = 0.0;
    const double step = spec.cell_size / 4.0;
    for (int r = 0; r < spec.height_cells * 4; ++r) {
      for (int c = 0; c < spec.width_cells * 4; ++c) {
        const double ex = spec.origin_x + (c + 0.5) * step;
        const double ey = spec.origin_y + (r + 0.5) * step;
        double v = 0.0;
        for (const auto& h : hdvs) {
          const double dx = ex - (h.x - av.x), dy = ey - (h.y - av.y);
          const double s = oracle::static_risk(dx, dy, p);
          const double d = oracle::dynamic_risk(dx, dy, av.v, h.v, h.length, p);
          v += kind == FieldKind::static_field ? s : p.w_s * s + p.w_d * d;
        }
        if (v > best) {
          best = v;
          bx = ex;
          by = ey;
        }
      }
    }
    return cell_of(bx, by);
  };

  const RiskGrid st = rasterize_field(av, hdvs, p, spec, FieldKind::static_field);
  CHECK(argmax_cell(st) == cell_of(15.0, 0.5));
  CHECK(argmax_cell(st) == dense_peak(FieldKind::static_field));
  const RiskGrid hy = rasterize_field(av, hdvs, p, spec, FieldKind::hybrid);
  CHECK(argmax_cell(hy) == dense_peak(FieldKind::hybrid));
}

TEST_CASE("hybrid raster is the weighted sum of the static and dynamic rasters") {
  const Scene scene = load_scene(std::string(RISKDRIVE_SOURCE_DIR) + "/scenes/fig3.json");
  REQUIRE(scene.hdvs.size() == 2);
  const auto& p = scene.risk;
  const RiskGrid s = rasterize_field(scene.av, scene.hdvs, p, scene.grid, FieldKind::static_field);
  const RiskGrid d = rasterize_field(scene.av, scene.hdvs, p, scene.grid, FieldKind::dynamic_field);
  const RiskGrid h = rasterize_field(scene.av, scene.hdvs, p, scene.grid, FieldKind::hybrid);
  for (std::size_t i = 0; i < h.values.size(); ++i) {
    CHECK(h.values[i] == doctest::Approx(p.w_s * s.values[i] + p.w_d * d.values[i]).epsilon(1e-14));
  }
}

TEST_CASE("grid export formats") {
  RiskGrid g = RiskGrid::zeros(GridSpec{3, 2, 1.0, 0.0, 0.0});
  g.at(0, 0) = 0.5;
  g.at(1, 2) = 1.0;
  std::ostringstream csv;
  write_grid_csv(g, csv);
  CHECK(csv.str() == "0.5,0,0\n0,0,1\n");
  std::ostringstream pgm;
  CHECK(write_grid_pgm(g, pgm) == 1.0);
  const std::string bytes = pgm.str();
  const std::string header = "P5\n3 2\n255\n";
  REQUIRE(bytes.size() == header.size() + 6);
  CHECK(bytes.substr(0, header.size()) == header);
  // Top image row is the highest-y grid row.
  CHECK((unsigned char)bytes[header.size() + 2] == 255);
  CHECK((unsigned char)bytes[header.size() + 3] == 128);

  std::ostringstream empty;
  CHECK(write_grid_pgm(RiskGrid::zeros(GridSpec{2, 2, 1.0, 0.0, 0.0}), empty) == 1.0);
  CHECK(format_double(0.1) == "0.1");
  CHECK(std::stod(format_double(1.0 / 3.0)) == 1.0 / 3.0);
  CHECK(format_double(std::nan("")) == "nan");
}
