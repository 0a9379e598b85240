#include "riskdrive/sim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "riskdrive/errors.hpp"
#include "riskdrive/trajectory.hpp"

namespace riskdrive {

std::string_view action_name(Action a) {
  switch (a) {
    case Action::keep_lane: return "keep_lane";
    case Action::change_left: return "change_left";
    case Action::change_right: return "change_right";
    case Action::accelerate: return "accelerate";
    case Action::decelerate: return "decelerate";
  }
  return "unknown";
}

std::string_view done_reason_name(DoneReason r) {
  switch (r) {
    case DoneReason::none: return "none";
    case DoneReason::collision: return "collision";
    case DoneReason::horizon: return "horizon";
    case DoneReason::goal: return "goal";
  }
  return "unknown";
}

int ScenarioConfig::maneuver_steps() const {
  return std::max(1, static_cast<int>(std::lround(lane_change_duration / dt)));
}

namespace {

void require(bool ok, const char* field, const char* what) {
  if (!ok) throw ConfigError(std::string("scenario.") + field, what);
}

void require_range(const Range& r, const char* field) {
  require(std::isfinite(r.lo) && std::isfinite(r.hi), field, "bounds must be finite");
  require(r.lo <= r.hi, field, "range must satisfy lo <= hi");
  require(r.lo >= 0.0, field, "range must be nonnegative");
}

}  // namespace

void ScenarioConfig::validate() const {
  require(lane_count >= 2, "lane_count", "must be >= 2");
  require(lane_width > 0.0, "lane_width", "must be positive");
  require(road_length > 0.0, "road_length", "must be positive");
  require(hdv_count >= 0, "hdv_count", "must be >= 0");
  require(hdv_count_max >= 0, "hdv_count_max", "must be >= 0");
  require_range(av_speed_range, "av_speed_range");
  require_range(hdv_speed_range, "hdv_speed_range");
  require_range(hdv_spawn_gap_range, "hdv_spawn_gap_range");
  require(max_speed > 0.0, "max_speed", "must be positive");
  require(av_speed_range.hi <= max_speed, "av_speed_range", "exceeds max_speed");
  require(hdv_speed_range.hi <= max_speed, "hdv_speed_range", "exceeds max_speed");
  require(dt > 0.0, "dt", "must be positive");
  require(max_steps >= 1, "max_steps", "must be >= 1");
  require(vehicle_length > 0.0, "vehicle_length", "must be positive");
  require(vehicle_width > 0.0 && vehicle_width < lane_width, "vehicle_width",
          "must be positive and narrower than a lane");
  require(speed_step >= 0.0, "speed_step", "must be >= 0");
  require(lane_change_duration >= dt, "lane_change_duration", "must be >= dt");
  require(hdv_lane_change_prob >= 0.0 && hdv_lane_change_prob <= 1.0,
          "hdv_lane_change_prob", "must lie in [0, 1]");
  require(sensing_range > 0.0, "sensing_range", "must be positive");
}

World reset(const ScenarioConfig& config, std::uint64_t seed) {
  config.validate();
  const int n_max = config.max_hdvs();
  const double gap_lo = config.hdv_spawn_gap_range.lo;
  const double min_span = n_max * (gap_lo + config.vehicle_length);
  if (min_span > config.road_length) {
    throw InfeasibleScenario("cannot place " + std::to_string(n_max) +
                             " HDVs without overlap: minimum span " +
                             std::to_string(min_span) + " m exceeds road_length " +
                             std::to_string(config.road_length) + " m");
  }

  World w;
  w.config = config;
  w.config.seed = seed;
  w.rng = make_stream(seed, "world");
  Rng spawn = make_stream(seed, "spawn");

  const int n = config.hdv_count_max > config.hdv_count
                    ? uniform_int(spawn, config.hdv_count, config.hdv_count_max)
                    : config.hdv_count;

  const int av_lane = (config.lane_count - 1) / 2;
  w.av.is_av = true;
  w.av.lane = av_lane;
  w.av.x = 0.0;
  w.av.y = config.lane_center(av_lane);
  w.av.v = uniform(spawn, config.av_speed_range.lo, config.av_speed_range.hi);
  w.av.length = config.vehicle_length;
  w.av.width = config.vehicle_width;

  const int av_slot = uniform_int(spawn, 0, n);
  std::vector<double> gaps(n);
  for (double& g : gaps) {
    g = uniform(spawn, config.hdv_spawn_gap_range.lo, config.hdv_spawn_gap_range.hi);
  }
  double span = 0.0;
  double extra = 0.0;
  for (double g : gaps) {
    span += g + config.vehicle_length;
    extra += g - gap_lo;
  }
  if (span > config.road_length && extra > 0.0) {
    const double scale = (config.road_length - n * (gap_lo + config.vehicle_length)) / extra;
    for (double& g : gaps) g = gap_lo + (g - gap_lo) * scale;
  }

  std::vector<double> slots(n + 1, 0.0);
  for (int j = 1; j <= n; ++j) slots[j] = slots[j - 1] + config.vehicle_length + gaps[j - 1];
  const double shift = slots[av_slot];

  for (int j = 0; j <= n; ++j) {
    if (j == av_slot) continue;
    VehicleState h;
    h.lane = uniform_int(spawn, 0, config.lane_count - 1);
    h.x = slots[j] - shift;
    h.y = config.lane_center(h.lane);
    h.v = uniform(spawn, config.hdv_speed_range.lo, config.hdv_speed_range.hi);
    h.length = config.vehicle_length;
    h.width = config.vehicle_width;
    w.hdvs.push_back(h);
    w.hdv_desired_speed.push_back(h.v);
  }
  w.hdv_maneuvers.assign(w.hdvs.size(), Maneuver{});
  return w;
}

std::array<bool, kActionCount> legal_actions(const World& world) {
  std::array<bool, kActionCount> legal{};
  legal.fill(true);
  const bool busy = world.av_maneuver.active;
  legal[action_index(Action::change_left)] =
      !busy && world.av.lane + 1 < world.config.lane_count;
  legal[action_index(Action::change_right)] = !busy && world.av.lane > 0;
  return legal;
}

namespace {

int nearest_lane(const ScenarioConfig& cfg, double y) {
  const int lane = static_cast<int>(std::floor(y / cfg.lane_width));
  return std::clamp(lane, 0, cfg.lane_count - 1);
}

void start_maneuver(const ScenarioConfig& cfg, const VehicleState& v, int target,
                    Maneuver& m) {
  m.active = true;
  m.source_lane = v.lane;
  m.target_lane = target;
  m.y_start = cfg.lane_center(v.lane);
  m.y_target = cfg.lane_center(target);
  m.steps_done = 0;
}

void advance_maneuver(const ScenarioConfig& cfg, VehicleState& v, Maneuver& m) {
  if (!m.active) return;
  const int total = cfg.maneuver_steps();
  ++m.steps_done;
  if (m.steps_done >= total) {
    v.y = m.y_target;
    v.lane = m.target_lane;
    v.heading = 0.0;
    m.active = false;
    return;
  }
  const double u = static_cast<double>(m.steps_done) / total;
  const double dy = m.y_target - m.y_start;
  v.y = m.y_start + lateral_offset(LateralProfile::smoothstep, u, dy);
  v.lane = nearest_lane(cfg, v.y);
  const double vy = lateral_offset_rate(LateralProfile::smoothstep, u, dy) /
                    cfg.lane_change_duration;
  v.heading = std::atan(vy / std::max(v.v, 0.1));
}

double idm_accel(const IdmParams& p, double v, double v0, bool has_leader, double gap,
                 double closing_speed) {
  const double ratio = v0 > 0.0 ? v / v0 : 1.0;
  double a = p.max_accel * (1.0 - std::pow(ratio, p.exponent));
  if (has_leader) {
    const double s_star =
        p.min_gap + std::max(0.0, v * p.time_headway +
                                      v * closing_speed /
                                          (2.0 * std::sqrt(p.max_accel * p.comfort_decel)));
    const double s = std::max(gap, 0.1);
    a -= p.max_accel * (s_star / s) * (s_star / s);
  }
  return std::clamp(a, -p.max_decel, p.max_accel);
}

}  // namespace

bool av_collides(const World& world) {
  const OrientedBox av = world.av.footprint();
  for (const auto& h : world.hdvs) {
    if (boxes_overlap(av, h.footprint())) return true;
  }
  return false;
}

StepOutcome step(World& world, Action av_action) {
  if (world.done) throw LifecycleError("step() called on a finished episode");
  const ScenarioConfig& cfg = world.config;
  if (!legal_actions(world)[action_index(av_action)]) av_action = Action::keep_lane;

  // HDV longitudinal control from the pre-step snapshot.
  const std::size_t n = world.hdvs.size();
  std::vector<double> accel(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const VehicleState& me = world.hdvs[i];
    const VehicleState* leader = nullptr;
    auto consider = [&](const VehicleState& other) {
      if (&other == &me || other.lane != me.lane || other.x <= me.x) return;
      if (leader == nullptr || other.x < leader->x) leader = &other;
    };
    consider(world.av);
    for (const auto& other : world.hdvs) consider(other);
    double gap = 0.0;
    double closing = 0.0;
    if (leader != nullptr) {
      gap = (leader->x - 0.5 * leader->length) - (me.x + 0.5 * me.length);
      closing = me.v - leader->v;
    }
    accel[i] = idm_accel(cfg.idm, me.v, world.hdv_desired_speed[i], leader != nullptr,
                         gap, closing);
  }

  if (cfg.hdv_lane_change_prob > 0.0) {
    for (std::size_t i = 0; i < n; ++i) {
      Maneuver& m = world.hdv_maneuvers[i];
      const double draw = uniform(world.rng, 0.0, 1.0);
      if (m.active || draw >= cfg.hdv_lane_change_prob) continue;
      const int lane = world.hdvs[i].lane;
      const bool can_left = lane + 1 < cfg.lane_count;
      const bool can_right = lane > 0;
      int target = lane;
      if (can_left && can_right) {
        target = uniform(world.rng, 0.0, 1.0) < 0.5 ? lane - 1 : lane + 1;
      } else {
        target = can_left ? lane + 1 : lane - 1;
      }
      start_maneuver(cfg, world.hdvs[i], target, m);
    }
  }

  for (std::size_t i = 0; i < n; ++i) {
    VehicleState& h = world.hdvs[i];
    h.v = std::clamp(h.v + accel[i] * cfg.dt, 0.0, cfg.max_speed);
    h.x += h.v * cfg.dt;
    advance_maneuver(cfg, h, world.hdv_maneuvers[i]);
  }

  StepOutcome out;
  VehicleState& av = world.av;
  switch (av_action) {
    case Action::accelerate:
      av.v = std::min(av.v + cfg.speed_step, cfg.max_speed);
      break;
    case Action::decelerate:
      av.v = std::max(av.v - cfg.speed_step, 0.0);
      break;
    case Action::change_left:
    case Action::change_right: {
      const int target = av.lane + (av_action == Action::change_left ? 1 : -1);
      start_maneuver(cfg, av, target, world.av_maneuver);
      out.lane_changed = true;
      break;
    }
    case Action::keep_lane:
      break;
  }
  av.x += av.v * cfg.dt;
  advance_maneuver(cfg, av, world.av_maneuver);

  ++world.step_count;
  out.collided = av_collides(world);
  out.off_road = av.y < 0.0 || av.y > cfg.lane_count * cfg.lane_width;
  out.av_speed = av.v;
  if (out.collided || out.off_road) {
    world.done = true;
    world.done_reason = DoneReason::collision;
  } else if (av.x >= cfg.road_length) {
    world.done = true;
    world.done_reason = DoneReason::goal;
  } else if (world.step_count >= cfg.max_steps) {
    world.done = true;
    world.done_reason = DoneReason::horizon;
  }
  out.done = world.done;
  out.done_reason = world.done_reason;
  out.next_state = world;
  return out;
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double bumper_gap_ahead(const VehicleState& av, const VehicleState& h) {
  return (h.x - 0.5 * h.length) - (av.x + 0.5 * av.length);
}

double bumper_gap_behind(const VehicleState& av, const VehicleState& h) {
  return (av.x - 0.5 * av.length) - (h.x + 0.5 * h.length);
}

}  // namespace

std::optional<double> front_gap(const World& world, int lane) {
  std::optional<double> best;
  for (const auto& h : world.hdvs) {
    if (h.lane != lane || h.x <= world.av.x) continue;
    const double g = bumper_gap_ahead(world.av, h);
    if (!best || g < *best) best = g;
  }
  return best;
}

std::optional<double> rear_gap(const World& world, int lane) {
  std::optional<double> best;
  for (const auto& h : world.hdvs) {
    if (h.lane != lane || h.x > world.av.x) continue;
    const double g = bumper_gap_behind(world.av, h);
    if (!best || g < *best) best = g;
  }
  return best;
}

std::vector<VehicleState> select_relevant_hdvs(const World& world) {
  const VehicleState& av = world.av;
  const ScenarioConfig& cfg = world.config;
  const int lane = av.lane;

  const VehicleState* fv = nullptr;
  const VehicleState* rv = nullptr;
  for (const auto& h : world.hdvs) {
    if (h.lane != lane) continue;
    if (h.x > av.x) {
      if (fv == nullptr || h.x < fv->x) fv = &h;
    } else if (rv == nullptr || h.x > rv->x) {
      rv = &h;
    }
  }

  std::vector<VehicleState> out;
  if (fv != nullptr) out.push_back(*fv);
  if (rv != nullptr) out.push_back(*rv);

  const double gap_f = fv ? bumper_gap_ahead(av, *fv) : kInf;
  const double gap_r = rv ? bumper_gap_behind(av, *rv) : kInf;
  const bool wide = gap_f + gap_r > 20.0;
  const double range_lo = rv ? rv->x : av.x - cfg.sensing_range;
  const double range_hi = fv ? fv->x : av.x + cfg.sensing_range;

  for (int adj : {lane - 1, lane + 1}) {
    if (adj < 0 || adj >= cfg.lane_count) continue;
    if (wide) {
      std::vector<VehicleState> picked;
      for (const auto& h : world.hdvs) {
        if (h.lane != adj) continue;
        const bool in_range = h.x >= range_lo && h.x <= range_hi;
        const bool lateral_overlap =
            std::abs(h.y - av.y) < 0.5 * (h.width + av.width) &&
            std::abs(h.x - av.x) <= cfg.sensing_range;
        if (in_range || lateral_overlap) picked.push_back(h);
      }
      std::sort(picked.begin(), picked.end(),
                [](const VehicleState& a, const VehicleState& b) { return a.x < b.x; });
      out.insert(out.end(), picked.begin(), picked.end());
    } else {
      const VehicleState* nearest = nullptr;
      for (const auto& h : world.hdvs) {
        if (h.lane != adj) continue;
        if (nearest == nullptr || std::abs(h.x - av.x) < std::abs(nearest->x - av.x)) {
          nearest = &h;
        }
      }
      if (nearest != nullptr) out.push_back(*nearest);
    }
  }
  return out;
}

}  // namespace riskdrive
