#include "riskdrive/safety.hpp"

#include <algorithm>
#include <string>

#include "riskdrive/errors.hpp"

namespace riskdrive {

void SafetyConfig::validate() const {
  if (!(r_safe > 0.0)) throw ConfigError("safety.r_safe", "must be positive");
  if (sample_count < 2) throw ConfigError("safety.sample_count", "must be >= 2");
  if (!(lane_change_duration > 0.0)) {
    throw ConfigError("safety.lane_change_duration", "must be positive");
  }
  if (!(min_keep_gap > 0.0)) throw ConfigError("safety.min_keep_gap", "must be positive");
  risk.validate();
}

std::vector<TrajectoryPoint> build_trajectory(const VehicleState& av, int target_lane,
                                              const ScenarioConfig& road,
                                              const SafetyConfig& cfg) {
  if (target_lane < 0 || target_lane >= road.lane_count ||
      std::abs(target_lane - av.lane) != 1) {
    throw InvalidManeuver("target lane " + std::to_string(target_lane) +
                          " is not adjacent to lane " + std::to_string(av.lane));
  }
  const int n = cfg.sample_count;
  const double y_src = road.lane_center(av.lane);
  const double dy = road.lane_center(target_lane) - y_src;
  std::vector<TrajectoryPoint> pts(n);
  for (int i = 0; i < n; ++i) {
    const double u = static_cast<double>(i) / (n - 1);
    const double t = u * cfg.lane_change_duration;
    pts[i] = {t, av.x + av.v * t, y_src + lateral_offset(cfg.profile, u, dy)};
  }
  return pts;
}

LaneChangePlan evaluate_lane_change(const World& world, int target_lane,
                                    const SafetyConfig& cfg) {
  LaneChangePlan plan;
  plan.samples = build_trajectory(world.av, target_lane, world.config, cfg);
  plan.sample_count = cfg.sample_count;
  plan.x_r = 0.5 * world.av.v * cfg.lane_change_duration;
  plan.r_safe = cfg.r_safe;
  plan.per_point_risk.reserve(plan.samples.size());

  const RiskParams& p = cfg.risk;
  std::vector<VehicleState> future = world.hdvs;
  for (const auto& pt : plan.samples) {
    for (std::size_t k = 0; k < future.size(); ++k) {
      future[k].x = world.hdvs[k].x + world.hdvs[k].v * pt.t;
    }
    const VehicleState probe = probe_at(world.av, pt.x - world.av.x, pt.y - world.av.y);
    const RiskSample s = field_sums(probe, future, p);
    plan.per_point_risk.push_back(s);
    plan.r_total += p.w_s * s.static_risk + p.w_d * s.dynamic_risk;
  }
  plan.certified = plan.r_total <= cfg.r_safe;
  return plan;
}

GateDecision gate_action(const World& world, Action proposed, const SafetyConfig& cfg) {
  GateDecision d{proposed, false};
  if (proposed == Action::change_left || proposed == Action::change_right) {
    const int target = world.av.lane + (proposed == Action::change_left ? 1 : -1);
    const bool legal = legal_actions(world)[action_index(proposed)];
    if (!legal || !evaluate_lane_change(world, target, cfg).certified) {
      d = {Action::keep_lane, true};
    }
  }
  if (d.action == Action::keep_lane || d.action == Action::accelerate) {
    auto gap = front_gap(world, world.av.lane);
    if (world.av_maneuver.active) {
      const auto other = front_gap(world, world.av_maneuver.target_lane);
      if (other && (!gap || *other < *gap)) gap = other;
    }
    if (gap && *gap < cfg.min_keep_gap) d = {Action::decelerate, true};
  }
  return d;
}

}  // namespace riskdrive
