#pragma once

#include <vector>

#include "riskdrive/risk_field.hpp"
#include "riskdrive/sim.hpp"
#include "riskdrive/trajectory.hpp"

namespace riskdrive {

struct SafetyConfig {
  double r_safe = 2.5;
  int sample_count = 20;
  double lane_change_duration = 1.5;  // s
  double min_keep_gap = 10.0;         // m
  LateralProfile profile = LateralProfile::smoothstep;
  // The rollout buffer keeps the sampled proposal and its log-probability, so
  // the gate acts as part of the environment. When false the executed
  // replacement is stored instead, which never blames the proposal.
  bool credit_proposed = true;
  RiskParams risk{};

  void validate() const;

  bool operator==(const SafetyConfig&) const = default;
};

struct TrajectoryPoint {
  double t = 0.0;  // s since maneuver start
  double x = 0.0;  // world frame (m)
  double y = 0.0;  // world frame (m)
};

struct LaneChangePlan {
  double x_r = 0.0;  // longitudinal distance to the maneuver midpoint
  int sample_count = 0;
  std::vector<TrajectoryPoint> samples;
  std::vector<RiskSample> per_point_risk;  // summed over HDVs
  double r_total = 0.0;
  double r_safe = 0.0;
  bool certified = false;
};

// N points uniformly spaced in time over the maneuver; x advances at the AV's
// current speed, y follows the configured profile from the source-lane center
// to the target-lane center. Throws InvalidManeuver unless target_lane is an
// existing lane adjacent to av.lane.
std::vector<TrajectoryPoint> build_trajectory(const VehicleState& av, int target_lane,
                                              const ScenarioConfig& road,
                                              const SafetyConfig& cfg);

// Integrates static and dynamic risk of every HDV (propagated at constant
// speed) along the trajectory. certified <=> r_total <= r_safe.
LaneChangePlan evaluate_lane_change(const World& world, int target_lane,
                                    const SafetyConfig& cfg);

struct GateDecision {
  Action action = Action::keep_lane;
  bool was_overridden = false;
};

// Lane changes must be certified, otherwise they become keep_lane. keep_lane
// and accelerate with a front gap below min_keep_gap become decelerate.
GateDecision gate_action(const World& world, Action proposed, const SafetyConfig& cfg);

}  // namespace riskdrive
