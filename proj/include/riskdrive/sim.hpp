#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "riskdrive/geometry.hpp"
#include "riskdrive/rng.hpp"

namespace riskdrive {

struct VehicleState {
  double x = 0.0;        // longitudinal position (m)
  double y = 0.0;        // lateral position (m), lane 0 centered at lane_width / 2
  double v = 0.0;        // longitudinal speed (m/s)
  double heading = 0.0;  // rad
  int lane = 0;
  double length = 5.0;
  double width = 2.0;
  bool is_av = false;

  OrientedBox footprint() const { return {x, y, 0.5 * length, 0.5 * width, heading}; }

  bool operator==(const VehicleState&) const = default;
};

struct Range {
  double lo = 0.0;
  double hi = 0.0;

  bool operator==(const Range&) const = default;
};

struct IdmParams {
  double max_accel = 1.5;      // m/s^2
  double comfort_decel = 2.0;  // m/s^2
  double max_decel = 8.0;      // hard braking limit, m/s^2
  double min_gap = 2.0;        // m
  double time_headway = 1.2;   // s
  double exponent = 4.0;

  bool operator==(const IdmParams&) const = default;
};

struct ScenarioConfig {
  int lane_count = 3;
  double lane_width = 4.0;
  double road_length = 1500.0;
  int hdv_count = 4;
  // When greater than hdv_count, each episode draws its HDV count uniformly
  // from [hdv_count, hdv_count_max].
  int hdv_count_max = 0;
  Range av_speed_range{23.0, 25.0};
  Range hdv_speed_range{20.0, 25.0};
  Range hdv_spawn_gap_range{15.0, 40.0};
  double max_speed = 40.0;
  double dt = 0.1;
  int max_steps = 400;
  std::uint64_t seed = 0;

  double vehicle_length = 5.0;
  double vehicle_width = 2.0;
  double speed_step = 1.5;            // AV accelerate / decelerate increment
  double lane_change_duration = 1.5;  // s
  double hdv_lane_change_prob = 0.0;  // per HDV per step
  double sensing_range = 100.0;       // m, bound for HDV selection
  IdmParams idm{};

  int max_hdvs() const { return hdv_count_max > hdv_count ? hdv_count_max : hdv_count; }
  double lane_center(int lane) const { return (lane + 0.5) * lane_width; }
  int maneuver_steps() const;

  // Throws ConfigError on violated invariants.
  void validate() const;

  bool operator==(const ScenarioConfig&) const = default;
};

enum class Action : int { keep_lane = 0, change_left, change_right, accelerate, decelerate };
inline constexpr int kActionCount = 5;

std::string_view action_name(Action a);
inline int action_index(Action a) { return static_cast<int>(a); }
inline Action action_from_index(int i) { return static_cast<Action>(i); }

enum class DoneReason { none, collision, horizon, goal };
std::string_view done_reason_name(DoneReason r);

struct Maneuver {
  bool active = false;
  int source_lane = 0;
  int target_lane = 0;
  double y_start = 0.0;
  double y_target = 0.0;
  int steps_done = 0;

  bool operator==(const Maneuver&) const = default;
};

struct World {
  ScenarioConfig config;
  VehicleState av;
  std::vector<VehicleState> hdvs;
  Maneuver av_maneuver;
  std::vector<Maneuver> hdv_maneuvers;
  std::vector<double> hdv_desired_speed;
  int step_count = 0;
  bool done = false;
  DoneReason done_reason = DoneReason::none;
  Rng rng;

  bool operator==(const World&) const = default;
};

struct StepOutcome {
  World next_state;
  bool collided = false;
  bool off_road = false;
  double av_speed = 0.0;
  bool lane_changed = false;
  bool done = false;
  DoneReason done_reason = DoneReason::none;

  bool operator==(const StepOutcome&) const = default;
};

// Spawns the AV in the middle lane at x = 0 and the HDVs on longitudinal
// slots separated by gaps drawn from hdv_spawn_gap_range.
// Throws InfeasibleScenario when the HDVs cannot fit on road_length.
World reset(const ScenarioConfig& config, std::uint64_t seed);

// Advances every vehicle by one dt. Illegal lane changes (edge lane or a
// maneuver already in progress) degrade to keep_lane.
// Throws LifecycleError when the world is already done.
StepOutcome step(World& world, Action av_action);

std::array<bool, kActionCount> legal_actions(const World& world);

// Vehicles the AV must attend to: FV/RV in its lane plus adjacent-lane
// vehicles chosen by the 20 m total-gap rule.
std::vector<VehicleState> select_relevant_hdvs(const World& world);

// Bumper-to-bumper distance from the AV to the nearest HDV ahead in `lane`.
std::optional<double> front_gap(const World& world, int lane);
std::optional<double> rear_gap(const World& world, int lane);

bool av_collides(const World& world);

}  // namespace riskdrive
