#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "riskdrive/reward.hpp"
#include "riskdrive/risk_field.hpp"
#include "riskdrive/safety.hpp"
#include "riskdrive/sim.hpp"
#include "riskdrive/tensor.hpp"

namespace riskdrive {

// Mechanism switches of one ablation variant.
struct Variant {
  bool risk_channel = false;     // R: hybrid risk raster fed to the networks
  bool attention = false;        // I: channel and spatial attention blocks
  bool balanced_reward = false;  // B
  bool safety_filter = false;    // S

  std::string name() const;
  // "ppo", "bppo", "rppo", "ppo-s", "ribppo-s". Throws ConfigError otherwise.
  static Variant parse(std::string_view name);
  static const std::vector<std::string>& all_names();

  bool operator==(const Variant&) const = default;
};

struct EnvSettings {
  ScenarioConfig scenario{};
  RiskParams risk{};
  GridSpec grid{};
  SafetyConfig safety{};
  RewardConfig reward{};
  Variant variant{};
};

// Instrumentation: how often each optional mechanism ran.
struct EnvCounters {
  long observations = 0;
  long risk_rasters = 0;
  long attention_passes = 0;
  long balanced_rewards = 0;
  long gate_calls = 0;
  long gate_overrides = 0;

  EnvCounters& operator+=(const EnvCounters& o);
  bool operator==(const EnvCounters&) const = default;
};

inline constexpr int kObservationChannels = 3;

// Channels: occupancy, hybrid risk (zero unless the variant has R), ego speed
// divided by max_speed broadcast over the grid.
Tensor3 make_observation(const World& world, const EnvSettings& settings,
                         EnvCounters* counters = nullptr);

struct RewardStep {
  RewardTerms terms;
  double raw = 0.0;       // R_t
  double balanced = 0.0;  // equals raw unless the variant has B
  double stored = 0.0;    // what enters the rollout buffer
  double gamma_b = 0.0;
  double aggregated_risk = 0.0;
};

// Reward for one executed step. Updates the running history in `state`.
RewardStep shape_reward(const StepOutcome& outcome, RewardState& state,
                        const EnvSettings& settings, EnvCounters* counters = nullptr);

}  // namespace riskdrive
