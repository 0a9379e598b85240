#include "riskdrive/env.hpp"

#include <algorithm>

#include "riskdrive/errors.hpp"

namespace riskdrive {

std::string Variant::name() const {
  if (risk_channel && attention && balanced_reward && safety_filter) return "ribppo-s";
  if (!risk_channel && !attention && !balanced_reward && !safety_filter) return "ppo";
  if (balanced_reward && !risk_channel && !attention && !safety_filter) return "bppo";
  if (risk_channel && !attention && !balanced_reward && !safety_filter) return "rppo";
  if (safety_filter && !risk_channel && !attention && !balanced_reward) return "ppo-s";
  std::string s = "custom-";
  s += risk_channel ? 'R' : '_';
  s += attention ? 'I' : '_';
  s += balanced_reward ? 'B' : '_';
  s += safety_filter ? 'S' : '_';
  return s;
}

Variant Variant::parse(std::string_view name) {
  std::string n(name);
  std::transform(n.begin(), n.end(), n.begin(), [](unsigned char c) { return std::tolower(c); });
  if (n == "ribppo-s") return {true, true, true, true};
  if (n == "ppo") return {};
  if (n == "bppo") return {false, false, true, false};
  if (n == "rppo") return {true, false, false, false};
  if (n == "ppo-s") return {false, false, false, true};
  throw ConfigError("variant", "unknown variant '" + std::string(name) +
                                   "' (expected ppo, bppo, rppo, ppo-s or ribppo-s)");
}

const std::vector<std::string>& Variant::all_names() {
  static const std::vector<std::string> names{"ppo", "bppo", "rppo", "ppo-s", "ribppo-s"};
  return names;
}

EnvCounters& EnvCounters::operator+=(const EnvCounters& o) {
  observations += o.observations;
  risk_rasters += o.risk_rasters;
  attention_passes += o.attention_passes;
  balanced_rewards += o.balanced_rewards;
  gate_calls += o.gate_calls;
  gate_overrides += o.gate_overrides;
  return *this;
}

Tensor3 make_observation(const World& world, const EnvSettings& settings,
                         EnvCounters* counters) {
  const GridSpec& g = settings.grid;
  Tensor3 obs(kObservationChannels, g.height_cells, g.width_cells);
  const ObservationFrame frame = rasterize(world, settings.risk, g);
  const std::size_t n = obs.plane();
  std::copy(frame.occupancy.values.begin(), frame.occupancy.values.end(), obs.values.begin());
  if (settings.variant.risk_channel) {
    std::copy(frame.risk.values.begin(), frame.risk.values.end(), obs.values.begin() + n);
    if (counters) ++counters->risk_rasters;
  }
  const double speed = world.av.v / world.config.max_speed;
  std::fill(obs.values.begin() + 2 * n, obs.values.end(), speed);
  if (counters) ++counters->observations;
  return obs;
}

RewardStep shape_reward(const StepOutcome& outcome, RewardState& state,
                        const EnvSettings& settings, EnvCounters* counters) {
  RewardStep r;
  r.terms = reward_terms(outcome, settings.reward);
  r.raw = r.terms.total();
  r.balanced = r.raw;
  if (settings.variant.balanced_reward) {
    const World& w = outcome.next_state;
    const auto relevant = select_relevant_hdvs(w);
    r.aggregated_risk = hybrid_risk(w.av, relevant, settings.risk);
    r.gamma_b = balance_coefficient(r.aggregated_risk, settings.reward);
    r.balanced = balanced_reward(state, r.raw, r.gamma_b, settings.reward.history_form);
    if (counters) ++counters->balanced_rewards;
  }
  update_ema_in_place(state, r.raw, settings.reward);
  r.stored = settings.variant.balanced_reward && settings.reward.store_balanced ? r.balanced
                                                                                 : r.raw;
  return r;
}

}  // namespace riskdrive
