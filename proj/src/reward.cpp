#include "riskdrive/reward.hpp"

#include <algorithm>
#include <stdexcept>

#include "riskdrive/errors.hpp"

namespace riskdrive {

void RewardConfig::validate() const {
  if (!(ema_rate > 0.0 && ema_rate < 1.0)) {
    throw ConfigError("reward.ema_rate", "must lie in (0, 1)");
  }
  if (!(gamma_b_min >= 0.0 && gamma_b_min <= gamma_b_max && gamma_b_max <= 1.0)) {
    throw ConfigError("reward.gamma_b_min",
                      "requires 0 <= gamma_b_min <= gamma_b_max <= 1");
  }
  if (!(risk_to_gamma_scale >= 0.0)) {
    throw ConfigError("reward.risk_to_gamma_scale", "must be >= 0");
  }
}

RewardTerms reward_terms(const StepOutcome& outcome, const RewardConfig& cfg) {
  RewardTerms t;
  t.safety = outcome.collided ? -cfg.w_safety : 0.0;
  t.stability = outcome.lane_changed ? -cfg.w_stability : 0.0;
  t.efficiency = cfg.w_efficiency * (outcome.av_speed / outcome.next_state.config.max_speed);
  t.constant = cfg.r_const;
  return t;
}

double step_reward(const StepOutcome& outcome, const RewardConfig& cfg) {
  return reward_terms(outcome, cfg).total();
}

void update_ema_in_place(RewardState& state, double r_current, const RewardConfig& cfg) {
  state.r_ave_ema = (1.0 - cfg.ema_rate) * state.r_ave_ema + cfg.ema_rate * r_current;
  state.step_rewards.push_back(r_current);
  state.history_sum += r_current;
}

RewardState update_ema(RewardState state, double r_current, const RewardConfig& cfg) {
  update_ema_in_place(state, r_current, cfg);
  return state;
}

double historical_mean(const RewardState& state) {
  if (state.step_rewards.empty()) {
    throw InsufficientHistory("historical_mean needs at least one previous step");
  }
  return state.history_sum / static_cast<double>(state.step_rewards.size());
}

double balance_coefficient(double aggregated_risk, const RewardConfig& cfg) {
  if (aggregated_risk < 0.0) throw std::invalid_argument("aggregated risk must be >= 0");
  return std::clamp(cfg.gamma_b_min + cfg.risk_to_gamma_scale * aggregated_risk,
                    cfg.gamma_b_min, cfg.gamma_b_max);
}

double balanced_reward(const RewardState& state, double r_current, double gamma_b,
                       HistoryForm form) {
  if (!(gamma_b >= 0.0 && gamma_b <= 1.0)) {
    throw std::invalid_argument("gamma_b must lie in [0, 1]");
  }
  double r_ave = state.r_ave_ema;
  if (form == HistoryForm::mean) {
    r_ave = state.step_rewards.empty() ? r_current : historical_mean(state);
  }
  return (1.0 - gamma_b) * r_ave + gamma_b * r_current;
}

}  // namespace riskdrive
