#pragma once

#include <cstddef>
#include <vector>

#include "riskdrive/sim.hpp"

namespace riskdrive {

// Which historical average feeds the balanced reward.
enum class HistoryForm { ema, mean };

struct RewardConfig {
  double w_safety = 10.0;     // collision penalty magnitude
  double w_stability = 0.5;   // penalty per initiated lane change
  double w_efficiency = 1.0;  // scale of av_speed / max_speed
  double r_const = 0.1;       // constant offset per step
  double ema_rate = 0.01;     // EMA weight on the current reward; r_ave keeps 1 - ema_rate
  double gamma_b_min = 0.2;
  double gamma_b_max = 0.9;
  double risk_to_gamma_scale = 0.2;
  HistoryForm history_form = HistoryForm::ema;
  // Store the balanced reward in the rollout buffer (otherwise the raw R_t is
  // stored even when the balanced-reward mechanism is enabled).
  bool store_balanced = true;

  void validate() const;

  bool operator==(const RewardConfig&) const = default;
};

struct RewardTerms {
  double safety = 0.0;
  double stability = 0.0;
  double efficiency = 0.0;
  double constant = 0.0;

  double total() const { return safety + stability + efficiency + constant; }
};

struct RewardState {
  double r_ave_ema = 0.0;
  std::vector<double> step_rewards;
  double history_sum = 0.0;

  std::size_t step_index() const { return step_rewards.size(); }
};

RewardTerms reward_terms(const StepOutcome& outcome, const RewardConfig& cfg);
double step_reward(const StepOutcome& outcome, const RewardConfig& cfg);

// r_ave <- (1 - ema_rate) * r_ave + ema_rate * r_current; appends r_current.
RewardState update_ema(RewardState state, double r_current, const RewardConfig& cfg);
void update_ema_in_place(RewardState& state, double r_current, const RewardConfig& cfg);

// Mean of the stored step rewards, i.e. of the N - 1 steps preceding the
// current step N. Throws InsufficientHistory when nothing is stored.
double historical_mean(const RewardState& state);

// clamp(gamma_b_min + scale * risk, gamma_b_min, gamma_b_max).
double balance_coefficient(double aggregated_risk, const RewardConfig& cfg);

// (1 - gamma_b) * r_ave + gamma_b * r_current with r_ave taken from `form`.
// For the mean form with an empty history, r_ave = r_current.
double balanced_reward(const RewardState& state, double r_current, double gamma_b,
                       HistoryForm form = HistoryForm::ema);

}  // namespace riskdrive
