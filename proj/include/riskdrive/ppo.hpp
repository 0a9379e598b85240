#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "riskdrive/env.hpp"
#include "riskdrive/network.hpp"
#include "riskdrive/optimizer.hpp"

namespace riskdrive {

struct PPOConfig {
  double gamma_d = 0.99;
  double lambda_gae = 0.95;
  double clip_eps = 0.2;
  int epochs_per_update = 4;
  int minibatch_size = 64;
  double value_loss_weight = 0.5;
  int rollout_horizon = 512;  // T, steps per iteration over all workers
  bool normalize_advantages = true;
  // Step-limit endings bootstrap from V(s') instead of counting as terminal;
  // the observation carries no clock, so a hard cut makes values unlearnable.
  bool bootstrap_truncated = true;
  double entropy_coef = 0.0;
  double max_grad_norm = 0.5;  // <= 0 disables clipping
  int num_workers = 1;

  void validate() const;

  bool operator==(const PPOConfig&) const = default;
};

struct Transition {
  Tensor3 obs;
  std::array<bool, kActionCount> mask{};
  std::vector<double> actor_h;   // recurrent state fed to the actor at this step
  std::vector<double> critic_h;
  std::array<double, kActionCount> behavior_probs{};
  int action = 0;           // credited action, see SafetyConfig::credit_proposed
  int proposed_action = 0;  // sampled before gating
  int executed_action = 0;
  bool overridden = false;
  double log_prob = 0.0;    // behavior log-probability of the credited action
  double reward = 0.0;      // stored (balanced when enabled)
  double raw_reward = 0.0;
  RewardTerms terms;
  double value = 0.0;
  double av_speed = 0.0;
  bool collided = false;
  bool done = false;
  bool truncated = false;        // episode ended on the step limit
  double bootstrap_value = 0.0;  // V(s') when truncated
};

struct RolloutBuffer {
  std::vector<Transition> steps;
  double last_value = 0.0;  // V(s_T), 0 when the last step is terminal
  std::vector<double> advantages;
  std::vector<double> returns;
  bool finalized = false;

  std::size_t size() const { return steps.size(); }
};

// A_t = sum_k (gamma*lambda)^k delta_{t+k}, cut at done flags;
// returns G_t = A_t + V(s_t).
void compute_gae(std::span<const double> rewards, std::span<const double> values,
                 std::span<const std::uint8_t> dones, double last_value, double gamma,
                 double lambda, std::span<double> advantages, std::span<double> returns);
void compute_gae(RolloutBuffer& buffer, const PPOConfig& cfg);

// Zero mean, unit (population) variance. Leaves constant inputs centered.
void normalize_in_place(std::span<double> values);

// min(ratio * A, clip(ratio, 1 - eps, 1 + eps) * A).
double clipped_objective(double ratio, double advantage, double clip_eps);
// d/d(ratio) of clipped_objective: A on the unclipped branch, 0 when the
// clipped branch is active and selected.
double clipped_objective_grad(double ratio, double advantage, double clip_eps);

// Concatenates segments whose advantages are already computed, then
// normalizes advantages over the whole batch when configured.
RolloutBuffer merge_segments(std::vector<RolloutBuffer> segments, const PPOConfig& cfg);

// Per-worker rollout state; persists across iterations.
struct Worker {
  std::uint64_t root_seed = 0;
  std::uint64_t worker_index = 0;
  std::uint64_t episodes_started = 0;
  World world;
  bool needs_reset = true;
  RecurrentState actor_h;
  RecurrentState critic_h;
  RewardState reward_state;
  Rng policy_rng;
  double episode_raw_reward = 0.0;
  EnvCounters counters;

  Worker(std::uint64_t root_seed, std::uint64_t index);
};

struct EpisodeSummary {
  double raw_reward = 0.0;
  int steps = 0;
  bool collided = false;
};

struct AgentStep {
  Transition transition;
  StepOutcome outcome;
};

// One environment step: observe, run actor and critic, pick an action
// (sample, or argmax when greedy), gate it when the variant has S, step the
// world and shape the reward. Advances the worker's recurrent states.
AgentStep agent_step(Worker& worker, const ActorCritic& model, const EnvSettings& settings,
                     bool greedy);

// Runs from the worker's current state until max_steps or episode end.
RolloutBuffer collect_rollout(Worker& worker, const ActorCritic& model,
                              const EnvSettings& settings, int max_steps,
                              std::vector<EpisodeSummary>* finished = nullptr);

struct UpdateStats {
  double mean_ratio = 0.0;
  double clip_fraction = 0.0;
  double value_loss = 0.0;
  double policy_objective = 0.0;
  double entropy = 0.0;
  int minibatches = 0;
};

struct TrainerState {
  AdamState actor_opt;
  AdamState critic_opt;
  Rng shuffle_rng;
};

// Loss gradients of the listed samples, each weighted by `scale`, added to
// d_actor / d_critic.
void accumulate_gradients(const ActorCritic& model, const RolloutBuffer& merged,
                          std::span<const std::size_t> indices, const PPOConfig& cfg,
                          double scale, std::span<double> d_actor, std::span<double> d_critic,
                          UpdateStats& stats);

// Epochs of shuffled minibatch Adam steps on the merged, finalized buffer.
// Throws NonFiniteError (parameters untouched by the failing step).
UpdateStats ppo_update(ActorCritic& model, TrainerState& trainer, const RolloutBuffer& merged,
                       const PPOConfig& cfg, const AdamConfig& adam);

}  // namespace riskdrive
