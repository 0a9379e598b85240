#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "riskdrive/checkpoint.hpp"
#include "riskdrive/config.hpp"
#include "riskdrive/env.hpp"
#include "riskdrive/network.hpp"

namespace riskdrive {

// One row of metrics.csv.
struct IterationMetrics {
  int iteration = 0;
  long steps = 0;
  int episodes = 0;  // episodes that finished during collection
  int collisions = 0;
  long gate_overrides = 0;
  double mean_reward = 0.0;          // mean stored (possibly balanced) step reward
  double mean_episode_reward = 0.0;  // mean raw return of finished episodes, nan if none
  double r_safety = 0.0;             // per-step means of the raw reward terms
  double r_stability = 0.0;
  double r_efficiency = 0.0;
  double r_const = 0.0;
  double mean_speed = 0.0;
  double mean_ratio = 0.0;
  double clip_fraction = 0.0;
  double value_loss = 0.0;
  // Sampled-policy evaluation on worlds drawn from (seed, iteration), nan
  // when disabled.
  double eval_reward = 0.0;
  double eval_speed = 0.0;
  int eval_collisions = 0;
  double eval_greedy_reward = 0.0;  // same worlds, argmax actions
};

const std::vector<std::string>& metrics_columns();
std::string metrics_header();
std::string metrics_row(const IterationMetrics& m);

struct EpisodeStats {
  double reward = 0.0;  // sum of raw step rewards
  std::vector<double> speeds;
  bool collided = false;
};

struct EvalReport {
  int episodes = 0;
  double mean_reward = 0.0;
  double mean_speed = 0.0;      // over all steps of all episodes
  double speed_variance = 0.0;  // population variance over the same steps
  double collision_rate = 0.0;  // collisions per 100 episodes
  double wall_time = 0.0;       // s
};

// Throws std::invalid_argument for an empty list.
EvalReport summarize(const std::vector<EpisodeStats>& episodes, double wall_time = 0.0);

// Episodes i = 0..n-1 are seeded from (root_seed, i); fresh recurrent state
// and reward history per call.
std::vector<EpisodeStats> run_episodes(const ActorCritic& model, const EnvSettings& settings,
                                       std::uint64_t root_seed, int episodes, bool greedy);

ActorCritic model_from_checkpoint(const Checkpoint& ck);
// Greedy evaluation with seeds derived from `seed`.
EvalReport evaluate(const Checkpoint& ck, int episodes, std::uint64_t seed);

struct TrainOptions {
  std::filesystem::path out_dir;  // empty: nothing written
  std::ostream* log = nullptr;    // progress lines
};

struct TrainResult {
  std::vector<IterationMetrics> metrics;
  EvalReport final_eval;
  Checkpoint checkpoint;
  EnvCounters counters;
};

// collect -> GAE -> update for train.iterations iterations. Writes
// metrics.csv, config.json, checkpoint.bin (periodically and at the end) and
// final_eval.csv to out_dir. A NonFiniteError aborts the run and leaves the
// last written checkpoint untouched.
TrainResult train(const ExperimentConfig& cfg, const Variant& variant, std::uint64_t seed,
                  const TrainOptions& options = {});

// Mean eval_reward over the first / final third of the iterations.
double first_third_eval_reward(const std::vector<IterationMetrics>& m);
double final_third_eval_reward(const std::vector<IterationMetrics>& m);

struct AblationRow {
  std::string variant;
  std::uint64_t seed = 0;
  std::string metric;
  double value = 0.0;
};

const std::vector<std::string>& ablation_metrics();

// Trains every listed variant for every seed into out_dir/<variant>/seed-<n>.
std::vector<AblationRow> ablate(const ExperimentConfig& cfg, const std::vector<std::uint64_t>& seeds,
                                const std::vector<std::string>& variants,
                                const std::filesystem::path& out_dir, std::ostream* log = nullptr);
void write_ablation_csv(const std::vector<AblationRow>& rows, std::ostream& out);

}  // namespace riskdrive
