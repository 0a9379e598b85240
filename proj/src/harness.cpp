#include "riskdrive/harness.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <ostream>
#include <sstream>

#include "riskdrive/errors.hpp"
#include "riskdrive/export.hpp"
#include "riskdrive/ppo.hpp"

namespace riskdrive {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double mean_of(const std::vector<IterationMetrics>& m, std::size_t a, std::size_t b) {
  double s = 0.0;
  for (std::size_t i = a; i < b; ++i) s += m[i].eval_reward;
  return b > a ? s / double(b - a) : kNaN;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

std::string rng_state(const Rng& rng) {
  std::ostringstream ss;
  ss << rng;
  return ss.str();
}

}  // namespace

const std::vector<std::string>& metrics_columns() {
  static const std::vector<std::string> cols{
      "iteration",    "steps",         "episodes",      "collisions",   "gate_overrides",
      "mean_reward",  "mean_episode_reward", "r_safety", "r_stability", "r_efficiency",
      "r_const",      "mean_speed",    "mean_ratio",    "clip_fraction", "value_loss",
      "eval_reward",  "eval_speed",    "eval_collisions", "eval_greedy_reward"};
  return cols;
}

std::string metrics_header() {
  std::string s;
  for (const auto& c : metrics_columns()) {
    if (!s.empty()) s += ',';
    s += c;
  }
  return s;
}

std::string metrics_row(const IterationMetrics& m) {
  std::ostringstream ss;
  ss << m.iteration << ',' << m.steps << ',' << m.episodes << ',' << m.collisions << ','
     << m.gate_overrides;
  for (double v : {m.mean_reward, m.mean_episode_reward, m.r_safety, m.r_stability,
                   m.r_efficiency, m.r_const, m.mean_speed, m.mean_ratio, m.clip_fraction,
                   m.value_loss, m.eval_reward, m.eval_speed}) {
    ss << ',' << format_double(v);
  }
  ss << ',' << m.eval_collisions << ',' << format_double(m.eval_greedy_reward);
  return ss.str();
}

EvalReport summarize(const std::vector<EpisodeStats>& episodes, double wall_time) {
  if (episodes.empty()) throw std::invalid_argument("summarize: no episodes");
  EvalReport r;
  r.episodes = int(episodes.size());
  r.wall_time = wall_time;
  int collisions = 0;
  double reward = 0.0, speed_sum = 0.0;
  long n = 0;
  for (const auto& e : episodes) {
    reward += e.reward;
    collisions += e.collided ? 1 : 0;
    for (double v : e.speeds) speed_sum += v;
    n += long(e.speeds.size());
  }
  r.mean_reward = reward / double(r.episodes);
  r.collision_rate = 100.0 * collisions / double(r.episodes);
  if (n > 0) {
    r.mean_speed = speed_sum / double(n);
    double var = 0.0;
    for (const auto& e : episodes) {
      for (double v : e.speeds) var += (v - r.mean_speed) * (v - r.mean_speed);
    }
    r.speed_variance = var / double(n);
  }
  return r;
}

std::vector<EpisodeStats> run_episodes(const ActorCritic& model, const EnvSettings& settings,
                                       std::uint64_t root_seed, int episodes, bool greedy) {
  std::vector<EpisodeStats> out;
  out.reserve(std::max(episodes, 0));
  Worker worker(root_seed, 0);
  for (int e = 0; e < episodes; ++e) {
    EpisodeStats stats;
    while (true) {
      const AgentStep s = agent_step(worker, model, settings, greedy);
      stats.reward += s.transition.raw_reward;
      stats.speeds.push_back(s.transition.av_speed);
      if (s.transition.done) {
        stats.collided = s.transition.collided;
        break;
      }
    }
    out.push_back(std::move(stats));
  }
  return out;
}

ActorCritic model_from_checkpoint(const Checkpoint& ck) {
  ActorCritic model(ck.config.network_for(Variant::parse(ck.variant)));
  if (model.actor_params.size() != ck.actor_params.size() ||
      model.critic_params.size() != ck.critic_params.size()) {
    throw CompatibilityError("checkpoint parameter counts do not match its network config");
  }
  model.actor_params = ck.actor_params;
  model.critic_params = ck.critic_params;
  return model;
}

EvalReport evaluate(const Checkpoint& ck, int episodes, std::uint64_t seed) {
  if (episodes < 1) throw std::invalid_argument("evaluate: episodes must be >= 1");
  const auto t0 = std::chrono::steady_clock::now();
  const ActorCritic model = model_from_checkpoint(ck);
  const EnvSettings env = ck.config.env_settings(Variant::parse(ck.variant));
  const auto stats = run_episodes(model, env, stream_seed(seed, "eval"), episodes, true);
  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return summarize(stats, wall);
}

TrainResult train(const ExperimentConfig& cfg_in, const Variant& variant, std::uint64_t seed,
                  const TrainOptions& options) {
  ExperimentConfig cfg = cfg_in;
  cfg.finalize();
  const EnvSettings env = cfg.env_settings(variant);
  const PPOConfig& ppo = cfg.ppo;

  ActorCritic model(cfg.network_for(variant));
  {
    Rng actor_rng = make_stream(seed, "init-actor");
    Rng critic_rng = make_stream(seed, "init-critic");
    model.init(actor_rng, critic_rng);
  }
  TrainerState trainer{AdamState::zeros(model.actor_params.size()),
                       AdamState::zeros(model.critic_params.size()),
                       make_stream(seed, "shuffle")};
  std::vector<Worker> workers;
  for (int w = 0; w < ppo.num_workers; ++w) workers.emplace_back(seed, std::uint64_t(w));

  const bool write = !options.out_dir.empty();
  std::ofstream metrics_out;
  if (write) {
    std::filesystem::create_directories(options.out_dir);
    write_text(options.out_dir / "config.json", config_to_json(cfg) + "\n");
    metrics_out.open(options.out_dir / "metrics.csv", std::ios::binary | std::ios::trunc);
    if (!metrics_out) throw std::runtime_error("cannot write metrics.csv");
    metrics_out << metrics_header() << '\n';
  }

  TrainResult result;
  auto make_checkpoint = [&](int iteration) {
    Checkpoint ck;
    ck.config = cfg;
    ck.config_hash = config_hash(cfg);
    ck.variant = variant.name();
    ck.seed = seed;
    ck.iteration = iteration;
    ck.actor_params = model.actor_params;
    ck.critic_params = model.critic_params;
    ck.actor_opt = trainer.actor_opt;
    ck.critic_opt = trainer.critic_opt;
    ck.rng_state = rng_state(trainer.shuffle_rng);
    return ck;
  };

  for (int it = 1; it <= cfg.train.iterations; ++it) {
    const int W = ppo.num_workers;
    std::vector<std::vector<RolloutBuffer>> segs(W);
    std::vector<std::vector<EpisodeSummary>> finished(W);
    std::vector<std::string> errors(W);
#pragma omp parallel for schedule(static, 1)
    for (int w = 0; w < W; ++w) {
      try {
        int quota = ppo.rollout_horizon / W + (w < ppo.rollout_horizon % W ? 1 : 0);
        while (quota > 0) {
          RolloutBuffer b = collect_rollout(workers[w], model, env, quota, &finished[w]);
          quota -= int(b.size());
          compute_gae(b, ppo);
          segs[w].push_back(std::move(b));
        }
      } catch (const std::exception& e) {
        errors[w] = e.what();
      }
    }
    for (const auto& e : errors) {
      if (!e.empty()) throw std::runtime_error("rollout worker failed: " + e);
    }
    std::vector<RolloutBuffer> all;
    for (auto& v : segs) {
      for (auto& b : v) all.push_back(std::move(b));
    }
    const RolloutBuffer merged = merge_segments(std::move(all), ppo);

    IterationMetrics m;
    m.iteration = it;
    m.steps = long(merged.size());
    long overrides = 0;
    for (const auto& t : merged.steps) {
      m.mean_reward += t.reward;
      m.r_safety += t.terms.safety;
      m.r_stability += t.terms.stability;
      m.r_efficiency += t.terms.efficiency;
      m.r_const += t.terms.constant;
      m.mean_speed += t.av_speed;
      overrides += t.overridden ? 1 : 0;
    }
    const double n = double(std::max<std::size_t>(merged.size(), 1));
    m.mean_reward /= n;
    m.r_safety /= n;
    m.r_stability /= n;
    m.r_efficiency /= n;
    m.r_const /= n;
    m.mean_speed /= n;
    m.gate_overrides = overrides;
    double ep_reward = 0.0;
    for (const auto& f : finished) {
      for (const auto& e : f) {
        ++m.episodes;
        m.collisions += e.collided ? 1 : 0;
        ep_reward += e.raw_reward;
      }
    }
    m.mean_episode_reward = m.episodes > 0 ? ep_reward / m.episodes : kNaN;

    const UpdateStats st = ppo_update(model, trainer, merged, ppo, cfg.adam);
    m.mean_ratio = st.mean_ratio;
    m.clip_fraction = st.clip_fraction;
    m.value_loss = st.value_loss;

    m.eval_reward = kNaN;
    m.eval_speed = kNaN;
    m.eval_greedy_reward = kNaN;
    if (cfg.train.eval_episodes > 0) {
      // A near-deterministic argmax hides most of what PPO changes in the
      // sampled policy, so the headline number samples; greedy rides along on
      // the same worlds. Fresh worlds every iteration keep a third-of-run mean
      // from resting on a handful of scenes.
      const std::uint64_t iter_eval_seed =
          stream_seed(seed, "iteration-eval", std::uint64_t(it));
      const auto eval = summarize(
          run_episodes(model, env, iter_eval_seed, cfg.train.eval_episodes, false));
      m.eval_reward = eval.mean_reward;
      m.eval_speed = eval.mean_speed;
      m.eval_collisions =
          int(std::lround(eval.collision_rate * cfg.train.eval_episodes / 100.0));
      m.eval_greedy_reward =
          summarize(run_episodes(model, env, iter_eval_seed, cfg.train.eval_episodes, true))
              .mean_reward;
    }
    result.metrics.push_back(m);
    if (write) {
      metrics_out << metrics_row(m) << '\n';
      metrics_out.flush();
      if (cfg.train.checkpoint_every > 0 && it % cfg.train.checkpoint_every == 0) {
        save_checkpoint(make_checkpoint(it), options.out_dir / "checkpoint.bin");
      }
    }
    if (options.log) {
      *options.log << "iter " << it << "/" << cfg.train.iterations << " reward "
                   << format_double(m.mean_reward) << " eval " << format_double(m.eval_reward)
                   << " collisions " << m.collisions << '\n';
    }
  }

  result.checkpoint = make_checkpoint(cfg.train.iterations);
  const auto t0 = std::chrono::steady_clock::now();
  const auto stats = run_episodes(model, env, stream_seed(seed, "final-eval"),
                                  cfg.train.final_eval_episodes, true);
  result.final_eval = summarize(
      stats, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  for (const auto& w : workers) result.counters += w.counters;

  if (write) {
    save_checkpoint(result.checkpoint, options.out_dir / "checkpoint.bin");
    std::ostringstream ss;
    const EvalReport& r = result.final_eval;
    ss << "metric,value\n"
       << "episodes," << r.episodes << '\n'
       << "mean_reward," << format_double(r.mean_reward) << '\n'
       << "mean_speed," << format_double(r.mean_speed) << '\n'
       << "speed_variance," << format_double(r.speed_variance) << '\n'
       << "collision_rate," << format_double(r.collision_rate) << '\n';
    write_text(options.out_dir / "final_eval.csv", ss.str());
  }
  return result;
}

double first_third_eval_reward(const std::vector<IterationMetrics>& m) {
  const std::size_t k = m.size() / 3;
  return mean_of(m, 0, std::max<std::size_t>(k, 1));
}

double final_third_eval_reward(const std::vector<IterationMetrics>& m) {
  const std::size_t k = m.size() / 3;
  return mean_of(m, m.size() - std::max<std::size_t>(k, 1), m.size());
}

const std::vector<std::string>& ablation_metrics() {
  static const std::vector<std::string> names{"mean_reward", "mean_speed", "speed_variance",
                                              "collision_rate", "final_third_eval_reward"};
  return names;
}

std::vector<AblationRow> ablate(const ExperimentConfig& cfg, const std::vector<std::uint64_t>& seeds,
                                const std::vector<std::string>& variants,
                                const std::filesystem::path& out_dir, std::ostream* log) {
  if (seeds.empty()) throw std::invalid_argument("ablate: at least one seed is required");
  std::vector<Variant> parsed;
  for (const auto& v : variants) parsed.push_back(Variant::parse(v));
  std::vector<AblationRow> rows;
  for (const auto& v : parsed) {
    for (std::uint64_t seed : seeds) {
      TrainOptions opt;
      if (!out_dir.empty()) opt.out_dir = out_dir / v.name() / ("seed-" + std::to_string(seed));
      if (log) *log << "== " << v.name() << " seed " << seed << '\n';
      const TrainResult r = train(cfg, v, seed, opt);
      const EvalReport& e = r.final_eval;
      const double values[] = {e.mean_reward, e.mean_speed, e.speed_variance, e.collision_rate,
                               final_third_eval_reward(r.metrics)};
      for (std::size_t k = 0; k < ablation_metrics().size(); ++k) {
        rows.push_back({v.name(), seed, ablation_metrics()[k], values[k]});
      }
    }
  }
  return rows;
}

void write_ablation_csv(const std::vector<AblationRow>& rows, std::ostream& out) {
  out << "variant,seed,metric,value\n";
  for (const auto& r : rows) {
    out << r.variant << ',' << r.seed << ',' << r.metric << ',' << format_double(r.value) << '\n';
  }
}

}  // namespace riskdrive
