#include "riskdrive/ppo.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "riskdrive/errors.hpp"

namespace riskdrive {

void PPOConfig::validate() const {
  if (!(gamma_d > 0.0 && gamma_d <= 1.0)) throw ConfigError("ppo.gamma_d", "must lie in (0, 1]");
  if (!(lambda_gae >= 0.0 && lambda_gae <= 1.0)) {
    throw ConfigError("ppo.lambda_gae", "must lie in [0, 1]");
  }
  if (!(clip_eps > 0.0 && clip_eps < 1.0)) throw ConfigError("ppo.clip_eps", "must lie in (0, 1)");
  if (epochs_per_update < 1) throw ConfigError("ppo.epochs_per_update", "must be >= 1");
  if (minibatch_size < 1) throw ConfigError("ppo.minibatch_size", "must be >= 1");
  if (!(value_loss_weight >= 0.0)) throw ConfigError("ppo.value_loss_weight", "must be >= 0");
  if (rollout_horizon < 1) throw ConfigError("ppo.rollout_horizon", "must be >= 1");
  if (!(entropy_coef >= 0.0)) throw ConfigError("ppo.entropy_coef", "must be >= 0");
  if (num_workers < 1) throw ConfigError("ppo.num_workers", "must be >= 1");
  if (rollout_horizon < num_workers) {
    throw ConfigError("ppo.num_workers", "must not exceed rollout_horizon");
  }
}

void compute_gae(std::span<const double> rewards, std::span<const double> values,
                 std::span<const std::uint8_t> dones, double last_value, double gamma,
                 double lambda, std::span<double> advantages, std::span<double> returns) {
  const std::size_t n = rewards.size();
  if (values.size() != n || dones.size() != n || advantages.size() != n || returns.size() != n) {
    throw DimensionError("compute_gae: length mismatch");
  }
  double next_adv = 0.0;
  double next_value = last_value;
  for (std::size_t k = n; k-- > 0;) {
    const double live = dones[k] ? 0.0 : 1.0;
    const double delta = rewards[k] + gamma * next_value * live - values[k];
    next_adv = delta + gamma * lambda * live * next_adv;
    advantages[k] = next_adv;
    returns[k] = next_adv + values[k];
    next_value = values[k];
  }
}

void compute_gae(RolloutBuffer& buffer, const PPOConfig& cfg) {
  const std::size_t n = buffer.size();
  std::vector<double> r(n), v(n);
  std::vector<std::uint8_t> d(n);
  for (std::size_t i = 0; i < n; ++i) {
    r[i] = buffer.steps[i].reward;
    v[i] = buffer.steps[i].value;
    d[i] = buffer.steps[i].done ? 1 : 0;
    if (cfg.bootstrap_truncated && buffer.steps[i].truncated) {
      r[i] += cfg.gamma_d * buffer.steps[i].bootstrap_value;
    }
  }
  buffer.advantages.assign(n, 0.0);
  buffer.returns.assign(n, 0.0);
  compute_gae(r, v, d, buffer.last_value, cfg.gamma_d, cfg.lambda_gae, buffer.advantages,
              buffer.returns);
  buffer.finalized = true;
}

void normalize_in_place(std::span<double> values) {
  if (values.empty()) return;
  const double n = double(values.size());
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  double var = 0.0;
  for (double x : values) var += (x - mean) * (x - mean);
  var /= n;
  const double sd = std::sqrt(var);
  for (double& x : values) x = sd > 0.0 ? (x - mean) / sd : x - mean;
}

double clipped_objective(double ratio, double advantage, double clip_eps) {
  const double clipped = std::clamp(ratio, 1.0 - clip_eps, 1.0 + clip_eps);
  return std::min(ratio * advantage, clipped * advantage);
}

double clipped_objective_grad(double ratio, double advantage, double clip_eps) {
  const double clipped = std::clamp(ratio, 1.0 - clip_eps, 1.0 + clip_eps);
  // Ties go to the unclipped branch; they only occur inside the band.
  return ratio * advantage <= clipped * advantage ? advantage : 0.0;
}

RolloutBuffer merge_segments(std::vector<RolloutBuffer> segments, const PPOConfig& cfg) {
  RolloutBuffer out;
  for (auto& s : segments) {
    if (!s.finalized) throw LifecycleError("merge_segments: segment without advantages");
    for (auto& t : s.steps) out.steps.push_back(std::move(t));
    out.advantages.insert(out.advantages.end(), s.advantages.begin(), s.advantages.end());
    out.returns.insert(out.returns.end(), s.returns.begin(), s.returns.end());
  }
  if (cfg.normalize_advantages) normalize_in_place(out.advantages);
  out.finalized = true;
  return out;
}

Worker::Worker(std::uint64_t root, std::uint64_t index)
    : root_seed(root),
      worker_index(index),
      policy_rng(make_stream(root, "policy", index)) {}

namespace {

int pick_action(const std::array<double, kActionCount>& probs, bool greedy, Rng& rng) {
  if (greedy) {
    int best = 0;
    for (int a = 1; a < kActionCount; ++a) {
      if (probs[a] > probs[best]) best = a;
    }
    return best;
  }
  const double u = uniform(rng, 0.0, 1.0);
  double acc = 0.0;
  int last_legal = 0;
  for (int a = 0; a < kActionCount; ++a) {
    if (probs[a] <= 0.0) continue;
    last_legal = a;
    acc += probs[a];
    if (u < acc) return a;
  }
  return last_legal;
}

double safe_log(double p) { return std::log(std::max(p, 1e-300)); }

}  // namespace

AgentStep agent_step(Worker& worker, const ActorCritic& model, const EnvSettings& settings,
                     bool greedy) {
  if (worker.needs_reset) {
    const std::uint64_t episode = (worker.worker_index << 32) | worker.episodes_started;
    worker.world = reset(settings.scenario, stream_seed(worker.root_seed, "episode", episode));
    ++worker.episodes_started;
    worker.actor_h = RecurrentState::zeros(model.actor.hidden_size());
    worker.critic_h = RecurrentState::zeros(model.critic.hidden_size());
    worker.episode_raw_reward = 0.0;
    worker.needs_reset = false;
  }

  AgentStep out;
  Transition& t = out.transition;
  t.obs = make_observation(worker.world, settings, &worker.counters);
  t.mask = legal_actions(worker.world);
  t.actor_h = worker.actor_h.hidden;
  t.critic_h = worker.critic_h.hidden;

  const NetCache ac = model.actor.forward(model.actor_params, t.obs, {}, t.actor_h);
  t.behavior_probs = masked_softmax(ac.output, t.mask);
  std::span<const double> extra;
  if (model.critic.extra_inputs() > 0) extra = t.behavior_probs;
  const NetCache cc = model.critic.forward(model.critic_params, t.obs, extra, t.critic_h);
  if (model.config.attention) worker.counters.attention_passes += 2;
  t.value = cc.output[0];

  t.proposed_action = pick_action(t.behavior_probs, greedy, worker.policy_rng);
  Action executed = action_from_index(t.proposed_action);
  if (settings.variant.safety_filter) {
    ++worker.counters.gate_calls;
    const GateDecision d = gate_action(worker.world, executed, settings.safety);
    executed = d.action;
    t.overridden = d.was_overridden;
    if (d.was_overridden) ++worker.counters.gate_overrides;
  }
  t.executed_action = action_index(executed);
  t.action = settings.safety.credit_proposed ? t.proposed_action : t.executed_action;
  t.log_prob = safe_log(t.behavior_probs[t.action]);

  out.outcome = step(worker.world, executed);
  const RewardStep r = shape_reward(out.outcome, worker.reward_state, settings, &worker.counters);
  t.reward = r.stored;
  t.raw_reward = r.raw;
  t.terms = r.terms;
  t.av_speed = out.outcome.av_speed;
  t.collided = out.outcome.collided;
  t.done = out.outcome.done;

  worker.actor_h.hidden = ac.h_next;
  worker.critic_h.hidden = cc.h_next;
  if (t.done && out.outcome.done_reason == DoneReason::horizon) {
    // Uncounted: this observation is only used for the value bootstrap.
    const Tensor3 obs = make_observation(worker.world, settings);
    std::array<double, kActionCount> probs{};
    std::span<const double> next_extra;
    if (model.critic.extra_inputs() > 0) {
      const NetCache na = model.actor.forward(model.actor_params, obs, {}, ac.h_next);
      probs = masked_softmax(na.output, legal_actions(worker.world));
      next_extra = probs;
    }
    t.truncated = true;
    t.bootstrap_value =
        model.critic.forward(model.critic_params, obs, next_extra, cc.h_next).output[0];
  }
  worker.episode_raw_reward += r.raw;
  if (t.done) worker.needs_reset = true;
  return out;
}

RolloutBuffer collect_rollout(Worker& worker, const ActorCritic& model,
                              const EnvSettings& settings, int max_steps,
                              std::vector<EpisodeSummary>* finished) {
  RolloutBuffer buf;
  buf.steps.reserve(std::max(max_steps, 0));
  int episode_steps = int(worker.world.step_count);
  if (worker.needs_reset) episode_steps = 0;
  for (int i = 0; i < max_steps; ++i) {
    AgentStep s = agent_step(worker, model, settings, false);
    episode_steps = s.outcome.next_state.step_count;
    const bool done = s.transition.done;
    const bool collided = s.transition.collided;
    buf.steps.push_back(std::move(s.transition));
    if (done) {
      if (finished) finished->push_back({worker.episode_raw_reward, episode_steps, collided});
      break;
    }
  }
  buf.last_value = 0.0;
  if (!buf.steps.empty() && !buf.steps.back().done) {
    const Tensor3 obs = make_observation(worker.world, settings);
    const auto mask = legal_actions(worker.world);
    const NetCache ac =
        model.actor.forward(model.actor_params, obs, {}, worker.actor_h.hidden);
    const auto probs = masked_softmax(ac.output, mask);
    std::span<const double> extra;
    if (model.critic.extra_inputs() > 0) extra = probs;
    buf.last_value =
        model.critic.forward(model.critic_params, obs, extra, worker.critic_h.hidden).output[0];
  }
  return buf;
}

void accumulate_gradients(const ActorCritic& model, const RolloutBuffer& merged,
                          std::span<const std::size_t> indices, const PPOConfig& cfg,
                          double scale, std::span<double> d_actor, std::span<double> d_critic,
                          UpdateStats& stats) {
  for (std::size_t idx : indices) {
    const Transition& t = merged.steps[idx];
    const double adv = merged.advantages[idx];
    const double ret = merged.returns[idx];

    const NetCache ac = model.actor.forward(model.actor_params, t.obs, {}, t.actor_h);
    const auto probs = masked_softmax(ac.output, t.mask);
    const double logp = safe_log(probs[t.action]);
    const double ratio = std::exp(logp - t.log_prob);
    const double obj = clipped_objective(ratio, adv, cfg.clip_eps);
    const double dobj = clipped_objective_grad(ratio, adv, cfg.clip_eps);
    const double ent = masked_entropy(probs);

    std::array<double, kActionCount> d_logits{};
    for (int j = 0; j < kActionCount; ++j) {
      if (!t.mask[j]) continue;
      const double dlogp = (j == t.action ? 1.0 : 0.0) - probs[j];
      double g = -dobj * ratio * dlogp;
      if (cfg.entropy_coef > 0.0 && probs[j] > 0.0) {
        const double dent = -probs[j] * (safe_log(probs[j]) + ent);
        g -= cfg.entropy_coef * dent;
      }
      d_logits[j] = scale * g;
    }
    model.actor.backward(model.actor_params, ac, d_logits, {}, d_actor);

    std::span<const double> extra;
    if (model.critic.extra_inputs() > 0) extra = t.behavior_probs;
    const NetCache cc = model.critic.forward(model.critic_params, t.obs, extra, t.critic_h);
    const double err = cc.output[0] - ret;
    const double d_value = scale * cfg.value_loss_weight * 2.0 * err;
    model.critic.backward(model.critic_params, cc, std::span<const double>(&d_value, 1), {},
                          d_critic);

    if (!std::isfinite(obj) || !std::isfinite(err)) {
      throw NonFiniteError("non-finite loss at buffer index " + std::to_string(idx) +
                           " (ratio " + std::to_string(ratio) + ", value error " +
                           std::to_string(err) + ")");
    }
    stats.mean_ratio += ratio;
    stats.clip_fraction += std::abs(ratio - 1.0) > cfg.clip_eps ? 1.0 : 0.0;
    stats.value_loss += err * err;
    stats.policy_objective += obj;
    stats.entropy += ent;
  }
}

UpdateStats ppo_update(ActorCritic& model, TrainerState& trainer, const RolloutBuffer& merged,
                       const PPOConfig& cfg, const AdamConfig& adam) {
  if (!merged.finalized) throw LifecycleError("ppo_update: buffer has no advantages");
  const std::size_t n = merged.size();
  UpdateStats total;
  if (n == 0) return total;
  if (trainer.actor_opt.m.size() != model.actor_params.size()) {
    trainer.actor_opt = AdamState::zeros(model.actor_params.size());
  }
  if (trainer.critic_opt.m.size() != model.critic_params.size()) {
    trainer.critic_opt = AdamState::zeros(model.critic_params.size());
  }

  constexpr std::size_t kChunk = 8;
  const std::size_t na = model.actor_params.size();
  const std::size_t nc = model.critic_params.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::size_t samples = 0;

  for (int epoch = 0; epoch < cfg.epochs_per_update; ++epoch) {
    std::shuffle(order.begin(), order.end(), trainer.shuffle_rng);
    for (std::size_t start = 0; start < n; start += std::size_t(cfg.minibatch_size)) {
      const std::size_t stop = std::min(n, start + std::size_t(cfg.minibatch_size));
      const std::size_t len = stop - start;
      const double scale = 1.0 / double(len);
      const std::size_t chunks = (len + kChunk - 1) / kChunk;
      std::vector<std::vector<double>> ga(chunks), gc(chunks);
      std::vector<UpdateStats> cs(chunks);
      std::vector<std::string> errors(chunks);

      // Each chunk owns its gradient buffers; the reduction below runs in
      // chunk order, so the sum is independent of the thread count.
#pragma omp parallel for schedule(dynamic, 1)
      for (long c = 0; c < long(chunks); ++c) {
        const std::size_t a = start + std::size_t(c) * kChunk;
        const std::size_t b = std::min(stop, a + kChunk);
        ga[c].assign(na, 0.0);
        gc[c].assign(nc, 0.0);
        try {
          accumulate_gradients(model, merged,
                               std::span<const std::size_t>(order.data() + a, b - a), cfg,
                               scale, ga[c], gc[c], cs[c]);
        } catch (const std::exception& e) {
          errors[c] = e.what();
        }
      }
      for (const auto& e : errors) {
        if (!e.empty()) throw NonFiniteError(e);
      }

      std::vector<double> d_actor = std::move(ga[0]);
      std::vector<double> d_critic = std::move(gc[0]);
      for (std::size_t c = 1; c < chunks; ++c) {
        for (std::size_t i = 0; i < na; ++i) d_actor[i] += ga[c][i];
        for (std::size_t i = 0; i < nc; ++i) d_critic[i] += gc[c][i];
      }
      const double norm = clip_global_norm(d_actor, d_critic, cfg.max_grad_norm);
      if (!std::isfinite(norm)) throw NonFiniteError("non-finite gradient norm");

      adam_step(model.actor_params, d_actor, trainer.actor_opt, adam);
      adam_step(model.critic_params, d_critic, trainer.critic_opt, adam);

      for (const auto& s : cs) {
        total.mean_ratio += s.mean_ratio;
        total.clip_fraction += s.clip_fraction;
        total.value_loss += s.value_loss;
        total.policy_objective += s.policy_objective;
        total.entropy += s.entropy;
      }
      samples += len;
      ++total.minibatches;
    }
  }
  const double k = double(samples);
  total.mean_ratio /= k;
  total.clip_fraction /= k;
  total.value_loss /= k;
  total.policy_objective /= k;
  total.entropy /= k;
  return total;
}

}  // namespace riskdrive
