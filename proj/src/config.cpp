#include "riskdrive/config.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "riskdrive/errors.hpp"

namespace riskdrive {

using nlohmann::json;

namespace {

// Reads fields of one JSON object and rejects keys nobody asked for.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_, "expected an object");
  }

  std::string field(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

  bool has(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key);
  }

  void get(const std::string& key, double& out) {
    if (!has(key)) return;
    const json& v = j_.at(key);
    if (!v.is_number()) throw ConfigError(field(key), "expected a number");
    out = v.get<double>();
  }

  void get(const std::string& key, int& out) {
    if (!has(key)) return;
    const json& v = j_.at(key);
    if (!v.is_number_integer()) throw ConfigError(field(key), "expected an integer");
    const auto x = v.get<long long>();
    if (x < -2147483647LL || x > 2147483647LL) throw ConfigError(field(key), "out of range");
    out = int(x);
  }

  void get(const std::string& key, bool& out) {
    if (!has(key)) return;
    const json& v = j_.at(key);
    if (!v.is_boolean()) throw ConfigError(field(key), "expected true or false");
    out = v.get<bool>();
  }

  void get(const std::string& key, std::string& out) {
    if (!has(key)) return;
    const json& v = j_.at(key);
    if (!v.is_string()) throw ConfigError(field(key), "expected a string");
    out = v.get<std::string>();
  }

  void get(const std::string& key, Range& out) {
    if (!has(key)) return;
    const json& v = j_.at(key);
    if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number()) {
      throw ConfigError(field(key), "expected [lo, hi]");
    }
    out = {v[0].get<double>(), v[1].get<double>()};
  }

  const json* child(const std::string& key) {
    if (!has(key)) return nullptr;
    return &j_.at(key);
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) throw ConfigError(field(it.key()), "unknown key");
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

void read_idm(const json& j, const std::string& path, IdmParams& p) {
  Section s(j, path);
  s.get("max_accel", p.max_accel);
  s.get("comfort_decel", p.comfort_decel);
  s.get("max_decel", p.max_decel);
  s.get("min_gap", p.min_gap);
  s.get("time_headway", p.time_headway);
  s.get("exponent", p.exponent);
  s.finish();
}

void read_scenario(const json& j, ScenarioConfig& c) {
  Section s(j, "scenario");
  s.get("lane_count", c.lane_count);
  s.get("lane_width", c.lane_width);
  s.get("road_length", c.road_length);
  s.get("hdv_count", c.hdv_count);
  s.get("hdv_count_max", c.hdv_count_max);
  s.get("av_speed_range", c.av_speed_range);
  s.get("hdv_speed_range", c.hdv_speed_range);
  s.get("hdv_spawn_gap_range", c.hdv_spawn_gap_range);
  s.get("max_speed", c.max_speed);
  s.get("dt", c.dt);
  s.get("max_steps", c.max_steps);
  s.get("vehicle_length", c.vehicle_length);
  s.get("vehicle_width", c.vehicle_width);
  s.get("speed_step", c.speed_step);
  s.get("lane_change_duration", c.lane_change_duration);
  s.get("hdv_lane_change_prob", c.hdv_lane_change_prob);
  s.get("sensing_range", c.sensing_range);
  if (const json* idm = s.child("idm")) read_idm(*idm, "scenario.idm", c.idm);
  s.finish();
}

void read_risk(const json& j, const std::string& path, RiskParams& p) {
  Section s(j, path);
  s.get("xi_x", p.xi_x);
  s.get("xi_y", p.xi_y);
  s.get("xi_v", p.xi_v);
  s.get("rho", p.rho);
  s.get("lambda_d", p.lambda_d);
  s.get("eps_obs", p.eps_obs);
  s.get("eps_hdv", p.eps_hdv);
  s.get("sigma_l", p.sigma_l);
  s.get("w_s", p.w_s);
  s.get("w_d", p.w_d);
  s.finish();
}

void read_grid(const json& j, const std::string& path, GridSpec& g) {
  Section s(j, path);
  s.get("width_cells", g.width_cells);
  s.get("height_cells", g.height_cells);
  s.get("cell_size", g.cell_size);
  s.get("origin_x", g.origin_x);
  s.get("origin_y", g.origin_y);
  s.finish();
}

void read_safety(const json& j, const std::string& path, SafetyConfig& c, bool allow_duration) {
  Section s(j, path);
  s.get("r_safe", c.r_safe);
  s.get("sample_count", c.sample_count);
  s.get("min_keep_gap", c.min_keep_gap);
  s.get("credit_proposed", c.credit_proposed);
  if (allow_duration) s.get("lane_change_duration", c.lane_change_duration);
  std::string profile = c.profile == LateralProfile::verbatim ? "verbatim" : "smoothstep";
  s.get("profile", profile);
  if (profile == "verbatim") {
    c.profile = LateralProfile::verbatim;
  } else if (profile == "smoothstep") {
    c.profile = LateralProfile::smoothstep;
  } else {
    throw ConfigError(s.field("profile"), "expected \"smoothstep\" or \"verbatim\"");
  }
  s.finish();
}

void read_reward(const json& j, RewardConfig& c) {
  Section s(j, "reward");
  s.get("w_safety", c.w_safety);
  s.get("w_stability", c.w_stability);
  s.get("w_efficiency", c.w_efficiency);
  s.get("r_const", c.r_const);
  s.get("ema_rate", c.ema_rate);
  s.get("gamma_b_min", c.gamma_b_min);
  s.get("gamma_b_max", c.gamma_b_max);
  s.get("risk_to_gamma_scale", c.risk_to_gamma_scale);
  std::string form = c.history_form == HistoryForm::ema ? "ema" : "mean";
  s.get("history_form", form);
  if (form == "ema") {
    c.history_form = HistoryForm::ema;
  } else if (form == "mean") {
    c.history_form = HistoryForm::mean;
  } else {
    throw ConfigError("reward.history_form", "expected \"ema\" or \"mean\"");
  }
  s.get("store_balanced", c.store_balanced);
  s.finish();
}

void read_conv(const json& j, const std::string& path, ConvSpec& c) {
  Section s(j, path);
  s.get("out_channels", c.out_channels);
  s.get("kernel", c.kernel);
  s.finish();
}

void read_network(const json& j, NetworkConfig& c) {
  Section s(j, "network");
  if (const json* v = s.child("conv1")) read_conv(*v, "network.conv1", c.conv1);
  if (const json* v = s.child("conv2")) read_conv(*v, "network.conv2", c.conv2);
  s.get("mlp_hidden", c.mlp_hidden);
  s.get("hidden_size", c.hidden_size);
  s.get("spatial_channels", c.spatial_channels);
  s.get("spatial_kernel", c.spatial_kernel);
  s.get("critic_uses_policy", c.critic_uses_policy);
  s.finish();
}

void read_ppo(const json& j, PPOConfig& c) {
  Section s(j, "ppo");
  s.get("gamma_d", c.gamma_d);
  s.get("lambda_gae", c.lambda_gae);
  s.get("clip_eps", c.clip_eps);
  s.get("epochs_per_update", c.epochs_per_update);
  s.get("minibatch_size", c.minibatch_size);
  s.get("value_loss_weight", c.value_loss_weight);
  s.get("rollout_horizon", c.rollout_horizon);
  s.get("normalize_advantages", c.normalize_advantages);
  s.get("bootstrap_truncated", c.bootstrap_truncated);
  s.get("entropy_coef", c.entropy_coef);
  s.get("max_grad_norm", c.max_grad_norm);
  s.get("num_workers", c.num_workers);
  s.finish();
}

void read_adam(const json& j, AdamConfig& c) {
  Section s(j, "adam");
  s.get("lr", c.lr);
  s.get("beta1", c.beta1);
  s.get("beta2", c.beta2);
  s.get("eps", c.eps);
  s.finish();
}

void read_train(const json& j, TrainSettings& c) {
  Section s(j, "train");
  s.get("iterations", c.iterations);
  s.get("eval_episodes", c.eval_episodes);
  s.get("checkpoint_every", c.checkpoint_every);
  s.get("final_eval_episodes", c.final_eval_episodes);
  s.finish();
}

json parse_json(std::string_view text, const std::string& source) {
  try {
    return json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    const std::size_t byte = std::min<std::size_t>(e.byte, text.size());
    const long line = 1 + std::count(text.begin(), text.begin() + long(byte > 0 ? byte - 1 : 0), '\n');
    std::string what = e.what();
    const auto colon = what.find("parse error");
    if (colon != std::string::npos) what = what.substr(colon);
    throw ConfigError(source + ":" + std::to_string(line), what);
  }
}

json range_json(const Range& r) { return json::array({r.lo, r.hi}); }

json risk_json(const RiskParams& p) {
  return {{"xi_x", p.xi_x},       {"xi_y", p.xi_y},       {"xi_v", p.xi_v},
          {"rho", p.rho},         {"lambda_d", p.lambda_d}, {"eps_obs", p.eps_obs},
          {"eps_hdv", p.eps_hdv}, {"sigma_l", p.sigma_l}, {"w_s", p.w_s},
          {"w_d", p.w_d}};
}

}  // namespace

void TrainSettings::validate() const {
  if (iterations < 1) throw ConfigError("train.iterations", "must be >= 1");
  if (eval_episodes < 0) throw ConfigError("train.eval_episodes", "must be >= 0");
  if (checkpoint_every < 0) throw ConfigError("train.checkpoint_every", "must be >= 0");
  if (final_eval_episodes < 1) throw ConfigError("train.final_eval_episodes", "must be >= 1");
}

void ExperimentConfig::finalize() {
  network.height = grid.height_cells;
  network.width = grid.width_cells;
  network.conv1.in_channels = kObservationChannels;
  network.conv2.in_channels = network.conv1.out_channels;
  safety.risk = risk;
  safety.lane_change_duration = scenario.lane_change_duration;
  validate();
}

void ExperimentConfig::validate() const {
  scenario.validate();
  risk.validate();
  grid.validate();
  safety.validate();
  reward.validate();
  network.validate();
  ppo.validate();
  train.validate();
  if (!(adam.lr > 0.0)) throw ConfigError("adam.lr", "must be positive");
  if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0)) throw ConfigError("adam.beta1", "must lie in [0, 1)");
  if (!(adam.beta2 >= 0.0 && adam.beta2 < 1.0)) throw ConfigError("adam.beta2", "must lie in [0, 1)");
  if (!(adam.eps > 0.0)) throw ConfigError("adam.eps", "must be positive");
  if (network.height != grid.height_cells || network.width != grid.width_cells ||
      network.in_channels() != kObservationChannels) {
    throw ConfigError("network", "input shape does not match the observation grid");
  }
}

EnvSettings ExperimentConfig::env_settings(const Variant& v) const {
  EnvSettings e;
  e.scenario = scenario;
  e.risk = risk;
  e.grid = grid;
  e.safety = safety;
  e.reward = reward;
  e.variant = v;
  return e;
}

NetworkConfig ExperimentConfig::network_for(const Variant& v) const {
  NetworkConfig n = network;
  n.attention = v.attention;
  return n;
}

ExperimentConfig parse_config(std::string_view text, const std::string& source) {
  const json root = parse_json(text, source);
  ExperimentConfig c;
  Section s(root, "");
  if (const json* v = s.child("scenario")) read_scenario(*v, c.scenario);
  if (const json* v = s.child("risk")) read_risk(*v, "risk", c.risk);
  if (const json* v = s.child("grid")) read_grid(*v, "grid", c.grid);
  if (const json* v = s.child("safety")) read_safety(*v, "safety", c.safety, false);
  if (const json* v = s.child("reward")) read_reward(*v, c.reward);
  if (const json* v = s.child("network")) read_network(*v, c.network);
  if (const json* v = s.child("ppo")) read_ppo(*v, c.ppo);
  if (const json* v = s.child("adam")) read_adam(*v, c.adam);
  if (const json* v = s.child("train")) read_train(*v, c.train);
  s.finish();
  c.finalize();
  return c;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(path.string(), "cannot open file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  return parse_config(read_text_file(path), path.string());
}

std::string config_to_json(const ExperimentConfig& c) {
  const ScenarioConfig& sc = c.scenario;
  json j;
  j["scenario"] = {{"lane_count", sc.lane_count},
                   {"lane_width", sc.lane_width},
                   {"road_length", sc.road_length},
                   {"hdv_count", sc.hdv_count},
                   {"hdv_count_max", sc.hdv_count_max},
                   {"av_speed_range", range_json(sc.av_speed_range)},
                   {"hdv_speed_range", range_json(sc.hdv_speed_range)},
                   {"hdv_spawn_gap_range", range_json(sc.hdv_spawn_gap_range)},
                   {"max_speed", sc.max_speed},
                   {"dt", sc.dt},
                   {"max_steps", sc.max_steps},
                   {"vehicle_length", sc.vehicle_length},
                   {"vehicle_width", sc.vehicle_width},
                   {"speed_step", sc.speed_step},
                   {"lane_change_duration", sc.lane_change_duration},
                   {"hdv_lane_change_prob", sc.hdv_lane_change_prob},
                   {"sensing_range", sc.sensing_range},
                   {"idm",
                    {{"max_accel", sc.idm.max_accel},
                     {"comfort_decel", sc.idm.comfort_decel},
                     {"max_decel", sc.idm.max_decel},
                     {"min_gap", sc.idm.min_gap},
                     {"time_headway", sc.idm.time_headway},
                     {"exponent", sc.idm.exponent}}}};
  j["risk"] = risk_json(c.risk);
  j["grid"] = {{"width_cells", c.grid.width_cells},   {"height_cells", c.grid.height_cells},
               {"cell_size", c.grid.cell_size},       {"origin_x", c.grid.origin_x},
               {"origin_y", c.grid.origin_y}};
  j["safety"] = {{"r_safe", c.safety.r_safe},
                 {"sample_count", c.safety.sample_count},
                 {"min_keep_gap", c.safety.min_keep_gap},
                 {"credit_proposed", c.safety.credit_proposed},
                 {"profile", c.safety.profile == LateralProfile::verbatim ? "verbatim"
                                                                          : "smoothstep"}};
  const RewardConfig& r = c.reward;
  j["reward"] = {{"w_safety", r.w_safety},
                 {"w_stability", r.w_stability},
                 {"w_efficiency", r.w_efficiency},
                 {"r_const", r.r_const},
                 {"ema_rate", r.ema_rate},
                 {"gamma_b_min", r.gamma_b_min},
                 {"gamma_b_max", r.gamma_b_max},
                 {"risk_to_gamma_scale", r.risk_to_gamma_scale},
                 {"history_form", r.history_form == HistoryForm::ema ? "ema" : "mean"},
                 {"store_balanced", r.store_balanced}};
  const NetworkConfig& n = c.network;
  j["network"] = {
      {"conv1", {{"out_channels", n.conv1.out_channels}, {"kernel", n.conv1.kernel}}},
      {"conv2", {{"out_channels", n.conv2.out_channels}, {"kernel", n.conv2.kernel}}},
      {"mlp_hidden", n.mlp_hidden},
      {"hidden_size", n.hidden_size},
      {"spatial_channels", n.spatial_channels},
      {"spatial_kernel", n.spatial_kernel},
      {"critic_uses_policy", n.critic_uses_policy}};
  const PPOConfig& p = c.ppo;
  j["ppo"] = {{"gamma_d", p.gamma_d},
              {"lambda_gae", p.lambda_gae},
              {"clip_eps", p.clip_eps},
              {"epochs_per_update", p.epochs_per_update},
              {"minibatch_size", p.minibatch_size},
              {"value_loss_weight", p.value_loss_weight},
              {"rollout_horizon", p.rollout_horizon},
              {"normalize_advantages", p.normalize_advantages},
              {"bootstrap_truncated", p.bootstrap_truncated},
              {"entropy_coef", p.entropy_coef},
              {"max_grad_norm", p.max_grad_norm},
              {"num_workers", p.num_workers}};
  j["adam"] = {{"lr", c.adam.lr}, {"beta1", c.adam.beta1}, {"beta2", c.adam.beta2},
               {"eps", c.adam.eps}};
  j["train"] = {{"iterations", c.train.iterations},
                {"eval_episodes", c.train.eval_episodes},
                {"checkpoint_every", c.train.checkpoint_every},
                {"final_eval_episodes", c.train.final_eval_episodes}};
  return j.dump(2);
}

std::uint64_t config_hash(const ExperimentConfig& cfg) { return fnv1a64(config_to_json(cfg)); }

World Scene::world() const {
  World w;
  w.config = road;
  w.av = av;
  w.hdvs = hdvs;
  w.hdv_maneuvers.assign(hdvs.size(), Maneuver{});
  for (const auto& h : hdvs) w.hdv_desired_speed.push_back(h.v);
  w.rng = make_stream(road.seed, "world");
  return w;
}

Scene parse_scene(std::string_view text, const std::string& source) {
  const json root = parse_json(text, source);
  Scene scene;
  Section s(root, "");
  s.get("lane_count", scene.road.lane_count);
  s.get("lane_width", scene.road.lane_width);
  s.get("road_length", scene.road.road_length);
  s.get("max_speed", scene.road.max_speed);
  if (const json* v = s.child("risk")) read_risk(*v, "risk", scene.risk);
  if (const json* v = s.child("safety")) read_safety(*v, "safety", scene.safety, true);
  if (const json* v = s.child("grid")) read_grid(*v, "grid", scene.grid);

  const json* vehicles = s.child("vehicles");
  if (vehicles == nullptr || !vehicles->is_array()) {
    throw ConfigError("vehicles", "expected an array of vehicle records");
  }
  s.finish();
  if (scene.road.lane_count < 1) throw ConfigError("lane_count", "must be >= 1");
  if (!(scene.road.lane_width > 0.0)) throw ConfigError("lane_width", "must be positive");

  int av_count = 0;
  for (std::size_t i = 0; i < vehicles->size(); ++i) {
    const std::string path = "vehicles[" + std::to_string(i) + "]";
    Section vs((*vehicles)[i], path);
    VehicleState v;
    v.lane = -1;
    double y = std::numeric_limits<double>::quiet_NaN();
    if (!vs.has("x")) throw ConfigError(path + ".x", "required");
    vs.get("x", v.x);
    vs.get("y", y);
    vs.get("lane", v.lane);
    vs.get("v", v.v);
    vs.get("heading", v.heading);
    vs.get("length", v.length);
    vs.get("width", v.width);
    vs.get("is_av", v.is_av);
    vs.finish();
    if (v.lane < 0 && std::isnan(y)) throw ConfigError(path, "needs lane or y");
    if (std::isnan(y)) y = scene.road.lane_center(v.lane);
    if (v.lane < 0) v.lane = std::clamp(int(std::floor(y / scene.road.lane_width)), 0,
                                        scene.road.lane_count - 1);
    if (v.lane >= scene.road.lane_count) throw ConfigError(path + ".lane", "no such lane");
    if (!(v.length > 0.0) || !(v.width > 0.0)) {
      throw ConfigError(path, "length and width must be positive");
    }
    if (!(v.v >= 0.0)) throw ConfigError(path + ".v", "must be >= 0");
    v.y = y;
    if (v.is_av) {
      scene.av = v;
      ++av_count;
    } else {
      scene.hdvs.push_back(v);
    }
  }
  if (av_count != 1) throw ConfigError("vehicles", "exactly one record needs \"is_av\": true");
  scene.safety.risk = scene.risk;
  scene.risk.validate();
  scene.grid.validate();
  scene.safety.validate();
  return scene;
}

Scene load_scene(const std::filesystem::path& path) {
  return parse_scene(read_text_file(path), path.string());
}

}  // namespace riskdrive
