#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "riskdrive/checkpoint.hpp"
#include "riskdrive/config.hpp"
#include "riskdrive/errors.hpp"

using namespace riskdrive;

namespace {

const std::string kRoot = RISKDRIVE_SOURCE_DIR;

std::string error_path(const std::string& json) {
  try {
    parse_config(json, "test.json");
  } catch (const ConfigError& e) {
    return e.path();
  }
  return "<no error>";
}

Checkpoint sample_checkpoint() {
  Checkpoint ck;
  ck.config = load_config(kRoot + "/configs/reduced.json");
  ck.config_hash = config_hash(ck.config);
  ck.variant = "ribppo-s";
  ck.seed = 42;
  ck.iteration = 7;
  ActorCritic m(ck.config.network_for(Variant::parse("ribppo-s")));
  Rng a(1), c(2);
  m.init(a, c);
  ck.actor_params = m.actor_params;
  ck.critic_params = m.critic_params;
  ck.actor_opt = AdamState::zeros(m.actor_params.size());
  ck.critic_opt = AdamState::zeros(m.critic_params.size());
  ck.actor_opt.m[3] = 1.0 / 3.0;
  ck.actor_opt.step = 12;
  Rng r(99);
  r.discard(5);
  std::ostringstream os;
  os << r;
  ck.rng_state = os.str();
  return ck;
}

}  // namespace

TEST_CASE("shipped configs load and validate") {
  for (const char* name : {"default", "normal", "dense", "reduced"}) {
    const ExperimentConfig c = load_config(kRoot + "/configs/" + name + ".json");
    CHECK_NOTHROW(c.validate());
    CHECK(c.network.height == c.grid.height_cells);
    CHECK(c.network.width == c.grid.width_cells);
    CHECK(c.network.conv1.in_channels == kObservationChannels);
    CHECK(c.safety.risk == c.risk);
    CHECK(c.safety.lane_change_duration == c.scenario.lane_change_duration);
  }
  const ExperimentConfig r = load_config(kRoot + "/configs/reduced.json");
  CHECK(r.scenario.lane_count == 2);
  CHECK(r.scenario.hdv_count == 2);
  CHECK(r.ppo.rollout_horizon == 128);
  CHECK(r.train.iterations == 150);
  const ExperimentConfig n = load_config(kRoot + "/configs/normal.json");
  CHECK(n.scenario.max_hdvs() >= n.scenario.hdv_count);
}

TEST_CASE("empty config equals the defaults") {
  ExperimentConfig d;
  d.finalize();
  CHECK(parse_config("{}") == d);
  CHECK(d.ppo.gamma_d == 0.99);
  CHECK(d.ppo.clip_eps == 0.2);
  CHECK(d.safety.r_safe == 2.5);
  CHECK(d.safety.sample_count == 20);
  CHECK(d.reward.gamma_b_min == 0.2);
  CHECK(d.network.conv1 == ConvSpec{3, 8, 3});
  CHECK(d.network.conv2 == ConvSpec{8, 16, 3});
  CHECK(d.network.hidden_size == 32);
}

TEST_CASE("config errors name the offending field") {
  CHECK(error_path(R"({"ppo": {"clip_eps": "big"}})") == "ppo.clip_eps");
  CHECK(error_path(R"({"ppo": {"clipeps": 0.1}})") == "ppo.clipeps");
  CHECK(error_path(R"({"ppo": {"clip_eps": 1.5}})") == "ppo.clip_eps");
  CHECK(error_path(R"({"scenario": {"lane_count": 2.5}})") == "scenario.lane_count");
  CHECK(error_path(R"({"scenario": {"hdv_speed_range": [20]}})") == "scenario.hdv_speed_range");
  CHECK(error_path(R"({"scenario": {"idm": {"time_headway": true}}})") == "scenario.idm.time_headway");
  CHECK(error_path(R"({"network": {"conv1": {"kernel": 0}}})") == "network.conv1");
  CHECK(error_path(R"({"reward": {"history_form": "median"}})") == "reward.history_form");
  CHECK(error_path(R"({"safety": {"profile": "cubic"}})") == "safety.profile");
  CHECK(error_path(R"({"adam": {"lr": -1}})") == "adam.lr");
  CHECK(error_path(R"({"train": {"iterations": 0}})") == "train.iterations");
  CHECK(error_path(R"({"bogus": {}})") == "bogus");
  CHECK(error_path("{\n  \"ppo\": {\n    \"clip_eps\": ,\n  }\n}") == "test.json:3");
  CHECK(error_path("[1, 2]") != "<no error>");
  CHECK_THROWS_AS(load_config(kRoot + "/configs/missing.json"), ConfigError);
}

TEST_CASE("canonical JSON round-trips and hashes stably") {
  const ExperimentConfig c = load_config(kRoot + "/configs/dense.json");
  const std::string text = config_to_json(c);
  const ExperimentConfig back = parse_config(text);
  CHECK(back == c);
  CHECK(config_to_json(back) == text);
  CHECK(config_hash(back) == config_hash(c));
  ExperimentConfig other = c;
  other.ppo.clip_eps = 0.21;
  CHECK(config_hash(other) != config_hash(c));
}

TEST_CASE("variant names") {
  CHECK(Variant::parse("ppo") == Variant{});
  CHECK(Variant::parse("bppo") == Variant{false, false, true, false});
  CHECK(Variant::parse("rppo") == Variant{true, false, false, false});
  CHECK(Variant::parse("ppo-s") == Variant{false, false, false, true});
  CHECK(Variant::parse("RIBPPO-S") == Variant{true, true, true, true});
  for (const auto& n : Variant::all_names()) CHECK(Variant::parse(n).name() == n);
  CHECK(Variant::all_names().size() == 5);
  CHECK_THROWS_AS(Variant::parse("ippo"), ConfigError);
  const ExperimentConfig c = load_config(kRoot + "/configs/reduced.json");
  CHECK(c.network_for(Variant::parse("ribppo-s")).attention);
  CHECK_FALSE(c.network_for(Variant::parse("rppo")).attention);
  CHECK(c.env_settings(Variant::parse("bppo")).variant.balanced_reward);
}

TEST_CASE("scene files") {
  const Scene s = load_scene(kRoot + "/scenes/fig3.json");
  CHECK(s.av.is_av);
  CHECK(s.av.lane == 1);
  CHECK(s.av.v == 25.0);
  REQUIRE(s.hdvs.size() == 2);
  CHECK(s.hdvs[0].x == 15.0);
  const World w = s.world();
  CHECK(w.hdvs.size() == 2);
  CHECK(w.hdv_maneuvers.size() == 2);
  CHECK(w.av == s.av);

  CHECK_THROWS_AS(parse_scene(R"({"vehicles": [{"x": 0, "lane": 1}]})"), ConfigError);
  CHECK_THROWS_AS(parse_scene(R"({"vehicles": [{"lane": 1, "is_av": true}]})"), ConfigError);
  CHECK_THROWS_AS(parse_scene(R"({"lane_count": 3, "vehicles": [{"x": 0, "lane": 5, "is_av": true}]})"),
                  ConfigError);
  CHECK_THROWS_AS(parse_scene(R"({"vehicles": [{"x": 0, "lane": 1, "is_av": true, "speed": 3}]})"),
                  ConfigError);
  const Scene y = parse_scene(R"({"vehicles": [{"x": 3, "y": 5.5, "is_av": true}]})");
  CHECK(y.av.y == 5.5);
  CHECK(y.av.lane == 1);
}

TEST_CASE("checkpoint round-trips bit-exactly") {
  const Checkpoint ck = sample_checkpoint();
  const std::string bytes = serialize_checkpoint(ck);
  const Checkpoint back = deserialize_checkpoint(bytes);
  CHECK(back == ck);
  CHECK(serialize_checkpoint(back) == bytes);

  const auto dir = std::filesystem::temp_directory_path() / "riskdrive_test_config";
  std::filesystem::create_directories(dir);
  save_checkpoint(ck, dir / "ck.bin");
  CHECK_FALSE(std::filesystem::exists(dir / "ck.bin.tmp"));
  CHECK(load_checkpoint(dir / "ck.bin") == ck);
  std::filesystem::remove_all(dir);
}

TEST_CASE("corrupt or incompatible checkpoints are rejected") {
  const Checkpoint ck = sample_checkpoint();
  const std::string bytes = serialize_checkpoint(ck);

  std::string bad_magic = bytes;
  bad_magic[0] = 'X';
  CHECK_THROWS_AS(deserialize_checkpoint(bad_magic), CompatibilityError);
  CHECK_THROWS_AS(deserialize_checkpoint(bytes.substr(0, bytes.size() - 3)), CompatibilityError);
  CHECK_THROWS_AS(deserialize_checkpoint(bytes + "x"), CompatibilityError);
  CHECK_THROWS_AS(deserialize_checkpoint(""), CompatibilityError);

  Checkpoint wrong_hash = ck;
  wrong_hash.config_hash ^= 1;
  CHECK_THROWS_AS(deserialize_checkpoint(serialize_checkpoint(wrong_hash)), CompatibilityError);
  Checkpoint wrong_size = ck;
  wrong_size.actor_params.pop_back();
  CHECK_THROWS_AS(deserialize_checkpoint(serialize_checkpoint(wrong_size)), CompatibilityError);
  Checkpoint wrong_variant = ck;
  wrong_variant.variant = "dqn";
  CHECK_THROWS_AS(deserialize_checkpoint(serialize_checkpoint(wrong_variant)), CompatibilityError);
  CHECK_THROWS_AS(load_checkpoint("/nonexistent/ck.bin"), std::exception);
}
