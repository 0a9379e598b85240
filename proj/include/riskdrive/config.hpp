#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "riskdrive/env.hpp"
#include "riskdrive/network.hpp"
#include "riskdrive/optimizer.hpp"
#include "riskdrive/ppo.hpp"

namespace riskdrive {

struct TrainSettings {
  int iterations = 50;
  int eval_episodes = 5;        // evaluation episodes after every iteration
  int checkpoint_every = 10;    // 0 keeps only the final checkpoint
  int final_eval_episodes = 20;

  void validate() const;
  bool operator==(const TrainSettings&) const = default;
};

// Everything a run needs except the variant and the seed.
// network.height / width / conv1.in_channels follow the grid and the
// observation layout; safety.risk and safety.lane_change_duration follow
// risk and scenario.
struct ExperimentConfig {
  ScenarioConfig scenario{};
  RiskParams risk{};
  GridSpec grid{};
  SafetyConfig safety{};
  RewardConfig reward{};
  NetworkConfig network{};
  PPOConfig ppo{};
  AdamConfig adam{};
  TrainSettings train{};

  // Re-derives the linked fields above, then validates every section.
  void finalize();
  void validate() const;

  EnvSettings env_settings(const Variant& v) const;
  NetworkConfig network_for(const Variant& v) const;

  bool operator==(const ExperimentConfig&) const = default;
};

// Missing keys keep their defaults; unknown keys and wrong types throw
// ConfigError naming the field ("ppo.clip_eps"). Syntax errors throw
// ConfigError with "<source>:<line>".
ExperimentConfig parse_config(std::string_view json_text, const std::string& source = "config");
ExperimentConfig load_config(const std::filesystem::path& path);

// Canonical form (sorted keys, every field present).
std::string config_to_json(const ExperimentConfig& cfg);
std::uint64_t config_hash(const ExperimentConfig& cfg);

// Single snapshot for riskmap / certify: road geometry, one AV, HDVs and
// optional risk / safety / grid overrides.
struct Scene {
  ScenarioConfig road{};
  VehicleState av{};
  std::vector<VehicleState> hdvs;
  RiskParams risk{};
  SafetyConfig safety{};
  GridSpec grid{};

  World world() const;
};

Scene parse_scene(std::string_view json_text, const std::string& source = "scene");
Scene load_scene(const std::filesystem::path& path);

std::string read_text_file(const std::filesystem::path& path);

}  // namespace riskdrive
