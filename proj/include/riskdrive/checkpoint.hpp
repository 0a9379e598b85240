#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "riskdrive/config.hpp"
#include "riskdrive/optimizer.hpp"

namespace riskdrive {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  ExperimentConfig config;
  std::uint64_t config_hash = 0;
  std::string variant;
  std::uint64_t seed = 0;
  std::int64_t iteration = 0;
  std::vector<double> actor_params;
  std::vector<double> critic_params;
  AdamState actor_opt;
  AdamState critic_opt;
  std::string rng_state;  // textual std::mt19937_64 state of the trainer

  bool operator==(const Checkpoint&) const = default;
};

// Binary little-endian container: magic, version, config hash, canonical
// config JSON, run identity, parameter and optimizer arrays, RNG state.
std::string serialize_checkpoint(const Checkpoint& ck);
// Throws CompatibilityError on a bad magic, an unknown version, a config
// hash mismatch or array sizes that do not fit the embedded config.
Checkpoint deserialize_checkpoint(const std::string& bytes);

// Writes to a temporary sibling file and renames it into place.
void save_checkpoint(const Checkpoint& ck, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace riskdrive
