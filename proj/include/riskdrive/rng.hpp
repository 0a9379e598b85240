#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace riskdrive {

using Rng = std::mt19937_64;

// Derives an independent seed for a named sub-stream of a root seed.
std::uint64_t stream_seed(std::uint64_t root, std::string_view name);
std::uint64_t stream_seed(std::uint64_t root, std::string_view name,
                          std::uint64_t index);

Rng make_stream(std::uint64_t root, std::string_view name);
Rng make_stream(std::uint64_t root, std::string_view name, std::uint64_t index);

double uniform(Rng& rng, double lo, double hi);
int uniform_int(Rng& rng, int lo, int hi);  // inclusive

std::uint64_t fnv1a64(std::string_view bytes);

}  // namespace riskdrive
