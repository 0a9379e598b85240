#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace riskdrive {

struct AdamConfig {
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  bool operator==(const AdamConfig&) const = default;
};

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::int64_t step = 0;

  static AdamState zeros(std::size_t n) { return {std::vector<double>(n, 0.0), std::vector<double>(n, 0.0), 0}; }
  bool operator==(const AdamState&) const = default;
};

// One bias-corrected Adam step, params -= lr * m_hat / (sqrt(v_hat) + eps).
void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state,
               const AdamConfig& cfg);

// Scales grads so their joint L2 norm is at most max_norm (<= 0 disables).
// Returns the norm before scaling.
double clip_global_norm(std::span<double> a, std::span<double> b, double max_norm);

}  // namespace riskdrive
