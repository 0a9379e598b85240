#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "riskdrive/rng.hpp"
#include "riskdrive/sim.hpp"
#include "riskdrive/tensor.hpp"

namespace riskdrive {

// Convolution layer (input channels, output channels, kernel size).
struct ConvSpec {
  int in_channels = 1;
  int out_channels = 1;
  int kernel = 3;

  bool operator==(const ConvSpec&) const = default;
};

struct NetworkConfig {
  int height = 32;
  int width = 32;
  ConvSpec conv1{3, 8, 3};
  ConvSpec conv2{8, 16, 3};
  int mlp_hidden = 8;        // shared perceptron width in channel attention
  int hidden_size = 32;      // recurrent cell state size
  int spatial_channels = 4;  // channels between the two spatial-attention convs
  int spatial_kernel = 3;
  bool attention = true;     // channel + spatial attention blocks
  bool critic_uses_policy = true;

  int in_channels() const { return conv1.in_channels; }
  int feature_channels() const { return conv2.out_channels; }
  void validate() const;

  bool operator==(const NetworkConfig&) const = default;
};

struct ParamBlock {
  std::string name;
  std::size_t offset = 0;
  std::size_t size = 0;
  std::size_t fan_in = 1;
};

class ParamLayout {
 public:
  std::size_t add(std::string name, std::size_t size, std::size_t fan_in);
  const ParamBlock& find(const std::string& name) const;
  const std::vector<ParamBlock>& blocks() const { return blocks_; }
  std::size_t total() const { return total_; }

 private:
  std::vector<ParamBlock> blocks_;
  std::size_t total_ = 0;
};

struct RecurrentState {
  std::vector<double> hidden;

  static RecurrentState zeros(int size) { return {std::vector<double>(size, 0.0)}; }
  bool operator==(const RecurrentState&) const = default;
};

// Intermediates of one forward pass, consumed by backward().
struct NetCache {
  bool valid = false;
  Tensor3 input;
  std::vector<double> extra;
  std::vector<double> h_prev;

  Tensor3 z1, a1, z2, a2;

  std::vector<double> pool_max, pool_avg;
  std::vector<int> pool_argmax;
  std::vector<double> mlp_pre_max, mlp_pre_avg;
  std::vector<double> descriptor;  // shared-perceptron sum fed to the cell
  std::vector<double> gate_z, gate_r, cand, un_h, h_next;
  std::vector<double> channel_weights;
  Tensor3 f1;

  Tensor3 s0;  // [max map, mean map]
  std::vector<int> s0_argmax;
  Tensor3 zs1, as1, zs2, mask;
  Tensor3 f2;

  std::vector<double> head_in;
  std::vector<double> output;
};

// conv -> relu -> conv -> relu -> channel attention (max/avg pool, shared
// perceptron, gated recurrent cell, sigmoid) -> spatial attention (channel
// max/mean maps, conv -> relu -> conv, sigmoid) -> linear head.
// Parameters live in one flat vector described by layout().
class AttentionNet {
 public:
  AttentionNet(const NetworkConfig& config, int outputs, int extra_inputs);

  const NetworkConfig& config() const { return config_; }
  const ParamLayout& layout() const { return layout_; }
  std::size_t param_count() const { return layout_.total(); }
  int outputs() const { return outputs_; }
  int extra_inputs() const { return extra_inputs_; }
  int hidden_size() const { return config_.hidden_size; }

  // Uniform in [-k, k], k = 1 / sqrt(fan_in), per block.
  void init_params(std::span<double> params, Rng& rng) const;

  // Throws DimensionError on shape mismatch.
  NetCache forward(std::span<const double> params, const Tensor3& input,
                   std::span<const double> extra, std::span<const double> h_prev) const;

  // Accumulates parameter gradients of <d_output, output> + <d_h_next, h_next>
  // into d_params. Writes the gradient w.r.t. h_prev when d_h_prev is
  // non-empty. Throws LifecycleError for a cache without a forward pass.
  void backward(std::span<const double> params, const NetCache& cache,
                std::span<const double> d_output, std::span<const double> d_h_next,
                std::span<double> d_params, std::span<double> d_h_prev = {}) const;

 private:
  NetworkConfig config_;
  int outputs_;
  int extra_inputs_;
  ParamLayout layout_;
};

// Softmax restricted to legal entries; illegal entries get probability 0.
std::array<double, kActionCount> masked_softmax(std::span<const double> logits,
                                                const std::array<bool, kActionCount>& mask);
double masked_entropy(const std::array<double, kActionCount>& probs);

// Actor and critic with separate parameters. The critic sees the actor's
// action distribution concatenated at its head when configured to.
struct ActorCritic {
  explicit ActorCritic(const NetworkConfig& config);

  NetworkConfig config;
  AttentionNet actor;
  AttentionNet critic;
  std::vector<double> actor_params;
  std::vector<double> critic_params;

  void init(Rng& actor_rng, Rng& critic_rng);
};

}  // namespace riskdrive
