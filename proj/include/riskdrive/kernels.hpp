#pragma once

#include <span>

namespace riskdrive::kernels {

// Stride-1 cross-correlation with zero padding that preserves the spatial
// size. Weights are laid out [out][in][k][k]; tensors are [c][h][w].
struct ConvShape {
  int in_channels = 1;
  int out_channels = 1;
  int kernel = 3;
  int height = 1;
  int width = 1;

  int pad() const { return (kernel - 1) / 2; }
  long weight_count() const { return long(out_channels) * in_channels * kernel * kernel; }
  long input_size() const { return long(in_channels) * height * width; }
  long output_size() const { return long(out_channels) * height * width; }
  long flops() const { return 2 * weight_count() * height * width; }
};

// Parallel kernels. Each output element is owned by one iteration and
// accumulated in a fixed order, so results do not depend on thread count.
void conv2d_forward(const ConvShape& s, std::span<const double> input,
                    std::span<const double> weights, std::span<const double> bias,
                    std::span<double> output);

// Accumulates (+=) into d_weights / d_bias; overwrites d_input when non-empty.
void conv2d_backward(const ConvShape& s, std::span<const double> input,
                     std::span<const double> weights, std::span<const double> d_output,
                     std::span<double> d_input, std::span<double> d_weights,
                     std::span<double> d_bias);

// Serial reference versions, plain nested loops.
void conv2d_forward_serial(const ConvShape& s, std::span<const double> input,
                           std::span<const double> weights, std::span<const double> bias,
                           std::span<double> output);

void conv2d_backward_serial(const ConvShape& s, std::span<const double> input,
                            std::span<const double> weights,
                            std::span<const double> d_output, std::span<double> d_input,
                            std::span<double> d_weights, std::span<double> d_bias);

}  // namespace riskdrive::kernels
