#include "riskdrive/kernels.hpp"

#include <algorithm>
#include <string>

#include "riskdrive/errors.hpp"

namespace riskdrive::kernels {

namespace {

// Small layers lose more to thread start-up than they gain.
constexpr long kParallelFlops = 1L << 18;

void check(const ConvShape& s, std::size_t input, std::size_t weights, std::size_t bias,
           std::size_t output) {
  if (s.in_channels < 1 || s.out_channels < 1 || s.kernel < 1 || s.height < 1 ||
      s.width < 1) {
    throw DimensionError("conv: all dimensions must be >= 1");
  }
  if (input != std::size_t(s.input_size())) {
    throw DimensionError("conv: input has " + std::to_string(input) + " values, expected " +
                         std::to_string(s.input_size()));
  }
  if (weights != std::size_t(s.weight_count()) || bias != std::size_t(s.out_channels)) {
    throw DimensionError("conv: weight or bias size mismatch");
  }
  if (output != std::size_t(s.output_size())) {
    throw DimensionError("conv: output size mismatch");
  }
}

}  // namespace

void conv2d_forward(const ConvShape& s, std::span<const double> input,
                    std::span<const double> weights, std::span<const double> bias,
                    std::span<double> output) {
  check(s, input.size(), weights.size(), bias.size(), output.size());
  const int H = s.height, W = s.width, K = s.kernel, P = s.pad();
  const long plane = long(H) * W;
  const int rows = s.out_channels * H;
#pragma omp parallel for schedule(static) if (s.flops() >= kParallelFlops)
  for (int job = 0; job < rows; ++job) {
    const int co = job / H;
    const int y = job % H;
    double* out_row = output.data() + co * plane + long(y) * W;
    for (int x = 0; x < W; ++x) out_row[x] = bias[co];
    for (int ci = 0; ci < s.in_channels; ++ci) {
      const double* in_plane = input.data() + ci * plane;
      const double* w = weights.data() + (long(co) * s.in_channels + ci) * K * K;
      for (int ky = 0; ky < K; ++ky) {
        const int iy = y + ky - P;
        if (iy < 0 || iy >= H) continue;
        const double* in_row = in_plane + long(iy) * W;
        for (int kx = 0; kx < K; ++kx) {
          const double wk = w[ky * K + kx];
          const int x_lo = std::max(0, P - kx);
          const int x_hi = std::min(W, W + P - kx);
          for (int x = x_lo; x < x_hi; ++x) out_row[x] += wk * in_row[x + kx - P];
        }
      }
    }
  }
}

void conv2d_backward(const ConvShape& s, std::span<const double> input,
                     std::span<const double> weights, std::span<const double> d_output,
                     std::span<double> d_input, std::span<double> d_weights,
                     std::span<double> d_bias) {
  check(s, input.size(), weights.size(), d_bias.size(), d_output.size());
  if (d_weights.size() != weights.size()) throw DimensionError("conv: d_weights size mismatch");
  if (!d_input.empty() && d_input.size() != input.size()) {
    throw DimensionError("conv: d_input size mismatch");
  }
  const int H = s.height, W = s.width, K = s.kernel, P = s.pad();
  const long plane = long(H) * W;
  const bool par = s.flops() >= kParallelFlops;

  // Weight and bias gradients: one output channel per iteration.
#pragma omp parallel for schedule(static) if (par)
  for (int co = 0; co < s.out_channels; ++co) {
    const double* g = d_output.data() + co * plane;
    double gb = 0.0;
    for (long i = 0; i < plane; ++i) gb += g[i];
    d_bias[co] += gb;
    for (int ci = 0; ci < s.in_channels; ++ci) {
      const double* in_plane = input.data() + ci * plane;
      double* dw = d_weights.data() + (long(co) * s.in_channels + ci) * K * K;
      for (int ky = 0; ky < K; ++ky) {
        for (int kx = 0; kx < K; ++kx) {
          double acc = 0.0;
          const int y_lo = std::max(0, P - ky), y_hi = std::min(H, H + P - ky);
          const int x_lo = std::max(0, P - kx), x_hi = std::min(W, W + P - kx);
          for (int y = y_lo; y < y_hi; ++y) {
            const double* g_row = g + long(y) * W;
            const double* in_row = in_plane + long(y + ky - P) * W;
            for (int x = x_lo; x < x_hi; ++x) acc += g_row[x] * in_row[x + kx - P];
          }
          dw[ky * K + kx] += acc;
        }
      }
    }
  }

  if (d_input.empty()) return;
  // Input gradient: one input channel per iteration.
#pragma omp parallel for schedule(static) if (par)
  for (int ci = 0; ci < s.in_channels; ++ci) {
    double* di = d_input.data() + ci * plane;
    std::fill(di, di + plane, 0.0);
    for (int co = 0; co < s.out_channels; ++co) {
      const double* g = d_output.data() + co * plane;
      const double* w = weights.data() + (long(co) * s.in_channels + ci) * K * K;
      for (int ky = 0; ky < K; ++ky) {
        for (int kx = 0; kx < K; ++kx) {
          const double wk = w[ky * K + kx];
          const int y_lo = std::max(0, P - ky), y_hi = std::min(H, H + P - ky);
          const int x_lo = std::max(0, P - kx), x_hi = std::min(W, W + P - kx);
          for (int y = y_lo; y < y_hi; ++y) {
            const double* g_row = g + long(y) * W;
            double* di_row = di + long(y + ky - P) * W;
            for (int x = x_lo; x < x_hi; ++x) di_row[x + kx - P] += wk * g_row[x];
          }
        }
      }
    }
  }
}

void conv2d_forward_serial(const ConvShape& s, std::span<const double> input,
                           std::span<const double> weights, std::span<const double> bias,
                           std::span<double> output) {
  check(s, input.size(), weights.size(), bias.size(), output.size());
  const int H = s.height, W = s.width, K = s.kernel, P = s.pad(), C = s.in_channels;
  for (int co = 0; co < s.out_channels; ++co) {
    for (int y = 0; y < H; ++y) {
      for (int x = 0; x < W; ++x) {
        double acc = bias[co];
        for (int ci = 0; ci < C; ++ci) {
          for (int ky = 0; ky < K; ++ky) {
            for (int kx = 0; kx < K; ++kx) {
              const int iy = y + ky - P, ix = x + kx - P;
              if (iy < 0 || iy >= H || ix < 0 || ix >= W) continue;
              acc += weights[((co * C + ci) * K + ky) * K + kx] * input[(ci * H + iy) * W + ix];
            }
          }
        }
        output[(co * H + y) * W + x] = acc;
      }
    }
  }
}

void conv2d_backward_serial(const ConvShape& s, std::span<const double> input,
                            std::span<const double> weights,
                            std::span<const double> d_output, std::span<double> d_input,
                            std::span<double> d_weights, std::span<double> d_bias) {
  check(s, input.size(), weights.size(), d_bias.size(), d_output.size());
  const int H = s.height, W = s.width, K = s.kernel, P = s.pad(), C = s.in_channels;
  for (int co = 0; co < s.out_channels; ++co) {
    for (int y = 0; y < H; ++y) {
      for (int x = 0; x < W; ++x) {
        const double g = d_output[(co * H + y) * W + x];
        d_bias[co] += g;
        for (int ci = 0; ci < C; ++ci) {
          for (int ky = 0; ky < K; ++ky) {
            for (int kx = 0; kx < K; ++kx) {
              const int iy = y + ky - P, ix = x + kx - P;
              if (iy < 0 || iy >= H || ix < 0 || ix >= W) continue;
              d_weights[((co * C + ci) * K + ky) * K + kx] += g * input[(ci * H + iy) * W + ix];
            }
          }
        }
      }
    }
  }
  if (d_input.empty()) return;
  // Gather form: each input element sums its contributions in (co, ky, kx) order.
  for (int ci = 0; ci < C; ++ci) {
    for (int iy = 0; iy < H; ++iy) {
      for (int ix = 0; ix < W; ++ix) {
        double acc = 0.0;
        for (int co = 0; co < s.out_channels; ++co) {
          for (int ky = 0; ky < K; ++ky) {
            for (int kx = 0; kx < K; ++kx) {
              const int y = iy - ky + P, x = ix - kx + P;
              if (y < 0 || y >= H || x < 0 || x >= W) continue;
              acc += weights[((co * C + ci) * K + ky) * K + kx] * d_output[(co * H + y) * W + x];
            }
          }
        }
        d_input[(ci * H + iy) * W + ix] = acc;
      }
    }
  }
}

}  // namespace riskdrive::kernels
