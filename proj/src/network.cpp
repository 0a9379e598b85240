#include "riskdrive/network.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "riskdrive/errors.hpp"
#include "riskdrive/kernels.hpp"

namespace riskdrive {

void NetworkConfig::validate() const {
  auto check_conv = [](const ConvSpec& c, const char* name) {
    if (c.in_channels < 1 || c.out_channels < 1 || c.kernel < 1) {
      throw ConfigError(std::string("network.") + name, "all entries must be >= 1");
    }
  };
  check_conv(conv1, "conv1");
  check_conv(conv2, "conv2");
  if (conv2.in_channels != conv1.out_channels) {
    throw ConfigError("network.conv2", "in_channels must equal conv1.out_channels");
  }
  if (height < 1 || width < 1) throw ConfigError("network.height", "must be >= 1");
  if (mlp_hidden < 1) throw ConfigError("network.mlp_hidden", "must be >= 1");
  if (hidden_size < 1) throw ConfigError("network.hidden_size", "must be >= 1");
  if (spatial_channels < 1) throw ConfigError("network.spatial_channels", "must be >= 1");
  if (spatial_kernel < 1) throw ConfigError("network.spatial_kernel", "must be >= 1");
}

std::size_t ParamLayout::add(std::string name, std::size_t size, std::size_t fan_in) {
  blocks_.push_back({std::move(name), total_, size, std::max<std::size_t>(fan_in, 1)});
  total_ += size;
  return blocks_.back().offset;
}

const ParamBlock& ParamLayout::find(const std::string& name) const {
  for (const auto& b : blocks_) {
    if (b.name == name) return b;
  }
  throw std::out_of_range("no parameter block named " + name);
}

namespace {

using kernels::ConvShape;

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// y = W x + b, W is [rows][cols].
void affine(const double* W, const double* b, const double* x, int rows, int cols, double* y) {
  for (int r = 0; r < rows; ++r) {
    double acc = b != nullptr ? b[r] : 0.0;
    const double* w = W + long(r) * cols;
    for (int c = 0; c < cols; ++c) acc += w[c] * x[c];
    y[r] = acc;
  }
}

// dW += dy x^T, db += dy, dx += W^T dy (dx may be null).
void affine_backward(const double* W, const double* x, const double* dy, int rows, int cols,
                     double* dW, double* db, double* dx) {
  for (int r = 0; r < rows; ++r) {
    const double g = dy[r];
    if (db != nullptr) db[r] += g;
    if (g == 0.0) continue;
    double* dw = dW + long(r) * cols;
    for (int c = 0; c < cols; ++c) dw[c] += g * x[c];
    if (dx != nullptr) {
      const double* w = W + long(r) * cols;
      for (int c = 0; c < cols; ++c) dx[c] += w[c] * g;
    }
  }
}

struct Views {
  const double* p;
  const ParamLayout& layout;
  const double* operator()(const char* name) const { return p + layout.find(name).offset; }
};

struct GradViews {
  double* p;
  const ParamLayout& layout;
  double* operator()(const char* name) const { return p + layout.find(name).offset; }
};

std::span<const double> block(std::span<const double> p, const ParamLayout& l, const char* n) {
  const auto& b = l.find(n);
  return p.subspan(b.offset, b.size);
}

std::span<double> block(std::span<double> p, const ParamLayout& l, const char* n) {
  const auto& b = l.find(n);
  return p.subspan(b.offset, b.size);
}

}  // namespace

AttentionNet::AttentionNet(const NetworkConfig& config, int outputs, int extra_inputs)
    : config_(config), outputs_(outputs), extra_inputs_(extra_inputs) {
  config_.validate();
  const std::size_t C0 = config_.conv1.in_channels;
  const std::size_t C1 = config_.conv1.out_channels;
  const std::size_t C2 = config_.conv2.out_channels;
  const std::size_t K1 = config_.conv1.kernel, K2 = config_.conv2.kernel;
  const std::size_t R = config_.mlp_hidden, Hd = config_.hidden_size;
  const std::size_t S = config_.spatial_channels, Ks = config_.spatial_kernel;
  const std::size_t HW = std::size_t(config_.height) * config_.width;

  layout_.add("conv1.w", C1 * C0 * K1 * K1, C0 * K1 * K1);
  layout_.add("conv1.b", C1, C0 * K1 * K1);
  layout_.add("conv2.w", C2 * C1 * K2 * K2, C1 * K2 * K2);
  layout_.add("conv2.b", C2, C1 * K2 * K2);
  layout_.add("mlp1.w", R * C2, C2);
  layout_.add("mlp1.b", R, C2);
  layout_.add("mlp2.w", C2 * R, R);
  layout_.add("mlp2.b", C2, R);
  for (const char* g : {"z", "r", "n"}) {
    const std::string gate(g);
    layout_.add("gru.w" + gate, Hd * C2, C2);
    layout_.add("gru.u" + gate, Hd * Hd, Hd);
    layout_.add("gru.b" + gate, Hd, Hd);
  }
  layout_.add("gru.bun", Hd, Hd);
  layout_.add("att.w", C2 * Hd, Hd);
  layout_.add("att.b", C2, Hd);
  layout_.add("sa1.w", S * 2 * Ks * Ks, 2 * Ks * Ks);
  layout_.add("sa1.b", S, 2 * Ks * Ks);
  layout_.add("sa2.w", S * Ks * Ks, S * Ks * Ks);
  layout_.add("sa2.b", 1, S * Ks * Ks);
  const std::size_t head_in = C2 * HW + std::size_t(extra_inputs_);
  layout_.add("head.w", std::size_t(outputs_) * head_in, head_in);
  layout_.add("head.b", std::size_t(outputs_), head_in);
}

void AttentionNet::init_params(std::span<double> params, Rng& rng) const {
  if (params.size() != param_count()) throw DimensionError("init_params: size mismatch");
  for (const auto& b : layout_.blocks()) {
    const double k = 1.0 / std::sqrt(static_cast<double>(b.fan_in));
    for (std::size_t i = 0; i < b.size; ++i) params[b.offset + i] = uniform(rng, -k, k);
  }
}

NetCache AttentionNet::forward(std::span<const double> params, const Tensor3& input,
                               std::span<const double> extra,
                               std::span<const double> h_prev) const {
  const NetworkConfig& cfg = config_;
  if (params.size() != param_count()) throw DimensionError("forward: parameter count mismatch");
  if (input.channels != cfg.in_channels() || input.height != cfg.height ||
      input.width != cfg.width) {
    throw DimensionError("forward: input shape (" + std::to_string(input.channels) + "," +
                         std::to_string(input.height) + "," + std::to_string(input.width) +
                         ") does not match the network");
  }
  if (int(extra.size()) != extra_inputs_) throw DimensionError("forward: extra input size");
  if (int(h_prev.size()) != cfg.hidden_size) {
    throw DimensionError("forward: recurrent state has " + std::to_string(h_prev.size()) +
                         " entries, expected " + std::to_string(cfg.hidden_size));
  }

  const int H = cfg.height, W = cfg.width;
  const int C1 = cfg.conv1.out_channels, C2 = cfg.conv2.out_channels;
  const int R = cfg.mlp_hidden, Hd = cfg.hidden_size, S = cfg.spatial_channels;
  const long HW = long(H) * W;
  const Views v{params.data(), layout_};

  NetCache c;
  c.input = input;
  c.extra.assign(extra.begin(), extra.end());
  c.h_prev.assign(h_prev.begin(), h_prev.end());

  const ConvShape s1{cfg.conv1.in_channels, C1, cfg.conv1.kernel, H, W};
  c.z1 = Tensor3(C1, H, W);
  kernels::conv2d_forward(s1, input.values, block(params, layout_, "conv1.w"),
                          block(params, layout_, "conv1.b"), c.z1.values);
  c.a1 = c.z1;
  for (double& x : c.a1.values) x = std::max(x, 0.0);

  const ConvShape s2{C1, C2, cfg.conv2.kernel, H, W};
  c.z2 = Tensor3(C2, H, W);
  kernels::conv2d_forward(s2, c.a1.values, block(params, layout_, "conv2.w"),
                          block(params, layout_, "conv2.b"), c.z2.values);
  c.a2 = c.z2;
  for (double& x : c.a2.values) x = std::max(x, 0.0);

  if (cfg.attention) {
    // Channel attention.
    c.pool_max.assign(C2, 0.0);
    c.pool_avg.assign(C2, 0.0);
    c.pool_argmax.assign(C2, 0);
    for (int ch = 0; ch < C2; ++ch) {
      const double* a = c.a2.values.data() + ch * HW;
      int best = 0;
      double sum = 0.0;
      for (long i = 0; i < HW; ++i) {
        if (a[i] > a[best]) best = int(i);
        sum += a[i];
      }
      c.pool_argmax[ch] = best;
      c.pool_max[ch] = a[best];
      c.pool_avg[ch] = sum / double(HW);
    }
    c.mlp_pre_max.assign(R, 0.0);
    c.mlp_pre_avg.assign(R, 0.0);
    affine(v("mlp1.w"), v("mlp1.b"), c.pool_max.data(), R, C2, c.mlp_pre_max.data());
    affine(v("mlp1.w"), v("mlp1.b"), c.pool_avg.data(), R, C2, c.mlp_pre_avg.data());
    std::vector<double> hid_max(R), hid_avg(R), out_max(C2), out_avg(C2);
    for (int i = 0; i < R; ++i) {
      hid_max[i] = std::max(c.mlp_pre_max[i], 0.0);
      hid_avg[i] = std::max(c.mlp_pre_avg[i], 0.0);
    }
    affine(v("mlp2.w"), v("mlp2.b"), hid_max.data(), C2, R, out_max.data());
    affine(v("mlp2.w"), v("mlp2.b"), hid_avg.data(), C2, R, out_avg.data());
    c.descriptor.assign(C2, 0.0);
    for (int ch = 0; ch < C2; ++ch) c.descriptor[ch] = out_max[ch] + out_avg[ch];

    // Gated recurrent cell.
    std::vector<double> az(Hd), ar(Hd), tmp(Hd), an(Hd);
    affine(v("gru.wz"), v("gru.bz"), c.descriptor.data(), Hd, C2, az.data());
    affine(v("gru.uz"), nullptr, h_prev.data(), Hd, Hd, tmp.data());
    for (int i = 0; i < Hd; ++i) az[i] += tmp[i];
    affine(v("gru.wr"), v("gru.br"), c.descriptor.data(), Hd, C2, ar.data());
    affine(v("gru.ur"), nullptr, h_prev.data(), Hd, Hd, tmp.data());
    for (int i = 0; i < Hd; ++i) ar[i] += tmp[i];
    c.un_h.assign(Hd, 0.0);
    affine(v("gru.un"), v("gru.bun"), h_prev.data(), Hd, Hd, c.un_h.data());
    affine(v("gru.wn"), v("gru.bn"), c.descriptor.data(), Hd, C2, an.data());
    c.gate_z.resize(Hd);
    c.gate_r.resize(Hd);
    c.cand.resize(Hd);
    c.h_next.resize(Hd);
    for (int i = 0; i < Hd; ++i) {
      c.gate_z[i] = sigmoid(az[i]);
      c.gate_r[i] = sigmoid(ar[i]);
      c.cand[i] = std::tanh(an[i] + c.gate_r[i] * c.un_h[i]);
      c.h_next[i] = (1.0 - c.gate_z[i]) * c.cand[i] + c.gate_z[i] * h_prev[i];
    }

    std::vector<double> logits(C2);
    affine(v("att.w"), v("att.b"), c.h_next.data(), C2, Hd, logits.data());
    c.channel_weights.resize(C2);
    for (int ch = 0; ch < C2; ++ch) c.channel_weights[ch] = sigmoid(logits[ch]);
    c.f1 = c.a2;
    for (int ch = 0; ch < C2; ++ch) {
      double* f = c.f1.values.data() + ch * HW;
      for (long i = 0; i < HW; ++i) f[i] *= c.channel_weights[ch];
    }

    // Spatial attention.
    c.s0 = Tensor3(2, H, W);
    c.s0_argmax.assign(HW, 0);
    for (long i = 0; i < HW; ++i) {
      int best = 0;
      double sum = 0.0;
      for (int ch = 0; ch < C2; ++ch) {
        const double x = c.f1.values[ch * HW + i];
        if (x > c.f1.values[best * HW + i]) best = ch;
        sum += x;
      }
      c.s0_argmax[i] = best;
      c.s0.values[i] = c.f1.values[best * HW + i];
      c.s0.values[HW + i] = sum / double(C2);
    }
    const ConvShape ss1{2, S, cfg.spatial_kernel, H, W};
    c.zs1 = Tensor3(S, H, W);
    kernels::conv2d_forward(ss1, c.s0.values, block(params, layout_, "sa1.w"),
                            block(params, layout_, "sa1.b"), c.zs1.values);
    c.as1 = c.zs1;
    for (double& x : c.as1.values) x = std::max(x, 0.0);
    const ConvShape ss2{S, 1, cfg.spatial_kernel, H, W};
    c.zs2 = Tensor3(1, H, W);
    kernels::conv2d_forward(ss2, c.as1.values, block(params, layout_, "sa2.w"),
                            block(params, layout_, "sa2.b"), c.zs2.values);
    c.mask = c.zs2;
    for (double& x : c.mask.values) x = sigmoid(x);
    c.f2 = c.f1;
    for (int ch = 0; ch < C2; ++ch) {
      double* f = c.f2.values.data() + ch * HW;
      for (long i = 0; i < HW; ++i) f[i] *= c.mask.values[i];
    }
  } else {
    c.h_next = c.h_prev;
    c.f2 = c.a2;
  }

  c.head_in.reserve(c.f2.size() + extra.size());
  c.head_in.assign(c.f2.values.begin(), c.f2.values.end());
  c.head_in.insert(c.head_in.end(), extra.begin(), extra.end());
  c.output.assign(outputs_, 0.0);
  affine(v("head.w"), v("head.b"), c.head_in.data(), outputs_, int(c.head_in.size()),
         c.output.data());
  c.valid = true;
  return c;
}

void AttentionNet::backward(std::span<const double> params, const NetCache& c,
                            std::span<const double> d_output,
                            std::span<const double> d_h_next, std::span<double> d_params,
                            std::span<double> d_h_prev) const {
  if (!c.valid) throw LifecycleError("backward() called before forward()");
  const NetworkConfig& cfg = config_;
  if (params.size() != param_count() || d_params.size() != param_count()) {
    throw DimensionError("backward: parameter count mismatch");
  }
  if (int(d_output.size()) != outputs_) throw DimensionError("backward: d_output size");
  if (!d_h_next.empty() && int(d_h_next.size()) != cfg.hidden_size) {
    throw DimensionError("backward: d_h_next size");
  }
  if (!d_h_prev.empty() && int(d_h_prev.size()) != cfg.hidden_size) {
    throw DimensionError("backward: d_h_prev size");
  }

  const int H = cfg.height, W = cfg.width;
  const int C1 = cfg.conv1.out_channels, C2 = cfg.conv2.out_channels;
  const int R = cfg.mlp_hidden, Hd = cfg.hidden_size, S = cfg.spatial_channels;
  const long HW = long(H) * W;
  const Views v{params.data(), layout_};
  const GradViews g{d_params.data(), layout_};

  std::vector<double> d_head_in(c.head_in.size(), 0.0);
  affine_backward(v("head.w"), c.head_in.data(), d_output.data(), outputs_,
                  int(c.head_in.size()), g("head.w"), g("head.b"), d_head_in.data());
  std::vector<double> d_f2(d_head_in.begin(), d_head_in.begin() + long(C2) * HW);

  std::vector<double> d_a2(long(C2) * HW, 0.0);
  std::vector<double> dh_prev(Hd, 0.0);

  if (cfg.attention) {
    // Spatial attention.
    std::vector<double> d_f1(long(C2) * HW, 0.0);
    std::vector<double> d_zs2(HW, 0.0);
    for (long i = 0; i < HW; ++i) {
      double dm = 0.0;
      const double m = c.mask.values[i];
      for (int ch = 0; ch < C2; ++ch) {
        d_f1[ch * HW + i] = d_f2[ch * HW + i] * m;
        dm += d_f2[ch * HW + i] * c.f1.values[ch * HW + i];
      }
      d_zs2[i] = dm * m * (1.0 - m);
    }
    std::vector<double> d_as1(long(S) * HW, 0.0);
    const ConvShape ss2{S, 1, cfg.spatial_kernel, H, W};
    kernels::conv2d_backward(ss2, c.as1.values, block(params, layout_, "sa2.w"), d_zs2, d_as1,
                             block(d_params, layout_, "sa2.w"),
                             block(d_params, layout_, "sa2.b"));
    for (long i = 0; i < long(S) * HW; ++i) {
      if (c.zs1.values[i] <= 0.0) d_as1[i] = 0.0;
    }
    std::vector<double> d_s0(2 * HW, 0.0);
    const ConvShape ss1{2, S, cfg.spatial_kernel, H, W};
    kernels::conv2d_backward(ss1, c.s0.values, block(params, layout_, "sa1.w"), d_as1, d_s0,
                             block(d_params, layout_, "sa1.w"),
                             block(d_params, layout_, "sa1.b"));
    for (long i = 0; i < HW; ++i) {
      d_f1[c.s0_argmax[i] * HW + i] += d_s0[i];
      const double share = d_s0[HW + i] / double(C2);
      for (int ch = 0; ch < C2; ++ch) d_f1[ch * HW + i] += share;
    }

    // Channel scaling.
    std::vector<double> d_logit(C2, 0.0);
    for (int ch = 0; ch < C2; ++ch) {
      const double w = c.channel_weights[ch];
      double dw = 0.0;
      for (long i = 0; i < HW; ++i) {
        d_a2[ch * HW + i] = d_f1[ch * HW + i] * w;
        dw += d_f1[ch * HW + i] * c.a2.values[ch * HW + i];
      }
      d_logit[ch] = dw * w * (1.0 - w);
    }
    std::vector<double> dh(Hd, 0.0);
    affine_backward(v("att.w"), c.h_next.data(), d_logit.data(), C2, Hd, g("att.w"),
                    g("att.b"), dh.data());
    if (!d_h_next.empty()) {
      for (int i = 0; i < Hd; ++i) dh[i] += d_h_next[i];
    }

    // Gated recurrent cell.
    std::vector<double> d_an(Hd), d_az(Hd), d_ar(Hd), d_unh(Hd);
    for (int i = 0; i < Hd; ++i) {
      const double z = c.gate_z[i], r = c.gate_r[i], n = c.cand[i];
      const double dn = dh[i] * (1.0 - z);
      const double dz = dh[i] * (c.h_prev[i] - n);
      dh_prev[i] += dh[i] * z;
      d_an[i] = dn * (1.0 - n * n);
      d_unh[i] = d_an[i] * r;
      d_ar[i] = d_an[i] * c.un_h[i] * r * (1.0 - r);
      d_az[i] = dz * z * (1.0 - z);
    }
    std::vector<double> d_desc(C2, 0.0);
    affine_backward(v("gru.wn"), c.descriptor.data(), d_an.data(), Hd, C2, g("gru.wn"),
                    g("gru.bn"), d_desc.data());
    affine_backward(v("gru.un"), c.h_prev.data(), d_unh.data(), Hd, Hd, g("gru.un"),
                    g("gru.bun"), dh_prev.data());
    affine_backward(v("gru.wz"), c.descriptor.data(), d_az.data(), Hd, C2, g("gru.wz"),
                    g("gru.bz"), d_desc.data());
    affine_backward(v("gru.uz"), c.h_prev.data(), d_az.data(), Hd, Hd, g("gru.uz"), nullptr,
                    dh_prev.data());
    affine_backward(v("gru.wr"), c.descriptor.data(), d_ar.data(), Hd, C2, g("gru.wr"),
                    g("gru.br"), d_desc.data());
    affine_backward(v("gru.ur"), c.h_prev.data(), d_ar.data(), Hd, Hd, g("gru.ur"), nullptr,
                    dh_prev.data());

    // Shared perceptron, both pooled branches.
    std::vector<double> d_max(C2, 0.0), d_avg(C2, 0.0);
    auto mlp_branch = [&](const std::vector<double>& pooled, const std::vector<double>& pre,
                          std::vector<double>& d_pooled) {
      std::vector<double> hid(R), d_hid(R, 0.0);
      for (int i = 0; i < R; ++i) hid[i] = std::max(pre[i], 0.0);
      affine_backward(v("mlp2.w"), hid.data(), d_desc.data(), C2, R, g("mlp2.w"), g("mlp2.b"),
                      d_hid.data());
      for (int i = 0; i < R; ++i) {
        if (pre[i] <= 0.0) d_hid[i] = 0.0;
      }
      affine_backward(v("mlp1.w"), pooled.data(), d_hid.data(), R, C2, g("mlp1.w"),
                      g("mlp1.b"), d_pooled.data());
    };
    mlp_branch(c.pool_max, c.mlp_pre_max, d_max);
    mlp_branch(c.pool_avg, c.mlp_pre_avg, d_avg);
    for (int ch = 0; ch < C2; ++ch) {
      d_a2[ch * HW + c.pool_argmax[ch]] += d_max[ch];
      const double share = d_avg[ch] / double(HW);
      for (long i = 0; i < HW; ++i) d_a2[ch * HW + i] += share;
    }
  } else {
    d_a2 = d_f2;
    if (!d_h_next.empty()) dh_prev.assign(d_h_next.begin(), d_h_next.end());
  }

  for (long i = 0; i < long(C2) * HW; ++i) {
    if (c.z2.values[i] <= 0.0) d_a2[i] = 0.0;
  }
  std::vector<double> d_a1(long(C1) * HW, 0.0);
  const ConvShape s2{C1, C2, cfg.conv2.kernel, H, W};
  kernels::conv2d_backward(s2, c.a1.values, block(params, layout_, "conv2.w"), d_a2, d_a1,
                           block(d_params, layout_, "conv2.w"),
                           block(d_params, layout_, "conv2.b"));
  for (long i = 0; i < long(C1) * HW; ++i) {
    if (c.z1.values[i] <= 0.0) d_a1[i] = 0.0;
  }
  const ConvShape s1{cfg.conv1.in_channels, C1, cfg.conv1.kernel, H, W};
  kernels::conv2d_backward(s1, c.input.values, block(params, layout_, "conv1.w"), d_a1, {},
                           block(d_params, layout_, "conv1.w"),
                           block(d_params, layout_, "conv1.b"));

  if (!d_h_prev.empty()) std::copy(dh_prev.begin(), dh_prev.end(), d_h_prev.begin());
}

std::array<double, kActionCount> masked_softmax(std::span<const double> logits,
                                                const std::array<bool, kActionCount>& mask) {
  if (logits.size() != std::size_t(kActionCount)) throw DimensionError("masked_softmax: size");
  std::array<double, kActionCount> p{};
  double peak = -std::numeric_limits<double>::infinity();
  for (int a = 0; a < kActionCount; ++a) {
    if (mask[a]) peak = std::max(peak, logits[a]);
  }
  double total = 0.0;
  for (int a = 0; a < kActionCount; ++a) {
    p[a] = mask[a] ? std::exp(logits[a] - peak) : 0.0;
    total += p[a];
  }
  for (double& x : p) x /= total;
  return p;
}

double masked_entropy(const std::array<double, kActionCount>& probs) {
  double h = 0.0;
  for (double p : probs) {
    if (p > 0.0) h -= p * std::log(p);
  }
  return h;
}

ActorCritic::ActorCritic(const NetworkConfig& cfg)
    : config(cfg),
      actor(cfg, kActionCount, 0),
      critic(cfg, 1, cfg.critic_uses_policy ? kActionCount : 0),
      actor_params(actor.param_count(), 0.0),
      critic_params(critic.param_count(), 0.0) {}

void ActorCritic::init(Rng& actor_rng, Rng& critic_rng) {
  actor.init_params(actor_params, actor_rng);
  critic.init_params(critic_params, critic_rng);
}

}  // namespace riskdrive
