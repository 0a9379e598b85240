#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "gradcheck.hpp"
#include "oracles.hpp"
#include "riskdrive/errors.hpp"
#include "riskdrive/network.hpp"

using namespace riskdrive;

namespace {

Tensor3 random_input(Rng& rng, const NetworkConfig& c) {
  Tensor3 t(c.in_channels(), c.height, c.width);
  for (double& v : t.values) v = uniform(rng, 0.0, 1.0);
  return t;
}

std::vector<double> random_params(const AttentionNet& net, Rng& rng) {
  std::vector<double> p(net.param_count());
  net.init_params(p, rng);
  return p;
}

NetworkConfig tiny_scalar() {
  NetworkConfig c;
  c.height = c.width = 1;
  c.conv1 = {1, 1, 1};
  c.conv2 = {1, 1, 1};
  c.attention = false;
  return c;
}

void set_block(const AttentionNet& net, std::vector<double>& p, const char* name, double v) {
  const auto& b = net.layout().find(name);
  std::fill(p.begin() + long(b.offset), p.begin() + long(b.offset + b.size), v);
}

}  // namespace

TEST_CASE("parameter layout and initialization") {
  const NetworkConfig cfg;
  const AttentionNet net(cfg, 5, 0);
  std::size_t covered = 0;
  for (const auto& b : net.layout().blocks()) {
    CHECK(b.offset == covered);
    covered += b.size;
  }
  CHECK(covered == net.param_count());
  CHECK(net.layout().find("conv1.w").size == 8u * 3 * 9);
  CHECK(net.layout().find("head.w").size == 5u * (16 * 32 * 32));
  CHECK_THROWS_AS(net.layout().find("nope"), std::out_of_range);

  Rng rng(1);
  const auto p = random_params(net, rng);
  for (const auto& b : net.layout().blocks()) {
    const double k = 1.0 / std::sqrt(double(b.fan_in));
    for (std::size_t i = b.offset; i < b.offset + b.size; ++i) {
      CHECK(std::abs(p[i]) <= k);
    }
  }
  std::vector<double> wrong(3);
  CHECK_THROWS_AS(net.init_params(wrong, rng), DimensionError);
}

TEST_CASE("network config validation") {
  NetworkConfig c;
  c.conv2.in_channels = 3;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = NetworkConfig{};
  c.hidden_size = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = NetworkConfig{};
  c.conv1.kernel = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("identity 1x1 convolution yields relu of the input") {
  NetworkConfig c = tiny_scalar();
  c.height = 3;
  c.width = 4;
  const AttentionNet net(c, 1, 0);
  std::vector<double> p(net.param_count(), 0.0);
  set_block(net, p, "conv1.w", 1.0);
  Tensor3 in(1, 3, 4);
  Rng rng(2);
  for (double& v : in.values) v = uniform(rng, -1.0, 1.0);
  const NetCache cache = net.forward(p, in, {}, std::vector<double>(c.hidden_size, 0.0));
  for (std::size_t i = 0; i < in.size(); ++i) {
    CHECK(cache.a1.values[i] == std::max(in.values[i], 0.0));
  }
  // All-zero input: pre-activation equals the bias.
  set_block(net, p, "conv1.b", -0.3);
  const NetCache z = net.forward(p, Tensor3(1, 3, 4), {}, std::vector<double>(c.hidden_size, 0.0));
  for (double v : z.z1.values) CHECK(v == -0.3);
  for (double v : z.a1.values) CHECK(v == 0.0);
}

TEST_CASE("forward matches the straight-line oracle") {
  Rng rng(3);
  for (bool attention : {true, false}) {
    for (int extra : {0, 5}) {
      NetworkConfig c = gradcheck::reduced_config();
      c.conv1.in_channels = 3;
      c.attention = attention;
      const AttentionNet net(c, extra ? 1 : 5, extra);
      for (int trial = 0; trial < 5; ++trial) {
        auto p = random_params(net, rng);
        for (double& v : p) v *= 2.0;
        const Tensor3 in = random_input(rng, c);
        std::vector<double> ex(extra), h(c.hidden_size);
        for (double& v : ex) v = uniform(rng, 0, 1);
        for (double& v : h) v = uniform(rng, -1, 1);
        const NetCache got = net.forward(p, in, ex, h);
        const oracle::NetOut want = oracle::network(net, p, in, ex, h);
        REQUIRE(got.output.size() == want.output.size());
        for (std::size_t i = 0; i < want.output.size(); ++i) {
          CHECK(got.output[i] == doctest::Approx(want.output[i]).epsilon(1e-12));
        }
        for (std::size_t i = 0; i < want.h_next.size(); ++i) {
          CHECK(got.h_next[i] == doctest::Approx(want.h_next[i]).epsilon(1e-12));
        }
        if (attention) {
          for (std::size_t i = 0; i < want.channel_weights.size(); ++i) {
            CHECK(got.channel_weights[i] == doctest::Approx(want.channel_weights[i]).epsilon(1e-12));
          }
          for (std::size_t i = 0; i < want.mask.size(); ++i) {
            CHECK(got.mask.values[i] == doctest::Approx(want.mask[i]).epsilon(1e-12));
          }
        } else {
          CHECK(got.h_next == h);
        }
      }
    }
  }
}

TEST_CASE("attention with zero weights halves the features") {
  NetworkConfig c = gradcheck::reduced_config();
  const AttentionNet net(c, 5, 0);
  Rng rng(4);
  auto p = random_params(net, rng);
  for (const char* name : {"mlp1.w", "mlp1.b", "mlp2.w", "mlp2.b", "gru.wz", "gru.uz", "gru.bz",
                           "gru.wr", "gru.ur", "gru.br", "gru.wn", "gru.un", "gru.bn", "gru.bun",
                           "att.w", "att.b", "sa1.w", "sa1.b", "sa2.w", "sa2.b"}) {
    set_block(net, p, name, 0.0);
  }
  const NetCache k = net.forward(p, random_input(rng, c), {}, std::vector<double>(8, 0.0));
  for (double w : k.channel_weights) CHECK(w == 0.5);
  for (double m : k.mask.values) CHECK(m == 0.5);
  for (std::size_t i = 0; i < k.a2.size(); ++i) CHECK(k.f2.values[i] == 0.25 * k.a2.values[i]);
  for (std::size_t i = 0; i < k.a2.size(); ++i) CHECK(k.f1.values[i] == 0.5 * k.a2.values[i]);
}

TEST_CASE("constant channels give equal max and average descriptors") {
  NetworkConfig c = gradcheck::reduced_config();
  c.conv1 = {2, 4, 1};
  c.conv2 = {4, 4, 1};
  const AttentionNet net(c, 5, 0);
  Rng rng(5);
  const auto p = random_params(net, rng);
  Tensor3 in(2, 8, 8);
  std::fill(in.values.begin(), in.values.begin() + 64, 0.7);
  std::fill(in.values.begin() + 64, in.values.end(), 0.2);
  const NetCache k = net.forward(p, in, {}, std::vector<double>(8, 0.0));
  for (int ch = 0; ch < 4; ++ch) {
    CHECK(k.pool_max[ch] == doctest::Approx(k.pool_avg[ch]).epsilon(1e-14));
  }
}

TEST_CASE("single feature channel: spatial max and mean maps equal the features") {
  NetworkConfig c = gradcheck::reduced_config();
  c.conv2 = {4, 1, 3};
  const AttentionNet net(c, 5, 0);
  Rng rng(6);
  const auto p = random_params(net, rng);
  const NetCache k = net.forward(p, random_input(rng, c), {}, std::vector<double>(8, 0.0));
  for (int i = 0; i < 64; ++i) {
    CHECK(k.s0.values[i] == k.f1.values[i]);
    CHECK(k.s0.values[64 + i] == k.f1.values[i]);
  }
}

TEST_CASE("attention weights lie in (0,1) and never amplify features") {
  NetworkConfig c = gradcheck::reduced_config();
  c.conv1.in_channels = 3;
  const AttentionNet net(c, 5, 0);
  Rng rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    const auto p = random_params(net, rng);
    std::vector<double> h(8);
    for (double& v : h) v = uniform(rng, -1, 1);
    const NetCache k = net.forward(p, random_input(rng, c), {}, h);
    for (double w : k.channel_weights) CHECK((w > 0.0 && w < 1.0));
    for (double m : k.mask.values) CHECK((m > 0.0 && m < 1.0));
    for (std::size_t i = 0; i < k.a2.size(); ++i) {
      CHECK(std::abs(k.f1.values[i]) <= std::abs(k.a2.values[i]));
      CHECK(std::abs(k.f2.values[i]) <= std::abs(k.f1.values[i]));
    }
  }
}

TEST_CASE("actor and critic outputs") {
  const NetworkConfig cfg;
  ActorCritic ac(cfg);
  CHECK(ac.actor.outputs() == 5);
  CHECK(ac.actor.extra_inputs() == 0);
  CHECK(ac.critic.outputs() == 1);
  CHECK(ac.critic.extra_inputs() == 5);
  NetworkConfig no_pi = cfg;
  no_pi.critic_uses_policy = false;
  CHECK(ActorCritic(no_pi).critic.extra_inputs() == 0);

  Rng ra(1), rc(2), rng(3);
  ac.init(ra, rc);
  const std::array<bool, kActionCount> all{true, true, true, true, true};
  const std::vector<double> h0(cfg.hidden_size, 0.0);
  for (int trial = 0; trial < 20; ++trial) {
    const Tensor3 in = random_input(rng, cfg);
    const NetCache a = ac.actor.forward(ac.actor_params, in, {}, h0);
    const auto pi = masked_softmax(a.output, all);
    CHECK(std::accumulate(pi.begin(), pi.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-12));
    const NetCache a2 = ac.actor.forward(ac.actor_params, in, {}, h0);
    CHECK(a2.output == a.output);
    const NetCache v = ac.critic.forward(ac.critic_params, in, pi, h0);
    CHECK(std::isfinite(v.output[0]));
  }

  // All-zero weights: uniform policy and zero value.
  std::fill(ac.actor_params.begin(), ac.actor_params.end(), 0.0);
  std::fill(ac.critic_params.begin(), ac.critic_params.end(), 0.0);
  const Tensor3 in = random_input(rng, cfg);
  const auto pi = masked_softmax(ac.actor.forward(ac.actor_params, in, {}, h0).output, all);
  for (double q : pi) CHECK(q == doctest::Approx(0.2).epsilon(1e-15));
  CHECK(ac.critic.forward(ac.critic_params, in, pi, h0).output[0] == 0.0);
}

TEST_CASE("critic value is finite over random draws") {
  NetworkConfig c = gradcheck::reduced_config();
  c.conv1.in_channels = 3;
  ActorCritic ac(c);
  Rng rng(8);
  for (int i = 0; i < 1000; ++i) {
    Rng a(i), b(i + 7919);
    ac.init(a, b);
    std::array<double, kActionCount> pi{};
    for (double& q : pi) q = 0.2;
    std::vector<double> h(c.hidden_size);
    for (double& v : h) v = uniform(rng, -1, 1);
    CHECK(std::isfinite(ac.critic.forward(ac.critic_params, random_input(rng, c), pi, h).output[0]));
  }
}

TEST_CASE("masked softmax and entropy") {
  const std::vector<double> logits{1.0, 2.0, 3.0, 0.5, -1.0};
  const auto pi = masked_softmax(logits, {true, false, true, true, false});
  CHECK(pi[1] == 0.0);
  CHECK(pi[4] == 0.0);
  CHECK(pi[0] + pi[2] + pi[3] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(pi[2] / pi[0] == doctest::Approx(std::exp(2.0)).epsilon(1e-12));
  const auto big = masked_softmax(std::vector<double>{1000.0, 0, 0, 0, 0}, {true, true, true, true, true});
  CHECK(big[0] == 1.0);
  std::array<double, kActionCount> u{};
  u.fill(0.2);
  CHECK(masked_entropy(u) == doctest::Approx(std::log(5.0)).epsilon(1e-14));
  CHECK(masked_entropy({1.0, 0, 0, 0, 0}) == 0.0);
}

TEST_CASE("shape errors and backward before forward") {
  const NetworkConfig c = gradcheck::reduced_config();
  const AttentionNet net(c, 5, 2);
  Rng rng(9);
  const auto p = random_params(net, rng);
  const std::vector<double> h(8, 0.0), ex(2, 0.0);
  CHECK_THROWS_AS(net.forward(p, Tensor3(3, 8, 8), ex, h), DimensionError);
  CHECK_THROWS_AS(net.forward(p, Tensor3(2, 8, 7), ex, h), DimensionError);
  CHECK_THROWS_AS(net.forward(p, Tensor3(2, 8, 8), {}, h), DimensionError);
  CHECK_THROWS_AS(net.forward(p, Tensor3(2, 8, 8), ex, std::vector<double>(7)), DimensionError);
  CHECK_THROWS_AS(net.forward(std::vector<double>(4), Tensor3(2, 8, 8), ex, h), DimensionError);
  std::vector<double> g(net.param_count(), 0.0);
  CHECK_THROWS_AS(net.backward(p, NetCache{}, std::vector<double>(5), h, g), LifecycleError);
}

TEST_CASE("hand derivative of a scalar network") {
  const NetworkConfig c = tiny_scalar();
  const AttentionNet net(c, 1, 0);
  std::vector<double> p(net.param_count(), 0.0);
  const double w = 0.8, x = 1.7;
  set_block(net, p, "conv1.w", w);
  set_block(net, p, "conv2.w", 1.0);
  set_block(net, p, "head.w", 1.0);
  Tensor3 in(1, 1, 1);
  in.values[0] = x;
  const std::vector<double> h(c.hidden_size, 0.0);
  const NetCache k = net.forward(p, in, {}, h);
  const double f = k.output[0];
  CHECK(f == doctest::Approx(w * x).epsilon(1e-15));
  std::vector<double> g(net.param_count(), 0.0);
  const std::vector<double> d_out{2.0 * f};  // loss = f^2
  net.backward(p, k, d_out, std::vector<double>(c.hidden_size, 0.0), g);
  CHECK(g[net.layout().find("conv1.w").offset] == doctest::Approx(2.0 * f * x).epsilon(1e-14));
}

TEST_CASE("parameters the loss does not depend on get exactly zero gradient") {
  NetworkConfig c = gradcheck::reduced_config();
  const AttentionNet net(c, 5, 0);
  Rng rng(10);
  const auto p = random_params(net, rng);
  std::vector<double> h(8), dh(8);
  for (double& v : h) v = uniform(rng, -1, 1);
  for (double& v : dh) v = uniform(rng, -1, 1);
  const NetCache k = net.forward(p, random_input(rng, c), {}, h);
  std::vector<double> g(net.param_count(), 0.0);
  // Only h_next enters the loss: attention logits, spatial attention and head are unused.
  net.backward(p, k, std::vector<double>(5, 0.0), dh, g);
  for (const char* name : {"att.w", "att.b", "sa1.w", "sa1.b", "sa2.w", "sa2.b", "head.w", "head.b"}) {
    const auto& b = net.layout().find(name);
    for (std::size_t i = b.offset; i < b.offset + b.size; ++i) CHECK(g[i] == 0.0);
  }
  double reached = 0.0;
  const auto& conv = net.layout().find("conv1.w");
  for (std::size_t i = conv.offset; i < conv.offset + conv.size; ++i) reached += std::abs(g[i]);
  CHECK(reached > 0.0);
}

TEST_CASE("finite-difference gradient check on the reduced network") {
  Rng rng(11);
  for (bool attention : {true, false}) {
    for (int extra : {0, 5}) {
      NetworkConfig c = gradcheck::reduced_config();
      c.attention = attention;
      const AttentionNet net(c, extra ? 1 : 5, extra);
      const gradcheck::Case k = gradcheck::draw(net, rng, 1e-4);
      const gradcheck::Result r = gradcheck::check(net, k, 1e-5, 1e-4);
      INFO("attention=" << attention << " extra=" << extra << " worst=" << r.worst);
      CHECK(r.checked == net.param_count());
      CHECK(r.failed == 0);
      CHECK(r.h_failed == 0);
    }
  }
}

TEST_CASE("forward and backward are bit-reproducible") {
  NetworkConfig c = gradcheck::reduced_config();
  const AttentionNet net(c, 5, 0);
  Rng rng(12);
  const gradcheck::Case k = gradcheck::draw(net, rng, 0.0);
  auto run = [&] {
    const NetCache cache = net.forward(k.params, k.input, k.extra, k.h);
    std::vector<double> g(net.param_count(), 0.0), dh(8, 0.0);
    net.backward(k.params, cache, k.d_out, k.d_h, g, dh);
    g.insert(g.end(), dh.begin(), dh.end());
    g.insert(g.end(), cache.output.begin(), cache.output.end());
    return g;
  };
  CHECK(run() == run());
}

TEST_CASE("after a recurrent reset the output depends only on the current observation") {
  NetworkConfig c = gradcheck::reduced_config();
  c.conv1.in_channels = 3;
  const AttentionNet net(c, 5, 0);
  Rng rng(13);
  const auto p = random_params(net, rng);
  std::vector<Tensor3> history;
  for (int i = 0; i < 6; ++i) history.push_back(random_input(rng, c));
  const Tensor3 probe = random_input(rng, c);

  auto run = [&](const std::vector<Tensor3>& seq) {
    RecurrentState s = RecurrentState::zeros(c.hidden_size);
    for (const auto& obs : seq) s.hidden = net.forward(p, obs, {}, s.hidden).h_next;
    s = RecurrentState::zeros(c.hidden_size);  // episode boundary
    return net.forward(p, probe, {}, s.hidden).output;
  };
  auto permuted = history;
  std::reverse(permuted.begin(), permuted.end());
  std::rotate(permuted.begin(), permuted.begin() + 2, permuted.end());
  const auto a = run(history);
  CHECK(a == run(permuted));
  CHECK(a == run({}));

  // Without the reset, history does matter.
  RecurrentState s = RecurrentState::zeros(c.hidden_size);
  for (const auto& obs : history) s.hidden = net.forward(p, obs, {}, s.hidden).h_next;
  CHECK(net.forward(p, probe, {}, s.hidden).output != a);
}
