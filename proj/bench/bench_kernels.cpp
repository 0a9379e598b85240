// Serial vs OpenMP timings for the conv kernels and risk rasterization.
//   bench_kernels [repeats] [config.json]
#include <omp.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <string>
#include <vector>

#include "riskdrive/config.hpp"
#include "riskdrive/kernels.hpp"
#include "riskdrive/risk_field.hpp"
#include "riskdrive/rng.hpp"
#include "riskdrive/sim.hpp"

using namespace riskdrive;
namespace k = riskdrive::kernels;

namespace {

double best_ms(int repeats, const std::function<void()>& fn) {
  fn();  // warm up
  double best = 1e300;
  for (int r = 0; r < repeats; ++r) {
    auto t0 = std::chrono::steady_clock::now();
    fn();
    std::chrono::duration<double, std::milli> dt = std::chrono::steady_clock::now() - t0;
    best = std::min(best, dt.count());
  }
  return best;
}

void row(const std::string& name, double serial, double parallel) {
  std::printf("%-28s %10.3f %10.3f %8.2fx\n", name.c_str(), serial, parallel,
              serial / parallel);
}

std::vector<double> filled(long n, Rng& rng) {
  std::vector<double> v(n);
  for (auto& x : v) x = uniform(rng, -1.0, 1.0);
  return v;
}

void bench_conv(const k::ConvShape& s, int repeats) {
  Rng rng(11);
  auto in = filled(s.input_size(), rng);
  auto w = filled(s.weight_count(), rng);
  auto b = filled(s.out_channels, rng);
  auto dout = filled(s.output_size(), rng);
  std::vector<double> out(s.output_size()), din(s.input_size()), dw(w.size()), db(b.size());

  const std::string tag = std::to_string(s.in_channels) + "->" + std::to_string(s.out_channels) +
                          " k" + std::to_string(s.kernel) + " " + std::to_string(s.height) +
                          "x" + std::to_string(s.width);
  row("conv fwd " + tag,
      best_ms(repeats, [&] { k::conv2d_forward_serial(s, in, w, b, out); }),
      best_ms(repeats, [&] { k::conv2d_forward(s, in, w, b, out); }));
  row("conv bwd " + tag,
      best_ms(repeats, [&] { k::conv2d_backward_serial(s, in, w, dout, din, dw, db); }),
      best_ms(repeats, [&] { k::conv2d_backward(s, in, w, dout, din, dw, db); }));
}

}  // namespace

int main(int argc, char** argv) {
  const int repeats = argc > 1 ? std::atoi(argv[1]) : 20;
  const ExperimentConfig cfg = argc > 2 ? load_config(argv[2]) : ExperimentConfig{};

  std::printf("threads %d, best of %d\n", omp_get_max_threads(), repeats);
  std::printf("%-28s %10s %10s %9s\n", "kernel", "serial ms", "omp ms", "speedup");

  const int h = cfg.grid.height_cells, wd = cfg.grid.width_cells;
  bench_conv({3, 8, 3, h, wd}, repeats);
  bench_conv({8, 16, 3, h, wd}, repeats);
  bench_conv({16, 32, 5, 2 * h, 2 * wd}, repeats);

  const World world = reset(cfg.scenario, stream_seed(5, "bench"));
  row("rasterize " + std::to_string(h) + "x" + std::to_string(wd),
      best_ms(repeats, [&] { rasterize_serial(world, cfg.risk, cfg.grid); }),
      best_ms(repeats, [&] { rasterize(world, cfg.risk, cfg.grid); }));
  GridSpec big = cfg.grid;
  big.width_cells *= 4;
  big.height_cells *= 4;
  big.cell_size /= 4;
  row("rasterize " + std::to_string(big.height_cells) + "x" + std::to_string(big.width_cells),
      best_ms(repeats, [&] { rasterize_serial(world, cfg.risk, big); }),
      best_ms(repeats, [&] { rasterize(world, cfg.risk, big); }));
  return 0;
}
