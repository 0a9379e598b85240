#pragma once

#include <cstddef>
#include <vector>

namespace riskdrive {

// Dense (channels, height, width) tensor, row-major within a channel.
struct Tensor3 {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<double> values;

  Tensor3() = default;
  Tensor3(int c, int h, int w) : channels(c), height(h), width(w), values(std::size_t(c) * h * w, 0.0) {}

  std::size_t plane() const { return static_cast<std::size_t>(height) * width; }
  std::size_t size() const { return values.size(); }
  double& at(int c, int y, int x) { return values[c * plane() + std::size_t(y) * width + x]; }
  double at(int c, int y, int x) const { return values[c * plane() + std::size_t(y) * width + x]; }

  bool operator==(const Tensor3&) const = default;
};

}  // namespace riskdrive
