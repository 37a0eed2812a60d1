#pragma once

#include <cstddef>
#include <vector>

#include "iucl/errors.hpp"

namespace iucl {

// Row-major raster with values in [0,1] (saliency, attention or gray image).
struct Grid {
  std::size_t h = 0;
  std::size_t w = 0;
  std::vector<double> values;

  Grid() = default;
  Grid(std::size_t height, std::size_t width, double fill = 0.0)
      : h(height), w(width), values(height * width, fill) {}

  double& at(std::size_t y, std::size_t x) { return values[y * w + x]; }
  double at(std::size_t y, std::size_t x) const { return values[y * w + x]; }

  friend bool operator==(const Grid&, const Grid&) = default;
};

// Mean over rectangular blocks; output is out_h x out_w. Each output cell
// averages the input pixels whose centers fall inside it.
Grid downsample(const Grid& g, std::size_t out_h, std::size_t out_w);

}  // namespace iucl
