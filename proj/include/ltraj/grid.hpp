#pragma once

#include <algorithm>
#include <cassert>
#include <cmath>
#include <vector>

namespace ltraj {

/// Row-major 2D value grid. The basic storage for frames, depth maps and
/// flow components.
template <typename T>
class Grid {
 public:
  Grid() = default;
  Grid(int width, int height, T fill = T{})
      : width_(width), height_(height),
        data_(static_cast<size_t>(width) * height, fill) {}

  int width() const { return width_; }
  int height() const { return height_; }
  bool empty() const { return data_.empty(); }

  bool in_bounds(int x, int y) const {
    return x >= 0 && x < width_ && y >= 0 && y < height_;
  }

  T& at(int x, int y) {
    assert(in_bounds(x, y));
    return data_[static_cast<size_t>(y) * width_ + x];
  }
  const T& at(int x, int y) const {
    assert(in_bounds(x, y));
    return data_[static_cast<size_t>(y) * width_ + x];
  }

  /// Access with coordinates clamped to the border (edge replication).
  const T& at_clamped(int x, int y) const {
    x = std::clamp(x, 0, width_ - 1);
    y = std::clamp(y, 0, height_ - 1);
    return data_[static_cast<size_t>(y) * width_ + x];
  }

  std::vector<T>& data() { return data_; }
  const std::vector<T>& data() const { return data_; }

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<T> data_;
};

/// Bilinear sample with border clamping. NaN cells propagate: a sample whose
/// support touches a NaN returns NaN.
inline double bilinear(const Grid<float>& g, double x, double y) {
  const int x0 = static_cast<int>(std::floor(x));
  const int y0 = static_cast<int>(std::floor(y));
  const double fx = x - x0;
  const double fy = y - y0;
  const double v00 = g.at_clamped(x0, y0);
  const double v10 = g.at_clamped(x0 + 1, y0);
  const double v01 = g.at_clamped(x0, y0 + 1);
  const double v11 = g.at_clamped(x0 + 1, y0 + 1);
  return (1.0 - fy) * ((1.0 - fx) * v00 + fx * v10) +
         fy * ((1.0 - fx) * v01 + fx * v11);
}

}  // namespace ltraj
