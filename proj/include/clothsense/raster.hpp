#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "clothsense/error.hpp"

namespace clothsense {

/// Row-major 2D grid. x indexes columns, y indexes rows.
template <typename T>
class Raster {
 public:
  Raster() = default;
  Raster(int width, int height, T fill = T{})
      : width_(width), height_(height),
        values_(static_cast<std::size_t>(checked(width) * checked(height)), fill) {}

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }

  bool contains(int x, int y) const {
    return x >= 0 && y >= 0 && x < width_ && y < height_;
  }

  T& operator()(int x, int y) { return values_[index(x, y)]; }
  const T& operator()(int x, int y) const { return values_[index(x, y)]; }

  std::span<T> values() { return values_; }
  std::span<const T> values() const { return values_; }

  bool operator==(const Raster&) const = default;

 private:
  static int checked(int n) {
    if (n < 0) throw SizeError("raster dimensions must be non-negative");
    return n;
  }
  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(x);
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<T> values_;
};

using RasterD = Raster<double>;
using Mask = Raster<unsigned char>;

}  // namespace clothsense
