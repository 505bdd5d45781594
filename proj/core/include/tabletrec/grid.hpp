#pragma once

#include <cassert>
#include <cstdint>
#include <vector>

#include "tabletrec/vec.hpp"

namespace tabletrec {

// Dense row-major 2D buffer. at(row, col) with row 0 at the top.
template <class T>
struct Grid {
  int width = 0;
  int height = 0;
  std::vector<T> data;

  Grid() = default;
  Grid(int h, int w, const T& fill = T{}) : width(w), height(h), data(size_t(w) * h, fill) {}

  bool empty() const { return data.empty(); }
  size_t size() const { return data.size(); }
  bool in_bounds(int y, int x) const { return x >= 0 && x < width && y >= 0 && y < height; }

  T& at(int y, int x) {
    assert(in_bounds(y, x));
    return data[size_t(y) * width + x];
  }
  const T& at(int y, int x) const {
    assert(in_bounds(y, x));
    return data[size_t(y) * width + x];
  }

  void fill(const T& v) { data.assign(data.size(), v); }
};

using Image = Grid<Vec3>;        // RGB, values nominally in [0,1]
using GridF = Grid<double>;
using GridI = Grid<int32_t>;
using GridU8 = Grid<uint8_t>;

}  // namespace tabletrec
