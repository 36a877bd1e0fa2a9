#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <vector>

namespace hoidet {

// Dense channels-first volume (c x h x w), row-major within a channel.
template <typename T>
struct Tensor3 {
  int c = 0, h = 0, w = 0;
  std::vector<T> v;

  Tensor3() = default;
  Tensor3(int c_, int h_, int w_)
      : c(c_), h(h_), w(w_), v(std::size_t(c_) * h_ * w_, T(0)) {}

  std::size_t size() const { return v.size(); }
  T* plane(int ci) { return v.data() + std::size_t(ci) * h * w; }
  const T* plane(int ci) const { return v.data() + std::size_t(ci) * h * w; }
  T& at(int ci, int y, int x) { return v[(std::size_t(ci) * h + y) * w + x]; }
  T at(int ci, int y, int x) const {
    return v[(std::size_t(ci) * h + y) * w + x];
  }
  void fill(T value) { std::fill(v.begin(), v.end(), value); }
  bool same_shape(const Tensor3& o) const {
    return c == o.c && h == o.h && w == o.w;
  }
  bool all_finite() const {
    for (T x : v)
      if (!std::isfinite(double(x))) return false;
    return true;
  }
};

// Dense h x w map.
template <typename T>
struct Grid2 {
  int h = 0, w = 0;
  std::vector<T> v;

  Grid2() = default;
  Grid2(int h_, int w_) : h(h_), w(w_), v(std::size_t(h_) * w_, T(0)) {}

  std::size_t size() const { return v.size(); }
  T& at(int y, int x) { return v[std::size_t(y) * w + x]; }
  T at(int y, int x) const { return v[std::size_t(y) * w + x]; }
  void fill(T value) { std::fill(v.begin(), v.end(), value); }
  bool same_shape(const Grid2& o) const { return h == o.h && w == o.w; }
};

using TensorF = Tensor3<float>;

// Attention map: rrpn output, sigmoid range (0,1), grid sized.
template <typename T>
using AttentionMapT = Grid2<T>;
using AttentionMap = Grid2<float>;

// Training target for the attention map: peak-1 Gaussian rendered from a box.
using TargetMap = Grid2<float>;

// Thresholded attention map.
using BinaryMask = Grid2<std::uint8_t>;

}  // namespace hoidet
