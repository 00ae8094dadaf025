#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include "murmur/error.hpp"

namespace murmur::nn {

// Dense NCHW tensor. Lower-rank data uses trailing 1s (a batch of logits is N x C x 1 x 1).
template <class T>
struct Tensor {
  std::array<int, 4> shape{0, 0, 0, 0};
  std::vector<T> data;

  Tensor() = default;
  Tensor(int n, int c, int h, int w, T fill = T(0))
      : shape{n, c, h, w}, data(static_cast<std::size_t>(n) * c * h * w, fill) {}

  int n() const { return shape[0]; }
  int c() const { return shape[1]; }
  int h() const { return shape[2]; }
  int w() const { return shape[3]; }
  std::size_t size() const { return data.size(); }
  std::size_t sample_size() const { return static_cast<std::size_t>(c()) * h() * w(); }

  T* sample(int i) { return data.data() + static_cast<std::size_t>(i) * sample_size(); }
  const T* sample(int i) const { return data.data() + static_cast<std::size_t>(i) * sample_size(); }

  T& at(int n_, int c_, int h_, int w_) {
    return data[((static_cast<std::size_t>(n_) * c() + c_) * h() + h_) * w() + w_];
  }
  T at(int n_, int c_, int h_, int w_) const {
    return data[((static_cast<std::size_t>(n_) * c() + c_) * h() + h_) * w() + w_];
  }

  bool operator==(const Tensor&) const = default;
};

}  // namespace murmur::nn
