#pragma once

#include <span>
#include <vector>

#include "murmur/nn/network.hpp"

namespace murmur::nn {

struct AdamWConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

// One decoupled-weight-decay Adam update of a single tensor. step is 1-based.
//   p <- p - lr * m_hat / (sqrt(v_hat) + eps) - lr * wd * p
template <class T>
void adamw_update(std::span<T> param, std::span<const T> grad, std::span<T> m, std::span<T> v, int step,
                  const AdamWConfig& config);

template <class T>
class AdamW {
 public:
  explicit AdamW(AdamWConfig config = {}) : config_(config) {}

  void step(std::vector<Param<T>>& params);
  int steps_taken() const { return step_; }

 private:
  AdamWConfig config_;
  int step_ = 0;
  std::vector<std::vector<T>> m_, v_;
};

}  // namespace murmur::nn
