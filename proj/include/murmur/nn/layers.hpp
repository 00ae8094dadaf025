#pragma once

// Layer kernels shared by the float engine and the float64 reference path used
// for finite-difference checks. Weights follow the (out, in, kH, kW) layout.

#include <cstdint>
#include <span>
#include <vector>

#include "murmur/nn/tensor.hpp"
#include "murmur/random.hpp"

namespace murmur::nn {

// 3x3 convolution, stride 1, zero padding 1.
template <class T>
Tensor<T> conv3x3_forward(const Tensor<T>& x, std::span<const T> weight, std::span<const T> bias, int out_ch);

// Accumulates into dweight/dbias; returns dx.
template <class T>
Tensor<T> conv3x3_backward(const Tensor<T>& x, std::span<const T> weight, int out_ch, const Tensor<T>& dy,
                           std::span<T> dweight, std::span<T> dbias);

template <class T>
Tensor<T> relu_forward(const Tensor<T>& x);
template <class T>
Tensor<T> relu_backward(const Tensor<T>& x, const Tensor<T>& dy);

// 2x2 stride-2 max pooling; odd trailing rows/columns are dropped. argmax holds
// the flat input index chosen for every output element.
template <class T>
Tensor<T> maxpool2x2_forward(const Tensor<T>& x, std::vector<std::uint32_t>* argmax = nullptr);
template <class T>
Tensor<T> maxpool2x2_backward(const Tensor<T>& x, const Tensor<T>& dy, const std::vector<std::uint32_t>& argmax);

template <class T>
Tensor<T> global_avg_pool_forward(const Tensor<T>& x);
template <class T>
Tensor<T> global_avg_pool_backward(const Tensor<T>& x, const Tensor<T>& dy);

// Inverted dropout. With active == false (eval) or p == 0 this is the identity.
// The scaled keep-mask (0 or 1/(1-p)) is written to mask when provided.
template <class T>
Tensor<T> dropout_forward(const Tensor<T>& x, double p, bool active, Rng* rng, std::vector<T>* mask = nullptr);
template <class T>
Tensor<T> dropout_backward(const Tensor<T>& dy, const std::vector<T>& mask);

// y = x W^T + b over the flattened per-sample features.
template <class T>
Tensor<T> linear_forward(const Tensor<T>& x, std::span<const T> weight, std::span<const T> bias, int out_features);
template <class T>
Tensor<T> linear_backward(const Tensor<T>& x, std::span<const T> weight, int out_features, const Tensor<T>& dy,
                          std::span<T> dweight, std::span<T> dbias);

// Row-wise softmax with max subtraction.
template <class T>
Tensor<T> softmax(const Tensor<T>& logits);

template <class T>
T cross_entropy(std::span<const T> probs, int label);

}  // namespace murmur::nn
