#include "murmur/nn/layers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <type_traits>

#include "murmur/simd/kernels.hpp"
#include "murmur/simd/reference.hpp"

namespace murmur::nn {

namespace {

template <class T>
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const T* a, std::size_t lda, const T* b, std::size_t ldb,
             T* c, std::size_t ldc) {
  if constexpr (std::is_same_v<T, float>)
    simd::active().gemm_nn(m, n, k, a, lda, b, ldb, c, ldc);
  else
    simd::ref::gemm_nn<T>(m, n, k, a, lda, b, ldb, c, ldc);
}

template <class T>
void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const T* a, std::size_t lda, const T* b, std::size_t ldb,
             T* c, std::size_t ldc) {
  if constexpr (std::is_same_v<T, float>)
    simd::active().gemm_nt(m, n, k, a, lda, b, ldb, c, ldc);
  else
    simd::ref::gemm_nt<T>(m, n, k, a, lda, b, ldb, c, ldc);
}

// col[(c*9 + u*3 + v) * P + i*W + j] = x[c, i+u-1, j+v-1], zero outside.
template <class T>
void im2col3x3(const T* x, int channels, int h, int w, T* col) {
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  for (int c = 0; c < channels; ++c) {
    const T* xc = x + c * plane;
    for (int u = 0; u < 3; ++u)
      for (int v = 0; v < 3; ++v) {
        T* row = col + (static_cast<std::size_t>(c) * 9 + u * 3 + v) * plane;
        for (int i = 0; i < h; ++i) {
          const int si = i + u - 1;
          T* out = row + static_cast<std::size_t>(i) * w;
          if (si < 0 || si >= h) {
            std::fill(out, out + w, T(0));
            continue;
          }
          const T* src = xc + static_cast<std::size_t>(si) * w;
          for (int j = 0; j < w; ++j) {
            const int sj = j + v - 1;
            out[j] = (sj < 0 || sj >= w) ? T(0) : src[sj];
          }
        }
      }
  }
}

template <class T>
void col2im3x3(const T* col, int channels, int h, int w, T* dx) {
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  for (int c = 0; c < channels; ++c) {
    T* dxc = dx + c * plane;
    for (int u = 0; u < 3; ++u)
      for (int v = 0; v < 3; ++v) {
        const T* row = col + (static_cast<std::size_t>(c) * 9 + u * 3 + v) * plane;
        for (int i = 0; i < h; ++i) {
          const int si = i + u - 1;
          if (si < 0 || si >= h) continue;
          const T* in = row + static_cast<std::size_t>(i) * w;
          T* dst = dxc + static_cast<std::size_t>(si) * w;
          for (int j = 0; j < w; ++j) {
            const int sj = j + v - 1;
            if (sj >= 0 && sj < w) dst[sj] += in[j];
          }
        }
      }
  }
}

}  // namespace

template <class T>
Tensor<T> conv3x3_forward(const Tensor<T>& x, std::span<const T> weight, std::span<const T> bias, int out_ch) {
  const int in_ch = x.c();
  if (weight.size() != static_cast<std::size_t>(out_ch) * in_ch * 9 || bias.size() != static_cast<std::size_t>(out_ch))
    throw Error(ErrorCode::ShapeError, "conv3x3: input channels do not match weight shape");
  Tensor<T> y(x.n(), out_ch, x.h(), x.w());
  const std::size_t plane = static_cast<std::size_t>(x.h()) * x.w();
  const std::size_t k = static_cast<std::size_t>(in_ch) * 9;
  std::vector<T> col(k * plane);
  for (int n = 0; n < x.n(); ++n) {
    im2col3x3(x.sample(n), in_ch, x.h(), x.w(), col.data());
    T* yn = y.sample(n);
    for (int o = 0; o < out_ch; ++o) std::fill(yn + o * plane, yn + (o + 1) * plane, bias[o]);
    gemm_nn<T>(static_cast<std::size_t>(out_ch), plane, k, weight.data(), k, col.data(), plane, yn, plane);
  }
  return y;
}

template <class T>
Tensor<T> conv3x3_backward(const Tensor<T>& x, std::span<const T> weight, int out_ch, const Tensor<T>& dy,
                           std::span<T> dweight, std::span<T> dbias) {
  const int in_ch = x.c();
  const std::size_t plane = static_cast<std::size_t>(x.h()) * x.w();
  const std::size_t k = static_cast<std::size_t>(in_ch) * 9;
  if (dy.c() != out_ch || dy.n() != x.n() || dy.h() != x.h() || dy.w() != x.w())
    throw Error(ErrorCode::ShapeError, "conv3x3 backward: gradient shape mismatch");

  // W^T so that dcol = W^T dy is a plain row-major product.
  std::vector<T> wt(k * static_cast<std::size_t>(out_ch));
  for (int o = 0; o < out_ch; ++o)
    for (std::size_t p = 0; p < k; ++p) wt[p * out_ch + o] = weight[o * k + p];

  Tensor<T> dx(x.n(), in_ch, x.h(), x.w());
  std::vector<T> col(k * plane), dcol(k * plane);
  for (int n = 0; n < x.n(); ++n) {
    const T* dyn = dy.sample(n);
    im2col3x3(x.sample(n), in_ch, x.h(), x.w(), col.data());
    gemm_nt<T>(static_cast<std::size_t>(out_ch), k, plane, dyn, plane, col.data(), plane, dweight.data(), k);
    for (int o = 0; o < out_ch; ++o) {
      T s = 0;
      for (std::size_t p = 0; p < plane; ++p) s += dyn[o * plane + p];
      dbias[o] += s;
    }
    std::fill(dcol.begin(), dcol.end(), T(0));
    gemm_nn<T>(k, plane, static_cast<std::size_t>(out_ch), wt.data(), static_cast<std::size_t>(out_ch), dyn, plane,
               dcol.data(), plane);
    col2im3x3(dcol.data(), in_ch, x.h(), x.w(), dx.sample(n));
  }
  return dx;
}

template <class T>
Tensor<T> relu_forward(const Tensor<T>& x) {
  Tensor<T> y = x;
  for (auto& v : y.data) v = v > T(0) ? v : T(0);
  return y;
}

template <class T>
Tensor<T> relu_backward(const Tensor<T>& x, const Tensor<T>& dy) {
  Tensor<T> dx = dy;
  for (std::size_t i = 0; i < dx.size(); ++i)
    if (!(x.data[i] > T(0))) dx.data[i] = T(0);
  return dx;
}

template <class T>
Tensor<T> maxpool2x2_forward(const Tensor<T>& x, std::vector<std::uint32_t>* argmax) {
  if (x.h() < 2 || x.w() < 2) throw Error(ErrorCode::ShapeError, "maxpool2x2 needs H, W >= 2");
  const int oh = x.h() / 2, ow = x.w() / 2;
  Tensor<T> y(x.n(), x.c(), oh, ow);
  if (argmax) argmax->assign(y.size(), 0);
  std::size_t out = 0;
  for (int n = 0; n < x.n(); ++n)
    for (int c = 0; c < x.c(); ++c) {
      const std::size_t base = (static_cast<std::size_t>(n) * x.c() + c) * x.h() * x.w();
      for (int i = 0; i < oh; ++i)
        for (int j = 0; j < ow; ++j, ++out) {
          std::size_t best = base + static_cast<std::size_t>(2 * i) * x.w() + 2 * j;
          for (int u = 0; u < 2; ++u)
            for (int v = 0; v < 2; ++v) {
              const std::size_t idx = base + static_cast<std::size_t>(2 * i + u) * x.w() + 2 * j + v;
              if (x.data[idx] > x.data[best]) best = idx;
            }
          y.data[out] = x.data[best];
          if (argmax) (*argmax)[out] = static_cast<std::uint32_t>(best);
        }
    }
  return y;
}

template <class T>
Tensor<T> maxpool2x2_backward(const Tensor<T>& x, const Tensor<T>& dy, const std::vector<std::uint32_t>& argmax) {
  Tensor<T> dx(x.n(), x.c(), x.h(), x.w());
  for (std::size_t i = 0; i < dy.size(); ++i) dx.data[argmax[i]] += dy.data[i];
  return dx;
}

template <class T>
Tensor<T> global_avg_pool_forward(const Tensor<T>& x) {
  if (x.h() < 1 || x.w() < 1) throw Error(ErrorCode::ShapeError, "global_avg_pool needs H, W >= 1");
  Tensor<T> y(x.n(), x.c(), 1, 1);
  const std::size_t plane = static_cast<std::size_t>(x.h()) * x.w();
  for (std::size_t nc = 0; nc < y.size(); ++nc) {
    T s = 0;
    const T* p = x.data.data() + nc * plane;
    for (std::size_t i = 0; i < plane; ++i) s += p[i];
    y.data[nc] = s / static_cast<T>(plane);
  }
  return y;
}

template <class T>
Tensor<T> global_avg_pool_backward(const Tensor<T>& x, const Tensor<T>& dy) {
  Tensor<T> dx(x.n(), x.c(), x.h(), x.w());
  const std::size_t plane = static_cast<std::size_t>(x.h()) * x.w();
  for (std::size_t nc = 0; nc < dy.size(); ++nc) {
    const T g = dy.data[nc] / static_cast<T>(plane);
    std::fill(dx.data.begin() + nc * plane, dx.data.begin() + (nc + 1) * plane, g);
  }
  return dx;
}

template <class T>
Tensor<T> dropout_forward(const Tensor<T>& x, double p, bool active, Rng* rng, std::vector<T>* mask) {
  if (p < 0.0 || p >= 1.0) throw Error(ErrorCode::ConfigError, "dropout p must be in [0, 1)");
  if (!active || p == 0.0) {
    if (mask) mask->assign(x.size(), T(1));
    return x;
  }
  if (!rng) throw Error(ErrorCode::StateError, "active dropout needs an rng");
  const T scale = static_cast<T>(1.0 / (1.0 - p));
  Tensor<T> y = x;
  if (mask) mask->resize(x.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    const T m = uniform01(*rng) < p ? T(0) : scale;
    y.data[i] *= m;
    if (mask) (*mask)[i] = m;
  }
  return y;
}

template <class T>
Tensor<T> dropout_backward(const Tensor<T>& dy, const std::vector<T>& mask) {
  Tensor<T> dx = dy;
  for (std::size_t i = 0; i < dx.size(); ++i) dx.data[i] *= mask[i];
  return dx;
}

template <class T>
Tensor<T> linear_forward(const Tensor<T>& x, std::span<const T> weight, std::span<const T> bias, int out_features) {
  const std::size_t in = x.sample_size();
  if (weight.size() != in * static_cast<std::size_t>(out_features) || bias.size() != static_cast<std::size_t>(out_features))
    throw Error(ErrorCode::ShapeError, "linear: input features do not match weight shape");
  Tensor<T> y(x.n(), out_features, 1, 1);
  for (int n = 0; n < x.n(); ++n)
    for (int o = 0; o < out_features; ++o) y.data[static_cast<std::size_t>(n) * out_features + o] = bias[o];
  gemm_nt<T>(static_cast<std::size_t>(x.n()), static_cast<std::size_t>(out_features), in, x.data.data(), in,
             weight.data(), in, y.data.data(), static_cast<std::size_t>(out_features));
  return y;
}

template <class T>
Tensor<T> linear_backward(const Tensor<T>& x, std::span<const T> weight, int out_features, const Tensor<T>& dy,
                          std::span<T> dweight, std::span<T> dbias) {
  const std::size_t in = x.sample_size();
  Tensor<T> dx(x.n(), x.c(), x.h(), x.w());
  for (int n = 0; n < x.n(); ++n) {
    const T* xn = x.sample(n);
    for (int o = 0; o < out_features; ++o) {
      const T g = dy.data[static_cast<std::size_t>(n) * out_features + o];
      dbias[o] += g;
      T* dw = dweight.data() + o * in;
      for (std::size_t i = 0; i < in; ++i) dw[i] += g * xn[i];
    }
  }
  gemm_nn<T>(static_cast<std::size_t>(x.n()), in, static_cast<std::size_t>(out_features), dy.data.data(),
             static_cast<std::size_t>(out_features), weight.data(), in, dx.data.data(), in);
  return dx;
}

template <class T>
Tensor<T> softmax(const Tensor<T>& logits) {
  Tensor<T> p = logits;
  const std::size_t k = logits.sample_size();
  for (int n = 0; n < logits.n(); ++n) {
    T* row = p.sample(n);
    const T mx = *std::max_element(row, row + k);
    T s = 0;
    for (std::size_t i = 0; i < k; ++i) {
      row[i] = std::exp(row[i] - mx);
      s += row[i];
    }
    for (std::size_t i = 0; i < k; ++i) row[i] /= s;
  }
  return p;
}

template <class T>
T cross_entropy(std::span<const T> probs, int label) {
  if (label < 0 || static_cast<std::size_t>(label) >= probs.size())
    throw Error(ErrorCode::LabelError, "label " + std::to_string(label) + " out of range");
  return -std::log(std::max(probs[label], std::numeric_limits<T>::min()));
}

#define MURMUR_INSTANTIATE_LAYERS(T)                                                                          \
  template Tensor<T> conv3x3_forward<T>(const Tensor<T>&, std::span<const T>, std::span<const T>, int);       \
  template Tensor<T> conv3x3_backward<T>(const Tensor<T>&, std::span<const T>, int, const Tensor<T>&,         \
                                         std::span<T>, std::span<T>);                                         \
  template Tensor<T> relu_forward<T>(const Tensor<T>&);                                                       \
  template Tensor<T> relu_backward<T>(const Tensor<T>&, const Tensor<T>&);                                    \
  template Tensor<T> maxpool2x2_forward<T>(const Tensor<T>&, std::vector<std::uint32_t>*);                    \
  template Tensor<T> maxpool2x2_backward<T>(const Tensor<T>&, const Tensor<T>&,                               \
                                            const std::vector<std::uint32_t>&);                               \
  template Tensor<T> global_avg_pool_forward<T>(const Tensor<T>&);                                            \
  template Tensor<T> global_avg_pool_backward<T>(const Tensor<T>&, const Tensor<T>&);                         \
  template Tensor<T> dropout_forward<T>(const Tensor<T>&, double, bool, Rng*, std::vector<T>*);               \
  template Tensor<T> dropout_backward<T>(const Tensor<T>&, const std::vector<T>&);                            \
  template Tensor<T> linear_forward<T>(const Tensor<T>&, std::span<const T>, std::span<const T>, int);        \
  template Tensor<T> linear_backward<T>(const Tensor<T>&, std::span<const T>, int, const Tensor<T>&,          \
                                        std::span<T>, std::span<T>);                                          \
  template Tensor<T> softmax<T>(const Tensor<T>&);                                                            \
  template T cross_entropy<T>(std::span<const T>, int);

MURMUR_INSTANTIATE_LAYERS(float)
MURMUR_INSTANTIATE_LAYERS(double)

}  // namespace murmur::nn
