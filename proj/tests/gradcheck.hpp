#pragma once

// Central finite-difference checks on the float64 reference path. Relative
// error is |a - n| / max(|a|, |n|, floor); the floor keeps gradients that are
// numerically zero from dividing by rounding noise.

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "murmur/nn/layers.hpp"
#include "murmur/nn/network.hpp"
#include "murmur/random.hpp"

namespace gradcheck {

using murmur::Rng;
using murmur::nn::Tensor;

inline constexpr double kStep = 1e-4;
inline constexpr double kFloor = 1e-5;

inline double rel_error(double analytic, double numeric) {
  return std::fabs(analytic - numeric) / std::max({std::fabs(analytic), std::fabs(numeric), kFloor});
}

struct Report {
  std::string name;
  double max_rel = 0;
  int checked = 0;
  int kinks = 0;  // coordinates skipped at a kink
};

// Central difference at kStep/10, or nullopt when it disagrees with the one at
// kStep: the interval then straddles a ReLU or max-pool kink where the finite
// difference says nothing about the gradient at the point.
inline std::optional<double> numeric_derivative(double& value, const std::function<double()>& loss, Report& rep) {
  const double keep = value;
  auto central = [&](double h) {
    value = keep + h;
    const double up = loss();
    value = keep - h;
    const double down = loss();
    value = keep;
    return (up - down) / (2 * h);
  };
  const double coarse = central(kStep), fine = central(kStep / 10);
  if (rel_error(coarse, fine) <= 1e-5) return fine;
  ++rep.kinks;
  return std::nullopt;
}

inline Tensor<double> random_tensor(int n, int c, int h, int w, std::uint64_t seed) {
  Rng rng(seed);
  Tensor<double> t(n, c, h, w);
  for (auto& v : t.data) v = murmur::gaussian(rng);
  return t;
}

inline std::vector<double> random_vector(std::size_t n, std::uint64_t seed, double scale = 1.0) {
  Rng rng(seed);
  std::vector<double> v(n);
  for (auto& x : v) x = scale * murmur::gaussian(rng);
  return v;
}

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// Checks d(sum(r * f(values)))/d(values) at every index against analytic.
inline void check_values(Report& rep, std::vector<double>& values, const std::vector<double>& analytic,
                         const std::function<double()>& loss, std::size_t stride = 1) {
  for (std::size_t i = 0; i < values.size(); i += stride) {
    if (const auto n = numeric_derivative(values[i], loss, rep)) {
      rep.max_rel = std::max(rep.max_rel, rel_error(analytic[i], *n));
      ++rep.checked;
    }
  }
}

// One report per layer kind, each checked in isolation with a random upstream gradient.
inline std::vector<Report> check_layers() {
  namespace nn = murmur::nn;
  std::vector<Report> out;

  {  // conv3x3: input, weight, bias
    Report rep{"conv3x3"};
    auto x = random_tensor(2, 2, 5, 6, 1);
    auto w = random_vector(3 * 2 * 9, 2);
    auto b = random_vector(3, 3);
    const auto r = random_vector(2 * 3 * 5 * 6, 4);
    auto loss = [&] { return dot(nn::conv3x3_forward<double>(x, w, b, 3).data, r); };
    Tensor<double> dy(2, 3, 5, 6);
    dy.data = r;
    std::vector<double> dw(w.size(), 0.0), db(b.size(), 0.0);
    const auto dx = nn::conv3x3_backward<double>(x, w, 3, dy, dw, db);
    check_values(rep, x.data, dx.data, loss);
    check_values(rep, w, dw, loss);
    check_values(rep, b, db, loss);
    out.push_back(rep);
  }
  {  // relu: keep inputs away from the kink
    Report rep{"relu"};
    auto x = random_tensor(2, 2, 4, 4, 5);
    for (auto& v : x.data)
      if (std::fabs(v) < 0.05) v += 0.1;
    const auto r = random_vector(x.size(), 6);
    Tensor<double> dy = x;
    dy.data = r;
    const auto dx = nn::relu_backward(x, dy);
    check_values(rep, x.data, dx.data, [&] { return dot(nn::relu_forward(x).data, r); });
    out.push_back(rep);
  }
  {  // maxpool on an odd-sized map with distinct values
    Report rep{"maxpool2x2"};
    auto x = random_tensor(2, 2, 5, 7, 7);
    for (std::size_t i = 0; i < x.size(); ++i) x.data[i] += 0.01 * static_cast<double>(i);
    std::vector<std::uint32_t> arg;
    const auto y = nn::maxpool2x2_forward(x, &arg);
    const auto r = random_vector(y.size(), 8);
    Tensor<double> dy = y;
    dy.data = r;
    const auto dx = nn::maxpool2x2_backward(x, dy, arg);
    check_values(rep, x.data, dx.data, [&] { return dot(nn::maxpool2x2_forward(x).data, r); });
    out.push_back(rep);
  }
  {
    Report rep{"global_avg_pool"};
    auto x = random_tensor(2, 3, 4, 5, 9);
    const auto r = random_vector(6, 10);
    Tensor<double> dy(2, 3, 1, 1);
    dy.data = r;
    const auto dx = nn::global_avg_pool_backward(x, dy);
    check_values(rep, x.data, dx.data, [&] { return dot(nn::global_avg_pool_forward(x).data, r); });
    out.push_back(rep);
  }
  {  // dropout with a fixed mask
    Report rep{"dropout"};
    auto x = random_tensor(2, 2, 3, 3, 11);
    const auto r = random_vector(x.size(), 12);
    auto run = [&](std::vector<double>* mask) {
      Rng rng(13);
      return nn::dropout_forward(x, 0.3, true, &rng, mask);
    };
    std::vector<double> mask;
    run(&mask);
    Tensor<double> dy = x;
    dy.data = r;
    const auto dx = nn::dropout_backward(dy, mask);
    check_values(rep, x.data, dx.data, [&] { return dot(run(nullptr).data, r); });
    out.push_back(rep);
  }
  {
    Report rep{"linear"};
    auto x = random_tensor(2, 5, 1, 1, 14);
    auto w = random_vector(3 * 5, 15);
    auto b = random_vector(3, 16);
    const auto r = random_vector(6, 17);
    Tensor<double> dy(2, 3, 1, 1);
    dy.data = r;
    std::vector<double> dw(w.size(), 0.0), db(b.size(), 0.0);
    const auto dx = nn::linear_backward<double>(x, w, 3, dy, dw, db);
    auto loss = [&] { return dot(nn::linear_forward<double>(x, w, b, 3).data, r); };
    check_values(rep, x.data, dx.data, loss);
    check_values(rep, w, dw, loss);
    check_values(rep, b, db, loss);
    out.push_back(rep);
  }
  {  // softmax + cross-entropy through a Linear head
    Report rep{"softmax_cross_entropy"};
    auto net = nn::BasicNetwork<double>::from_layers(
        {{nn::LayerKind::Linear, 4, 2, 0}, {nn::LayerKind::Softmax, 2, 2, 0}}, 18);
    net.set_mode(nn::Mode::Train);
    const auto x = random_tensor(2, 4, 1, 1, 19);
    const std::vector<int> labels{0, 1};
    net.zero_grad();
    net.forward(x);
    net.backward(labels);
    auto loss = [&] {
      const auto p = net.predict(x);
      return -(std::log(p.data[0]) + std::log(p.data[3])) / 2;
    };
    for (auto& p : net.params()) {
      const auto g = p.grad;
      check_values(rep, p.value, g, loss);
    }
    out.push_back(rep);
  }
  return out;
}

// Full network on a 2-sample batch with fixed dropout masks. per_tensor
// parameters are sampled from every tensor.
inline Report check_network(murmur::nn::Variant variant, int height, int width, int per_tensor, std::uint64_t seed) {
  namespace nn = murmur::nn;
  Report rep{std::string(nn::to_string(variant))};
  auto net = nn::BasicNetwork<double>::build(variant, seed);
  net.set_mode(nn::Mode::Train);
  const auto x = random_tensor(2, 1, height, width, seed + 1);
  const std::vector<int> labels{0, 1};
  const std::uint64_t mask_seed = seed + 2;
  auto loss = [&] {
    Rng rng(mask_seed);
    const auto p = net.forward(x, &rng);
    return -(std::log(p.data[0]) + std::log(p.data[3])) / 2;
  };
  net.zero_grad();
  {
    Rng rng(mask_seed);
    net.forward(x, &rng);
  }
  net.backward(labels);
  Rng pick(seed + 3);
  for (auto& p : net.params()) {
    const auto analytic = p.grad;
    for (int k = 0, tries = 0; k < per_tensor && tries < 10 * per_tensor; ++tries) {
      const auto i = murmur::uniform_index(pick, p.value.size());
      if (const auto n = numeric_derivative(p.value[i], loss, rep)) {
        rep.max_rel = std::max(rep.max_rel, rel_error(analytic[i], *n));
        ++rep.checked;
        ++k;
      }
    }
  }
  return rep;
}

}  // namespace gradcheck
