#include "murmur/nn/network.hpp"

#include <cmath>

#include "murmur/error.hpp"

namespace murmur::nn {

std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::Light: return "light";
    case Variant::Baseline: return "baseline";
    case Variant::Heavy: return "heavy";
    case Variant::Custom: return "custom";
  }
  return "custom";
}

std::string_view to_string(LayerKind k) {
  switch (k) {
    case LayerKind::Conv3x3: return "conv3x3";
    case LayerKind::ReLU: return "relu";
    case LayerKind::Dropout: return "dropout";
    case LayerKind::MaxPool2x2: return "maxpool2x2";
    case LayerKind::GlobalAvgPool: return "gap";
    case LayerKind::Linear: return "linear";
    case LayerKind::Softmax: return "softmax";
  }
  return "?";
}

Variant parse_variant(std::string_view name) {
  if (name == "light") return Variant::Light;
  if (name == "baseline") return Variant::Baseline;
  if (name == "heavy") return Variant::Heavy;
  if (name == "custom") return Variant::Custom;
  throw Error(ErrorCode::ConfigError, "unknown variant '" + std::string(name) + "'");
}

std::vector<LayerSpec> architecture(Variant v, double dropout_p) {
  struct Block { int in, out; bool pool; };
  std::vector<Block> blocks;
  switch (v) {
    case Variant::Light:
      blocks = {{1, 16, true}, {16, 32, true}, {32, 64, false}};
      break;
    case Variant::Baseline:
      blocks = {{1, 32, true}, {32, 64, true}, {64, 128, true}, {128, 256, false}};
      break;
    case Variant::Heavy:
      blocks = {{1, 64, false},    {64, 64, true},    {64, 128, false}, {128, 128, true},
                {128, 256, false}, {256, 256, true}, {256, 512, false}};
      break;
    case Variant::Custom:
      throw Error(ErrorCode::ConfigError, "custom networks have no fixed architecture");
  }
  std::vector<LayerSpec> layers;
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    const auto& b = blocks[i];
    layers.push_back({LayerKind::Conv3x3, b.in, b.out, 0.0});
    layers.push_back({LayerKind::ReLU, b.out, b.out, 0.0});
    layers.push_back({LayerKind::Dropout, b.out, b.out, dropout_p});
    if (i + 1 == blocks.size())
      layers.push_back({LayerKind::GlobalAvgPool, b.out, b.out, 0.0});
    else if (b.pool)
      layers.push_back({LayerKind::MaxPool2x2, b.out, b.out, 0.0});
  }
  const int last = blocks.back().out;
  layers.push_back({LayerKind::Linear, last, 2, 0.0});
  layers.push_back({LayerKind::Softmax, 2, 2, 0.0});
  return layers;
}

std::int64_t parameter_count(std::span<const LayerSpec> layers) {
  std::int64_t total = 0;
  for (const auto& l : layers) {
    if (l.kind == LayerKind::Conv3x3) total += static_cast<std::int64_t>(l.out_ch) * (l.in_ch * 9 + 1);
    if (l.kind == LayerKind::Linear) total += static_cast<std::int64_t>(l.out_ch) * (l.in_ch + 1);
  }
  return total;
}

template <class T>
BasicNetwork<T>::BasicNetwork(Variant variant, std::vector<LayerSpec> layers)
    : variant_(variant), layers_(std::move(layers)) {
  layer_param_.assign(layers_.size(), -1);
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& spec = layers_[l];
    const std::string prefix = "layer" + std::to_string(l);
    if (spec.kind == LayerKind::Conv3x3) {
      layer_param_[l] = static_cast<int>(params_.size());
      const auto n = static_cast<std::size_t>(spec.out_ch) * spec.in_ch * 9;
      params_.push_back({prefix + ".weight", {spec.out_ch, spec.in_ch, 3, 3}, std::vector<T>(n), std::vector<T>(n)});
      params_.push_back({prefix + ".bias", {spec.out_ch}, std::vector<T>(spec.out_ch), std::vector<T>(spec.out_ch)});
    } else if (spec.kind == LayerKind::Linear) {
      layer_param_[l] = static_cast<int>(params_.size());
      const auto n = static_cast<std::size_t>(spec.out_ch) * spec.in_ch;
      params_.push_back({prefix + ".weight", {spec.out_ch, spec.in_ch}, std::vector<T>(n), std::vector<T>(n)});
      params_.push_back({prefix + ".bias", {spec.out_ch}, std::vector<T>(spec.out_ch), std::vector<T>(spec.out_ch)});
    } else if (spec.kind == LayerKind::Dropout && (spec.p < 0.0 || spec.p >= 1.0)) {
      throw Error(ErrorCode::ConfigError, "dropout p must be in [0, 1)");
    }
  }
}

template <class T>
BasicNetwork<T> BasicNetwork<T>::from_layers(std::vector<LayerSpec> layers, std::uint64_t seed) {
  BasicNetwork net(Variant::Custom, std::move(layers));
  Rng rng(derive_seed(seed, 10));
  for (std::size_t l = 0; l < net.layers_.size(); ++l) {
    const int idx = net.layer_param_[l];
    if (idx < 0) continue;
    const auto& spec = net.layers_[l];
    const double fan_in = spec.kind == LayerKind::Conv3x3 ? spec.in_ch * 9.0 : spec.in_ch;
    const double bound = std::sqrt(6.0 / fan_in);
    for (auto& w : net.params_[idx].value) w = static_cast<T>(uniform(rng, -bound, bound));
  }
  return net;
}

template <class T>
BasicNetwork<T> BasicNetwork<T>::build(Variant variant, std::uint64_t seed, double dropout_p) {
  auto net = from_layers(architecture(variant, dropout_p), seed);
  net.variant_ = variant;
  return net;
}

template <class T>
std::int64_t BasicNetwork<T>::parameter_count() const {
  return nn::parameter_count(layers_);
}

template <class T>
void BasicNetwork<T>::zero_grad() {
  for (auto& p : params_) std::fill(p.grad.begin(), p.grad.end(), T(0));
}

template <class T>
Tensor<T> BasicNetwork<T>::run(const Tensor<T>& x, bool dropout_active, Rng* rng, Cache* cache) const {
  if (cache) {
    cache->inputs.assign(layers_.size(), {});
    cache->masks.assign(layers_.size(), {});
    cache->argmax.assign(layers_.size(), {});
  }
  Tensor<T> h = x;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& spec = layers_[l];
    if (cache) cache->inputs[l] = h;
    const int idx = layer_param_[l];
    switch (spec.kind) {
      case LayerKind::Conv3x3:
        if (h.c() != spec.in_ch) throw Error(ErrorCode::ShapeError, "conv input channel mismatch");
        h = conv3x3_forward<T>(h, params_[idx].value, params_[idx + 1].value, spec.out_ch);
        break;
      case LayerKind::ReLU:
        h = relu_forward(h);
        break;
      case LayerKind::Dropout:
        h = dropout_forward(h, spec.p, dropout_active, rng, cache ? &cache->masks[l] : nullptr);
        break;
      case LayerKind::MaxPool2x2:
        h = maxpool2x2_forward(h, cache ? &cache->argmax[l] : nullptr);
        break;
      case LayerKind::GlobalAvgPool:
        h = global_avg_pool_forward(h);
        break;
      case LayerKind::Linear:
        if (h.sample_size() != static_cast<std::size_t>(spec.in_ch))
          throw Error(ErrorCode::ShapeError, "linear input feature mismatch");
        h = linear_forward<T>(h, params_[idx].value, params_[idx + 1].value, spec.out_ch);
        break;
      case LayerKind::Softmax:
        h = softmax(h);
        break;
    }
  }
  return h;
}

template <class T>
Tensor<T> BasicNetwork<T>::forward(const Tensor<T>& x, Rng* rng) {
  Cache cache;
  auto probs = run(x, mode_ == Mode::Train, rng, &cache);
  cache.probs = probs;
  cache_ = std::move(cache);
  return probs;
}

template <class T>
Tensor<T> BasicNetwork<T>::predict(const Tensor<T>& x, Rng* dropout_rng) const {
  return run(x, dropout_rng != nullptr, dropout_rng, nullptr);
}

template <class T>
T BasicNetwork<T>::backward(std::span<const int> labels) {
  if (!cache_) throw Error(ErrorCode::StateError, "backward called without a cached forward pass");
  if (layers_.empty() || layers_.back().kind != LayerKind::Softmax)
    throw Error(ErrorCode::StateError, "backward expects a trailing softmax layer");
  const auto& probs = cache_->probs;
  const int n = probs.n();
  const int classes = static_cast<int>(probs.sample_size());
  if (labels.size() != static_cast<std::size_t>(n)) throw Error(ErrorCode::ShapeError, "label count mismatch");

  // Softmax + cross-entropy: dlogits = (p - onehot) / N.
  Tensor<T> grad = probs;
  T loss = 0;
  for (int i = 0; i < n; ++i) {
    loss += cross_entropy<T>(std::span<const T>(probs.sample(i), static_cast<std::size_t>(classes)), labels[i]);
    grad.data[static_cast<std::size_t>(i) * classes + labels[i]] -= T(1);
  }
  for (auto& g : grad.data) g /= static_cast<T>(n);

  for (std::size_t l = layers_.size() - 1; l-- > 0;) {
    const auto& spec = layers_[l];
    const auto& x = cache_->inputs[l];
    const int idx = layer_param_[l];
    switch (spec.kind) {
      case LayerKind::Conv3x3:
        grad = conv3x3_backward<T>(x, params_[idx].value, spec.out_ch, grad, params_[idx].grad,
                                   params_[idx + 1].grad);
        break;
      case LayerKind::ReLU:
        grad = relu_backward(x, grad);
        break;
      case LayerKind::Dropout:
        grad = dropout_backward(grad, cache_->masks[l]);
        break;
      case LayerKind::MaxPool2x2:
        grad = maxpool2x2_backward(x, grad, cache_->argmax[l]);
        break;
      case LayerKind::GlobalAvgPool:
        grad = global_avg_pool_backward(x, grad);
        break;
      case LayerKind::Linear:
        grad = linear_backward<T>(x, params_[idx].value, spec.out_ch, grad, params_[idx].grad, params_[idx + 1].grad);
        break;
      case LayerKind::Softmax:
        throw Error(ErrorCode::StateError, "softmax is only supported as the final layer");
    }
  }
  return loss / static_cast<T>(n);
}

template <class T>
std::vector<std::array<int, 4>> BasicNetwork<T>::trace_shapes(std::array<int, 4> s) const {
  std::vector<std::array<int, 4>> out;
  for (const auto& spec : layers_) {
    switch (spec.kind) {
      case LayerKind::Conv3x3:
        if (s[1] != spec.in_ch) throw Error(ErrorCode::ShapeError, "conv input channel mismatch");
        s[1] = spec.out_ch;
        break;
      case LayerKind::MaxPool2x2:
        if (s[2] < 2 || s[3] < 2) throw Error(ErrorCode::ShapeError, "maxpool2x2 needs H, W >= 2");
        s[2] /= 2;
        s[3] /= 2;
        break;
      case LayerKind::GlobalAvgPool:
        s[2] = s[3] = 1;
        break;
      case LayerKind::Linear:
        if (s[1] * s[2] * s[3] != spec.in_ch) throw Error(ErrorCode::ShapeError, "linear input feature mismatch");
        s = {s[0], spec.out_ch, 1, 1};
        break;
      default:
        break;
    }
    out.push_back(s);
  }
  return out;
}

template class BasicNetwork<float>;
template class BasicNetwork<double>;

Tensor<float> make_batch(std::span<const float> flat, int n, int height, int width) {
  const auto per = static_cast<std::size_t>(height) * width;
  if (flat.size() != per * static_cast<std::size_t>(n)) throw Error(ErrorCode::ShapeError, "batch size mismatch");
  Tensor<float> t(n, 1, height, width);
  std::copy(flat.begin(), flat.end(), t.data.begin());
  return t;
}

}  // namespace murmur::nn
