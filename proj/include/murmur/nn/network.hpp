#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "murmur/nn/layers.hpp"
#include "murmur/nn/tensor.hpp"
#include "murmur/random.hpp"

namespace murmur::nn {

enum class Variant { Light, Baseline, Heavy, Custom };
enum class LayerKind { Conv3x3, ReLU, Dropout, MaxPool2x2, GlobalAvgPool, Linear, Softmax };
enum class Mode { Train, Eval };

std::string_view to_string(Variant v);
std::string_view to_string(LayerKind k);
Variant parse_variant(std::string_view name);

struct LayerSpec {
  LayerKind kind = LayerKind::ReLU;
  int in_ch = 0;
  int out_ch = 0;
  double p = 0.0;  // dropout probability

  bool operator==(const LayerSpec&) const = default;
};

inline constexpr double kDropoutP = 0.1;

// Conv(3x3, pad 1) + ReLU + Dropout(0.1) blocks ending in a global average
// pool, then Linear(C, 2) + Softmax.
std::vector<LayerSpec> architecture(Variant v, double dropout_p = kDropoutP);

// Closed-form parameter count: conv out*(in*9+1), linear out*(in+1).
std::int64_t parameter_count(std::span<const LayerSpec> layers);

template <class T>
struct Param {
  std::string name;
  std::vector<int> shape;
  std::vector<T> value;
  std::vector<T> grad;
};

template <class T>
class BasicNetwork {
 public:
  BasicNetwork() = default;
  // Parameters are allocated zeroed.
  BasicNetwork(Variant variant, std::vector<LayerSpec> layers);

  // He-uniform weights (bound sqrt(6 / fan_in)), zero biases.
  static BasicNetwork build(Variant variant, std::uint64_t seed, double dropout_p = kDropoutP);
  static BasicNetwork from_layers(std::vector<LayerSpec> layers, std::uint64_t seed);

  Variant variant() const { return variant_; }
  const std::vector<LayerSpec>& layers() const { return layers_; }
  std::vector<Param<T>>& params() { return params_; }
  const std::vector<Param<T>>& params() const { return params_; }
  // Index of the weight parameter for layer l (bias is the next one), or -1.
  int param_index(std::size_t layer) const { return layer_param_[layer]; }
  std::int64_t parameter_count() const;

  Mode mode() const { return mode_; }
  void set_mode(Mode mode) { mode_ = mode; }

  // Forward pass returning class probabilities; caches activations for
  // backward. Dropout is active in Train mode and draws from rng.
  Tensor<T> forward(const Tensor<T>& x, Rng* rng = nullptr);

  // Mean cross-entropy of the cached forward pass against labels. Gradients are
  // accumulated into Param::grad (call zero_grad first). Reuses the cached
  // dropout masks. Throws StateError without a cached forward pass.
  T backward(std::span<const int> labels);

  void zero_grad();
  void clear_cache() { cache_.reset(); }

  // Stateless inference for concurrent use. Dropout is active only when
  // dropout_rng is given (Monte Carlo dropout).
  Tensor<T> predict(const Tensor<T>& x, Rng* dropout_rng = nullptr) const;

  // Shapes of every layer output for the given per-sample input shape (C, H, W).
  std::vector<std::array<int, 4>> trace_shapes(std::array<int, 4> input) const;

  template <class U>
  BasicNetwork<U> cast() const {
    BasicNetwork<U> out(variant_, layers_);
    for (std::size_t i = 0; i < params_.size(); ++i)
      for (std::size_t j = 0; j < params_[i].value.size(); ++j)
        out.params()[i].value[j] = static_cast<U>(params_[i].value[j]);
    out.set_mode(mode_);
    return out;
  }

 private:
  struct Cache {
    std::vector<Tensor<T>> inputs;  // input to every layer
    std::vector<std::vector<T>> masks;
    std::vector<std::vector<std::uint32_t>> argmax;
    Tensor<T> probs;
  };

  Tensor<T> run(const Tensor<T>& x, bool dropout_active, Rng* rng, Cache* cache) const;

  Variant variant_ = Variant::Custom;
  std::vector<LayerSpec> layers_;
  std::vector<Param<T>> params_;
  std::vector<int> layer_param_;
  Mode mode_ = Mode::Eval;
  std::optional<Cache> cache_;
};

using Network = BasicNetwork<float>;

// Packs flat per-sample feature maps into an N x 1 x H x W tensor.
Tensor<float> make_batch(std::span<const float> flat, int n, int height, int width);

}  // namespace murmur::nn
