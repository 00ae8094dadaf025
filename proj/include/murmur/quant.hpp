#pragma once

// Post-training int8 quantization. Weights and biases are symmetric per-tensor
// int8; activations between layers are affine int8 with ranges taken from
// min/max calibration. Conv, linear and pooling run on integers with int32
// accumulation; the final logits are dequantized and softmax runs in float.

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "murmur/nn/network.hpp"
#include "murmur/nn/train.hpp"

namespace murmur {

struct QTensor {
  std::vector<int> shape;
  std::vector<std::int8_t> values;
  double scale = 1.0;
  int zero_point = 0;

  double dequantize(std::size_t i) const { return scale * (static_cast<int>(values[i]) - zero_point); }
};

// scale = max|w| / 127, q = clamp(round-half-even(w / scale), -127, 127).
// All-zero input gives scale 1. NumericError on non-finite input.
QTensor quantize_tensor(std::span<const float> w, std::vector<int> shape = {});
std::vector<float> dequantize(const QTensor& q);

struct ActivationParams {
  double scale = 1.0;
  int zero_point = 0;

  bool operator==(const ActivationParams&) const = default;
};

// Affine int8 parameters covering [min(lo, 0), max(hi, 0)].
ActivationParams activation_params(double lo, double hi);
std::int8_t quantize_activation(double x, const ActivationParams& a);

struct QNetwork {
  nn::Variant variant = nn::Variant::Custom;
  std::vector<nn::LayerSpec> layers;  // same topology as the source network
  std::vector<QTensor> params;        // same order as Network::params()
  std::vector<int> layer_param;       // per layer: index of its weight tensor or -1
  // act[0] is the network input; act[l + 1] is the output of layer l.
  std::vector<ActivationParams> act;

  std::int64_t payload_bytes() const;  // one byte per stored weight or bias
};

// NOTE: dropout layers are skipped in the integer path; calibration runs the
// float network in Eval mode.
QNetwork quantize_network(const nn::Network& network, const nn::FeatureSet& calibration);

// Float network whose parameters are the dequantized int8 values.
nn::Network dequantized_network(const QNetwork& qnet);

// Class probabilities {p_absent, p_present} for one single-channel feature map.
std::array<double, 2> qforward(const QNetwork& qnet, std::span<const float> features, int height, int width);

// Largest value an int32 accumulator can reach for a dot product of length k
// between int8 weights and zero-point-shifted activations.
inline constexpr std::int64_t accumulator_bound(std::int64_t k) { return k * 127 * 255; }

void save_qnetwork(const QNetwork& qnet, const std::filesystem::path& dir);
QNetwork load_qnetwork(const std::filesystem::path& dir);

}  // namespace murmur
