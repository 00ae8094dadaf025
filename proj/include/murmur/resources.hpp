#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "murmur/nn/network.hpp"

namespace murmur {

// Per-sample input shape (C, H, W).
using InputShape = std::array<int, 3>;
inline constexpr InputShape kDefaultInputShape{1, 33, 124};

struct LayerResources {
  std::size_t index = 0;
  nn::LayerKind kind = nn::LayerKind::ReLU;
  std::array<int, 3> output{0, 0, 0};
  std::int64_t params = 0;
  std::int64_t macc = 0;
  std::int64_t input_elements = 0;
  std::int64_t output_elements = 0;
};

struct ResourceReport {
  std::int64_t params = 0;
  std::int64_t macc = 0;
  std::int64_t flash_bytes = 0;
  std::int64_t ram_bytes_estimate = 0;
  int dtype_width = 4;
  std::vector<LayerResources> layers;
};

std::int64_t count_params(std::span<const nn::LayerSpec> layers);
inline std::int64_t count_params(const nn::Network& net) { return count_params(net.layers()); }

// conv: outH*outW*out*in*9, linear: in*out; everything else is free. Shapes
// follow the floor rule of 2x2 pooling. Throws ShapeError on mismatch.
std::int64_t count_macc(std::span<const nn::LayerSpec> layers, InputShape input);
inline std::int64_t count_macc(const nn::Network& net, InputShape input) { return count_macc(net.layers(), input); }

struct MemoryEstimate {
  std::int64_t flash_bytes = 0;
  // Upper bound: largest (input + output) activation pair of any layer. The
  // buffer fusion of vendor deployment tools is not modelled.
  std::int64_t ram_bytes_estimate = 0;
};

// dtype_width is 1 (int8) or 4 (float32).
MemoryEstimate estimate_memory(std::span<const nn::LayerSpec> layers, InputShape input, int dtype_width);

ResourceReport analyze(std::span<const nn::LayerSpec> layers, InputShape input, int dtype_width);

// Binary units with one decimal: "91.5 KiB", "8.9 MiB".
std::string format_binary_size(std::int64_t bytes);

// Per-layer table followed by "key<TAB>value" summary rows.
std::string render_report(const ResourceReport& report, std::string_view variant_name);

}  // namespace murmur
