#pragma once

// Weights directory: a text "manifest" (format tag, variant, dtype, layer list,
// one line per parameter tensor with its shape, blob file and CRC-32) plus one
// raw little-endian blob per tensor in (out, in, kH, kW) order.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "murmur/nn/network.hpp"

namespace murmur::nn {

void save_network(const Network& network, const std::filesystem::path& dir);
Network load_network(const std::filesystem::path& dir);

namespace detail {

std::uint32_t crc32_of(std::string_view bytes);
std::string shape_to_text(const std::vector<int>& shape);
std::vector<int> shape_from_text(std::string_view text);
std::string layer_to_text(const LayerSpec& spec);
LayerSpec layer_from_text(std::string_view line);  // "layer <kind> <in> <out> <p>"
void write_bytes(const std::filesystem::path& path, std::string_view bytes);
std::string read_bytes(const std::filesystem::path& path);
// Reads a blob and checks its CRC-32 against the manifest value.
std::string read_checked_blob(const std::filesystem::path& path, std::uint32_t expected_crc, std::size_t expected_size);

}  // namespace detail

}  // namespace murmur::nn
