#include "murmur/nn/serialize.hpp"

#include <zlib.h>

#include <bit>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "murmur/error.hpp"

namespace murmur::nn {

namespace fs = std::filesystem;

namespace detail {

std::uint32_t crc32_of(std::string_view bytes) {
  uLong crc = crc32(0L, Z_NULL, 0);
  crc = crc32(crc, reinterpret_cast<const Bytef*>(bytes.data()), static_cast<uInt>(bytes.size()));
  return static_cast<std::uint32_t>(crc);
}

std::string shape_to_text(const std::vector<int>& shape) {
  std::string s;
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += 'x';
    s += std::to_string(shape[i]);
  }
  return s;
}

std::vector<int> shape_from_text(std::string_view text) {
  std::vector<int> shape;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto pos = text.find('x', start);
    if (pos == std::string_view::npos) pos = text.size();
    try {
      shape.push_back(std::stoi(std::string(text.substr(start, pos - start))));
    } catch (const std::exception&) {
      throw Error(ErrorCode::ParseError, "bad shape '" + std::string(text) + "'");
    }
    start = pos + 1;
  }
  return shape;
}

std::string layer_to_text(const LayerSpec& spec) {
  char p[32];
  std::snprintf(p, sizeof p, "%.17g", spec.p);
  return "layer " + std::string(to_string(spec.kind)) + " " + std::to_string(spec.in_ch) + " " +
         std::to_string(spec.out_ch) + " " + p;
}

LayerSpec layer_from_text(std::string_view line) {
  std::istringstream in{std::string(line)};
  std::string tag, kind;
  LayerSpec spec;
  if (!(in >> tag >> kind >> spec.in_ch >> spec.out_ch >> spec.p) || tag != "layer")
    throw Error(ErrorCode::ParseError, "bad layer line '" + std::string(line) + "'");
  static const LayerKind kinds[] = {LayerKind::Conv3x3,       LayerKind::ReLU,   LayerKind::Dropout,
                                    LayerKind::MaxPool2x2,    LayerKind::GlobalAvgPool,
                                    LayerKind::Linear,        LayerKind::Softmax};
  for (auto k : kinds)
    if (to_string(k) == kind) {
      spec.kind = k;
      return spec;
    }
  throw Error(ErrorCode::ParseError, "unknown layer kind '" + kind + "'");
}

void write_bytes(const fs::path& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

std::string read_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string read_checked_blob(const fs::path& path, std::uint32_t expected_crc, std::size_t expected_size) {
  auto bytes = read_bytes(path);
  if (bytes.size() != expected_size)
    throw Error(ErrorCode::ParseError, path.string() + ": expected " + std::to_string(expected_size) + " bytes");
  if (crc32_of(bytes) != expected_crc) throw Error(ErrorCode::ParseError, path.string() + ": checksum mismatch");
  return bytes;
}

}  // namespace detail

void save_network(const Network& network, const fs::path& dir) {
  fs::create_directories(dir);
  std::ostringstream manifest;
  manifest << "murmur-weights 1\n";
  manifest << "variant " << to_string(network.variant()) << "\n";
  manifest << "dtype float32\n";
  for (const auto& l : network.layers()) manifest << detail::layer_to_text(l) << "\n";
  for (const auto& p : network.params()) {
    std::string blob;
    blob.reserve(4 * p.value.size());
    for (float v : p.value) {
      const auto bits = std::bit_cast<std::uint32_t>(v);
      for (int i = 0; i < 4; ++i) blob.push_back(static_cast<char>((bits >> (8 * i)) & 0xFF));
    }
    const std::string file = p.name + ".bin";
    detail::write_bytes(dir / file, blob);
    char crc[16];
    std::snprintf(crc, sizeof crc, "%08x", detail::crc32_of(blob));
    manifest << "param " << p.name << " " << detail::shape_to_text(p.shape) << " " << file << " " << crc << "\n";
  }
  detail::write_bytes(dir / "manifest", manifest.str());
}

Network load_network(const fs::path& dir) {
  std::istringstream in(detail::read_bytes(dir / "manifest"));
  std::string line;
  if (!std::getline(in, line) || line != "murmur-weights 1")
    throw Error(ErrorCode::ParseError, "not a murmur weights manifest");
  Variant variant = Variant::Custom;
  std::vector<LayerSpec> layers;
  struct Entry { std::string name, shape, file; std::uint32_t crc; };
  std::vector<Entry> entries;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string tag;
    fields >> tag;
    if (tag == "variant") {
      std::string v;
      fields >> v;
      variant = parse_variant(v);
    } else if (tag == "dtype") {
      std::string d;
      fields >> d;
      if (d != "float32") throw Error(ErrorCode::UnsupportedFormat, "expected float32 weights, found " + d);
    } else if (tag == "layer") {
      layers.push_back(detail::layer_from_text(line));
    } else if (tag == "param") {
      Entry e;
      std::string crc;
      if (!(fields >> e.name >> e.shape >> e.file >> crc)) throw Error(ErrorCode::ParseError, "bad param line");
      e.crc = static_cast<std::uint32_t>(std::stoul(crc, nullptr, 16));
      entries.push_back(std::move(e));
    } else {
      throw Error(ErrorCode::ParseError, "unknown manifest line '" + line + "'");
    }
  }
  Network net(variant, layers);
  if (entries.size() != net.params().size()) throw Error(ErrorCode::ParseError, "parameter count mismatch");
  for (std::size_t i = 0; i < entries.size(); ++i) {
    auto& p = net.params()[i];
    if (entries[i].name != p.name || detail::shape_from_text(entries[i].shape) != p.shape)
      throw Error(ErrorCode::ParseError, "parameter " + entries[i].name + " does not match the layer list");
    const auto blob = detail::read_checked_blob(dir / entries[i].file, entries[i].crc, 4 * p.value.size());
    for (std::size_t j = 0; j < p.value.size(); ++j) {
      std::uint32_t bits = 0;
      for (int b = 3; b >= 0; --b) bits = (bits << 8) | static_cast<unsigned char>(blob[4 * j + b]);
      p.value[j] = std::bit_cast<float>(bits);
    }
  }
  net.set_mode(Mode::Eval);
  return net;
}

}  // namespace murmur::nn
