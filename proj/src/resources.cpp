#include "murmur/resources.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include "murmur/error.hpp"

namespace murmur {

using nn::LayerKind;

std::int64_t count_params(std::span<const nn::LayerSpec> layers) { return nn::parameter_count(layers); }

ResourceReport analyze(std::span<const nn::LayerSpec> layers, InputShape input, int dtype_width) {
  if (dtype_width != 1 && dtype_width != 4) throw Error(ErrorCode::ConfigError, "dtype width must be 1 or 4");
  if (input[0] < 1 || input[1] < 1 || input[2] < 1) throw Error(ErrorCode::ShapeError, "input shape must be positive");
  ResourceReport report;
  report.dtype_width = dtype_width;
  std::array<int, 3> s = input;
  auto elements = [](const std::array<int, 3>& a) { return static_cast<std::int64_t>(a[0]) * a[1] * a[2]; };
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& l = layers[i];
    LayerResources r;
    r.index = i;
    r.kind = l.kind;
    r.input_elements = elements(s);
    switch (l.kind) {
      case LayerKind::Conv3x3:
        if (s[0] != l.in_ch)
          throw Error(ErrorCode::ShapeError, "layer " + std::to_string(i) + ": expected " + std::to_string(l.in_ch) +
                                                 " input channels, got " + std::to_string(s[0]));
        s[0] = l.out_ch;
        r.params = static_cast<std::int64_t>(l.out_ch) * (static_cast<std::int64_t>(l.in_ch) * 9 + 1);
        r.macc = static_cast<std::int64_t>(s[1]) * s[2] * l.out_ch * l.in_ch * 9;
        break;
      case LayerKind::MaxPool2x2:
        if (s[1] < 2 || s[2] < 2) throw Error(ErrorCode::ShapeError, "maxpool2x2 needs H, W >= 2");
        s[1] /= 2;
        s[2] /= 2;
        break;
      case LayerKind::GlobalAvgPool:
        s[1] = s[2] = 1;
        break;
      case LayerKind::Linear:
        if (elements(s) != l.in_ch) throw Error(ErrorCode::ShapeError, "linear input feature mismatch");
        s = {l.out_ch, 1, 1};
        r.params = static_cast<std::int64_t>(l.out_ch) * (l.in_ch + 1);
        r.macc = static_cast<std::int64_t>(l.in_ch) * l.out_ch;
        break;
      case LayerKind::ReLU:
      case LayerKind::Dropout:
      case LayerKind::Softmax:
        break;
    }
    r.output = s;
    r.output_elements = elements(s);
    report.params += r.params;
    report.macc += r.macc;
    report.ram_bytes_estimate =
        std::max(report.ram_bytes_estimate, (r.input_elements + r.output_elements) * dtype_width);
    report.layers.push_back(r);
  }
  report.flash_bytes = report.params * dtype_width;
  return report;
}

std::int64_t count_macc(std::span<const nn::LayerSpec> layers, InputShape input) {
  return analyze(layers, input, 4).macc;
}

MemoryEstimate estimate_memory(std::span<const nn::LayerSpec> layers, InputShape input, int dtype_width) {
  const auto r = analyze(layers, input, dtype_width);
  return {r.flash_bytes, r.ram_bytes_estimate};
}

std::string format_binary_size(std::int64_t bytes) {
  char buf[48];
  const auto b = static_cast<double>(bytes);
  if (bytes < 1024) std::snprintf(buf, sizeof buf, "%lld B", static_cast<long long>(bytes));
  else if (bytes < 1024 * 1024) std::snprintf(buf, sizeof buf, "%.1f KiB", b / 1024.0);
  else if (bytes < 1024LL * 1024 * 1024) std::snprintf(buf, sizeof buf, "%.1f MiB", b / (1024.0 * 1024.0));
  else std::snprintf(buf, sizeof buf, "%.1f GiB", b / (1024.0 * 1024.0 * 1024.0));
  return buf;
}

std::string render_report(const ResourceReport& report, std::string_view variant_name) {
  std::ostringstream out;
  out << "# layer\tkind\toutput\tparams\tmacc\n";
  for (const auto& l : report.layers)
    out << l.index << '\t' << nn::to_string(l.kind) << '\t' << l.output[0] << 'x' << l.output[1] << 'x' << l.output[2]
        << '\t' << l.params << '\t' << l.macc << '\n';
  out << "variant\t" << variant_name << '\n';
  out << "dtype_width\t" << report.dtype_width << '\n';
  out << "params\t" << report.params << '\n';
  out << "macc\t" << report.macc << '\n';
  out << "flash_bytes\t" << report.flash_bytes << '\t' << format_binary_size(report.flash_bytes) << '\n';
  out << "ram_bytes_estimate\t" << report.ram_bytes_estimate << '\t' << format_binary_size(report.ram_bytes_estimate)
      << '\n';
  out << "# ram_bytes_estimate is an upper bound (largest input+output activation pair); it does not model the\n"
         "# buffer reuse of vendor deployment tools and is not comparable to their reported RAM.\n";
  return out.str();
}

}  // namespace murmur
