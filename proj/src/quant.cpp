#include "murmur/quant.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "murmur/error.hpp"
#include "murmur/nn/layers.hpp"
#include "murmur/nn/serialize.hpp"
#include "murmur/simd/kernels.hpp"

namespace murmur {

using nn::LayerKind;
namespace fs = std::filesystem;

QTensor quantize_tensor(std::span<const float> w, std::vector<int> shape) {
  QTensor q;
  q.shape = shape.empty() ? std::vector<int>{static_cast<int>(w.size())} : std::move(shape);
  double max_abs = 0;
  for (float v : w) {
    if (!std::isfinite(v)) throw Error(ErrorCode::NumericError, "cannot quantize non-finite weights");
    max_abs = std::max(max_abs, std::fabs(static_cast<double>(v)));
  }
  q.scale = max_abs > 0 ? max_abs / 127.0 : 1.0;
  q.values.resize(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) {
    const double r = std::nearbyint(static_cast<double>(w[i]) / q.scale);  // ties to even
    q.values[i] = static_cast<std::int8_t>(std::clamp(r, -127.0, 127.0));
  }
  return q;
}

std::vector<float> dequantize(const QTensor& q) {
  std::vector<float> out(q.values.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<float>(q.dequantize(i));
  return out;
}

ActivationParams activation_params(double lo, double hi) {
  lo = std::min(lo, 0.0);
  hi = std::max(hi, 0.0);
  if (!(hi - lo > 0)) return {};
  ActivationParams a;
  a.scale = (hi - lo) / 255.0;
  a.zero_point = static_cast<int>(std::clamp(std::nearbyint(-128.0 - lo / a.scale), -128.0, 127.0));
  return a;
}

std::int8_t quantize_activation(double x, const ActivationParams& a) {
  const double q = std::nearbyint(x / a.scale) + a.zero_point;
  return static_cast<std::int8_t>(std::clamp(q, -128.0, 127.0));
}

std::int64_t QNetwork::payload_bytes() const {
  std::int64_t n = 0;
  for (const auto& p : params) n += static_cast<std::int64_t>(p.values.size());
  return n;
}

namespace {

struct Range {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  void add(std::span<const float> v) {
    for (float x : v) {
      lo = std::min(lo, static_cast<double>(x));
      hi = std::max(hi, static_cast<double>(x));
    }
  }
};

// Float eval forward that records the value range of every layer output.
void observe(const nn::Network& net, const nn::Tensor<float>& x, std::vector<Range>& ranges) {
  ranges[0].add(x.data);
  nn::Tensor<float> cur = x;
  const auto& layers = net.layers();
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& spec = layers[l];
    const int pi = net.param_index(l);
    switch (spec.kind) {
      case LayerKind::Conv3x3:
        cur = nn::conv3x3_forward<float>(cur, net.params()[pi].value, net.params()[pi + 1].value, spec.out_ch);
        break;
      case LayerKind::ReLU: cur = nn::relu_forward(cur); break;
      case LayerKind::Dropout: break;
      case LayerKind::MaxPool2x2: cur = nn::maxpool2x2_forward(cur); break;
      case LayerKind::GlobalAvgPool: cur = nn::global_avg_pool_forward(cur); break;
      case LayerKind::Linear:
        cur = nn::linear_forward<float>(cur, net.params()[pi].value, net.params()[pi + 1].value, spec.out_ch);
        break;
      case LayerKind::Softmax: cur = nn::softmax(cur); break;
    }
    ranges[l + 1].add(cur.data);
  }
}

struct QAct {
  int c = 0, h = 0, w = 0;
  std::vector<std::int8_t> q;
  ActivationParams a;
};

std::vector<std::int32_t> row_sums(const QTensor& w, int rows) {
  const std::size_t k = w.values.size() / static_cast<std::size_t>(rows);
  std::vector<std::int32_t> s(static_cast<std::size_t>(rows), 0);
  for (int r = 0; r < rows; ++r)
    for (std::size_t j = 0; j < k; ++j) s[r] += w.values[r * k + j];
  return s;
}

void check_accumulator(std::int64_t k) {
  if (accumulator_bound(k) >= (std::int64_t{1} << 31))
    throw Error(ErrorCode::OverflowError, "int32 accumulator can overflow for dot length " + std::to_string(k));
}

QAct qconv(const QAct& in, const QTensor& w, const QTensor& b, int out_ch, const ActivationParams& out_a,
           const simd::KernelTable& kt) {
  const int k = in.c * 9;
  check_accumulator(k);
  const std::size_t p_count = static_cast<std::size_t>(in.h) * in.w;
  const auto pad = static_cast<std::int8_t>(in.a.zero_point);
  // im2col as [P x K] so every output is one contiguous dot product.
  std::vector<std::int8_t> col(p_count * k, pad);
  for (int y = 0; y < in.h; ++y)
    for (int x = 0; x < in.w; ++x) {
      std::int8_t* row = col.data() + (static_cast<std::size_t>(y) * in.w + x) * k;
      for (int c = 0; c < in.c; ++c)
        for (int ky = 0; ky < 3; ++ky) {
          const int yy = y + ky - 1;
          if (yy < 0 || yy >= in.h) continue;
          for (int kx = 0; kx < 3; ++kx) {
            const int xx = x + kx - 1;
            if (xx < 0 || xx >= in.w) continue;
            row[c * 9 + ky * 3 + kx] = in.q[(static_cast<std::size_t>(c) * in.h + yy) * in.w + xx];
          }
        }
    }
  const auto wsum = row_sums(w, out_ch);
  QAct out{out_ch, in.h, in.w, std::vector<std::int8_t>(static_cast<std::size_t>(out_ch) * p_count), out_a};
  const double mult = w.scale * in.a.scale;
  for (int o = 0; o < out_ch; ++o) {
    const std::int8_t* wrow = w.values.data() + static_cast<std::size_t>(o) * k;
    const double bias = b.dequantize(static_cast<std::size_t>(o));
    const std::int32_t corr = in.a.zero_point * wsum[o];
    for (std::size_t p = 0; p < p_count; ++p) {
      const std::int32_t acc = kt.dot_i8(wrow, col.data() + p * k, static_cast<std::size_t>(k)) - corr;
      out.q[o * p_count + p] = quantize_activation(acc * mult + bias, out_a);
    }
  }
  return out;
}

QAct qmaxpool(const QAct& in) {
  QAct out{in.c, in.h / 2, in.w / 2, {}, in.a};
  out.q.resize(static_cast<std::size_t>(out.c) * out.h * out.w);
  for (int c = 0; c < in.c; ++c)
    for (int y = 0; y < out.h; ++y)
      for (int x = 0; x < out.w; ++x) {
        const auto at = [&](int yy, int xx) { return in.q[(static_cast<std::size_t>(c) * in.h + yy) * in.w + xx]; };
        out.q[(static_cast<std::size_t>(c) * out.h + y) * out.w + x] =
            std::max({at(2 * y, 2 * x), at(2 * y, 2 * x + 1), at(2 * y + 1, 2 * x), at(2 * y + 1, 2 * x + 1)});
      }
  return out;
}

QAct qgap(const QAct& in, const ActivationParams& out_a) {
  QAct out{in.c, 1, 1, std::vector<std::int8_t>(static_cast<std::size_t>(in.c)), out_a};
  const std::size_t hw = static_cast<std::size_t>(in.h) * in.w;
  for (int c = 0; c < in.c; ++c) {
    std::int32_t sum = 0;
    for (std::size_t i = 0; i < hw; ++i) sum += in.q[c * hw + i] - in.a.zero_point;
    out.q[c] = quantize_activation(in.a.scale * sum / static_cast<double>(hw), out_a);
  }
  return out;
}

std::vector<double> qlinear(const QAct& in, const QTensor& w, const QTensor& b, int out_features,
                            const simd::KernelTable& kt) {
  const std::size_t k = in.q.size();
  if (w.values.size() != k * static_cast<std::size_t>(out_features))
    throw Error(ErrorCode::ShapeError, "linear input size mismatch");
  check_accumulator(static_cast<std::int64_t>(k));
  const auto wsum = row_sums(w, out_features);
  std::vector<double> y(static_cast<std::size_t>(out_features));
  for (int o = 0; o < out_features; ++o) {
    const std::int32_t acc = kt.dot_i8(w.values.data() + o * k, in.q.data(), k) - in.a.zero_point * wsum[o];
    y[o] = acc * w.scale * in.a.scale + b.dequantize(static_cast<std::size_t>(o));
  }
  return y;
}

}  // namespace

QNetwork quantize_network(const nn::Network& network, const nn::FeatureSet& calibration) {
  if (calibration.empty()) throw Error(ErrorCode::CalibrationError, "calibration set is empty");
  QNetwork q;
  q.variant = network.variant();
  q.layers = network.layers();
  for (std::size_t l = 0; l < q.layers.size(); ++l) q.layer_param.push_back(network.param_index(l));
  for (const auto& p : network.params()) q.params.push_back(quantize_tensor(p.value, p.shape));

  std::vector<Range> ranges(q.layers.size() + 1);
  constexpr std::size_t kBatch = 32;
  for (std::size_t start = 0; start < calibration.size(); start += kBatch) {
    const std::size_t n = std::min(kBatch, calibration.size() - start);
    std::span<const float> flat(calibration.data.data() + start * calibration.stride(), n * calibration.stride());
    observe(network, nn::make_batch(flat, static_cast<int>(n), calibration.height, calibration.width), ranges);
  }

  q.act.resize(ranges.size());
  q.act[0] = activation_params(ranges[0].lo, ranges[0].hi);
  for (std::size_t l = 0; l < q.layers.size(); ++l) {
    const auto kind = q.layers[l].kind;
    if (kind == LayerKind::Conv3x3) {
      // A following ReLU is folded into the output range.
      const bool relu_next = l + 1 < q.layers.size() && q.layers[l + 1].kind == LayerKind::ReLU;
      const auto& r = ranges[relu_next ? l + 2 : l + 1];
      q.act[l + 1] = activation_params(r.lo, r.hi);
    } else if (kind == LayerKind::GlobalAvgPool || kind == LayerKind::Linear || kind == LayerKind::Softmax) {
      q.act[l + 1] = activation_params(ranges[l + 1].lo, ranges[l + 1].hi);
    } else {
      q.act[l + 1] = q.act[l];  // ReLU, dropout and max pooling keep the input grid
    }
  }
  return q;
}

nn::Network dequantized_network(const QNetwork& qnet) {
  nn::Network net(qnet.variant, qnet.layers);
  if (net.params().size() != qnet.params.size()) throw Error(ErrorCode::ShapeError, "parameter list mismatch");
  for (std::size_t i = 0; i < qnet.params.size(); ++i) net.params()[i].value = dequantize(qnet.params[i]);
  return net;
}

std::array<double, 2> qforward(const QNetwork& qnet, std::span<const float> features, int height, int width) {
  if (features.size() != static_cast<std::size_t>(height) * width)
    throw Error(ErrorCode::ShapeError, "feature map size mismatch");
  if (qnet.act.size() != qnet.layers.size() + 1) throw Error(ErrorCode::StateError, "network is not calibrated");
  const auto& kt = simd::active();

  QAct cur{1, height, width, std::vector<std::int8_t>(features.size()), qnet.act[0]};
  for (std::size_t i = 0; i < features.size(); ++i) cur.q[i] = quantize_activation(features[i], cur.a);
  std::vector<double> logits;
  bool real = false;

  for (std::size_t l = 0; l < qnet.layers.size(); ++l) {
    const auto& spec = qnet.layers[l];
    const int pi = qnet.layer_param[l];
    if (real && spec.kind != LayerKind::Softmax) throw Error(ErrorCode::StateError, "layer after dequantized output");
    switch (spec.kind) {
      case LayerKind::Conv3x3:
        if (cur.c != spec.in_ch) throw Error(ErrorCode::ShapeError, "conv channel mismatch");
        cur = qconv(cur, qnet.params[pi], qnet.params[pi + 1], spec.out_ch, qnet.act[l + 1], kt);
        break;
      case LayerKind::ReLU:
        for (auto& v : cur.q) v = std::max<std::int8_t>(v, static_cast<std::int8_t>(cur.a.zero_point));
        break;
      case LayerKind::Dropout: break;
      case LayerKind::MaxPool2x2: cur = qmaxpool(cur); break;
      case LayerKind::GlobalAvgPool: cur = qgap(cur, qnet.act[l + 1]); break;
      case LayerKind::Linear: {
        logits = qlinear(cur, qnet.params[pi], qnet.params[pi + 1], spec.out_ch, kt);
        const bool last = l + 1 == qnet.layers.size() || qnet.layers[l + 1].kind == LayerKind::Softmax;
        if (last) {
          real = true;
        } else {
          cur = QAct{spec.out_ch, 1, 1, std::vector<std::int8_t>(logits.size()), qnet.act[l + 1]};
          for (std::size_t i = 0; i < logits.size(); ++i) cur.q[i] = quantize_activation(logits[i], cur.a);
        }
        break;
      }
      case LayerKind::Softmax: {
        if (!real) throw Error(ErrorCode::StateError, "softmax expects dequantized logits");
        const double m = std::max(logits[0], logits[1]);
        const double e0 = std::exp(logits[0] - m), e1 = std::exp(logits[1] - m);
        return {e0 / (e0 + e1), e1 / (e0 + e1)};
      }
    }
  }
  throw Error(ErrorCode::StateError, "network does not end in softmax");
}

void save_qnetwork(const QNetwork& qnet, const fs::path& dir) {
  fs::create_directories(dir);
  const nn::Network shape_ref(qnet.variant, qnet.layers);
  std::ostringstream manifest;
  manifest << "murmur-weights 1\n";
  manifest << "variant " << nn::to_string(qnet.variant) << "\n";
  manifest << "dtype int8\n";
  for (const auto& l : qnet.layers) manifest << nn::detail::layer_to_text(l) << "\n";
  char buf[64];
  for (std::size_t i = 0; i < qnet.params.size(); ++i) {
    const auto& p = qnet.params[i];
    const std::string& name = shape_ref.params()[i].name;
    const std::string blob(reinterpret_cast<const char*>(p.values.data()), p.values.size());
    const std::string file = name + ".i8";
    nn::detail::write_bytes(dir / file, blob);
    std::snprintf(buf, sizeof buf, "%08x %.17g", nn::detail::crc32_of(blob), p.scale);
    manifest << "param " << name << " " << nn::detail::shape_to_text(p.shape) << " " << file << " " << buf << "\n";
  }
  for (std::size_t i = 0; i < qnet.act.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g %d", qnet.act[i].scale, qnet.act[i].zero_point);
    manifest << "act " << i << " " << buf << "\n";
  }
  nn::detail::write_bytes(dir / "manifest", manifest.str());
}

QNetwork load_qnetwork(const fs::path& dir) {
  std::istringstream in(nn::detail::read_bytes(dir / "manifest"));
  std::string line;
  if (!std::getline(in, line) || line != "murmur-weights 1")
    throw Error(ErrorCode::ParseError, "not a murmur weights manifest");
  QNetwork q;
  struct Entry { std::string name, shape, file; std::uint32_t crc; double scale; };
  std::vector<Entry> entries;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string tag;
    fields >> tag;
    if (tag == "variant") {
      std::string v;
      fields >> v;
      q.variant = nn::parse_variant(v);
    } else if (tag == "dtype") {
      std::string d;
      fields >> d;
      if (d != "int8") throw Error(ErrorCode::UnsupportedFormat, "expected int8 weights, found " + d);
    } else if (tag == "layer") {
      q.layers.push_back(nn::detail::layer_from_text(line));
    } else if (tag == "param") {
      Entry e;
      std::string crc;
      if (!(fields >> e.name >> e.shape >> e.file >> crc >> e.scale)) throw Error(ErrorCode::ParseError, "bad param line");
      e.crc = static_cast<std::uint32_t>(std::stoul(crc, nullptr, 16));
      entries.push_back(std::move(e));
    } else if (tag == "act") {
      std::size_t idx = 0;
      ActivationParams a;
      if (!(fields >> idx >> a.scale >> a.zero_point) || idx != q.act.size())
        throw Error(ErrorCode::ParseError, "bad act line");
      q.act.push_back(a);
    } else {
      throw Error(ErrorCode::ParseError, "unknown manifest line '" + line + "'");
    }
  }
  const nn::Network shape_ref(q.variant, q.layers);
  if (entries.size() != shape_ref.params().size()) throw Error(ErrorCode::ParseError, "parameter count mismatch");
  if (q.act.size() != q.layers.size() + 1) throw Error(ErrorCode::ParseError, "activation entries missing");
  for (std::size_t l = 0; l < q.layers.size(); ++l) q.layer_param.push_back(shape_ref.param_index(l));
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& ref = shape_ref.params()[i];
    if (entries[i].name != ref.name || nn::detail::shape_from_text(entries[i].shape) != ref.shape)
      throw Error(ErrorCode::ParseError, "parameter " + entries[i].name + " does not match the layer list");
    const auto blob = nn::detail::read_checked_blob(dir / entries[i].file, entries[i].crc, ref.value.size());
    QTensor t;
    t.shape = ref.shape;
    t.scale = entries[i].scale;
    t.values.assign(reinterpret_cast<const std::int8_t*>(blob.data()),
                    reinterpret_cast<const std::int8_t*>(blob.data()) + blob.size());
    q.params.push_back(std::move(t));
  }
  return q;
}

}  // namespace murmur
