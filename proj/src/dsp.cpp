#include "murmur/dsp.hpp"

#include <fftw3.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <map>
#include <mutex>
#include <numbers>
#include <numeric>

#include "murmur/error.hpp"

namespace murmur {

std::vector<Segment> segment(const Waveform& waveform, double window_s, double hop_s) {
  if (hop_s <= 0.0 || window_s <= 0.0) throw Error(ErrorCode::ConfigError, "window and hop must be positive");
  if (waveform.sample_rate_hz != kSampleRateHz)
    throw Error(ErrorCode::ConfigError, "segmentation expects 4000 Hz input");
  const auto fs = static_cast<double>(waveform.sample_rate_hz);
  const auto win = static_cast<std::size_t>(std::llround(window_s * fs));
  const auto hop = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(hop_s * fs)));
  std::vector<Segment> out;
  const auto n = waveform.samples.size();
  if (n < win) return out;
  const std::size_t count = (n - win) / hop + 1;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    Segment s;
    const auto begin = waveform.samples.begin() + static_cast<std::ptrdiff_t>(i * hop);
    s.samples.assign(begin, begin + static_cast<std::ptrdiff_t>(win));
    s.start_s = static_cast<double>(i * hop) / fs;
    s.source = {waveform.patient_id, waveform.location};
    out.push_back(std::move(s));
  }
  return out;
}

namespace {

// FFTW planning is not thread-safe; execution with the new-array interface is.
class PlanCache {
 public:
  fftw_plan get(int n) {
    std::lock_guard lock(mutex_);
    auto it = plans_.find(n);
    if (it != plans_.end()) return it->second;
    std::vector<double> in(static_cast<std::size_t>(n));
    auto* out = fftw_alloc_complex(static_cast<std::size_t>(n / 2 + 1));
    fftw_plan plan = fftw_plan_dft_r2c_1d(n, in.data(), out, FFTW_ESTIMATE | FFTW_UNALIGNED);
    fftw_free(out);
    plans_.emplace(n, plan);
    return plan;
  }

  ~PlanCache() {
    for (auto& [n, p] : plans_) fftw_destroy_plan(p);
  }

 private:
  std::mutex mutex_;
  std::map<int, fftw_plan> plans_;
};

PlanCache& plans() {
  static PlanCache cache;
  return cache;
}

}  // namespace

Spectrogram stft_power(std::span<const double> samples, int n_fft, double max_freq_hz, int sample_rate_hz) {
  if (n_fft < 2 || n_fft % 2 != 0) throw Error(ErrorCode::ConfigError, "n_fft must be even");
  if (samples.size() < static_cast<std::size_t>(n_fft))
    throw Error(ErrorCode::TooShort, "segment shorter than n_fft");
  const double df = static_cast<double>(sample_rate_hz) / n_fft;
  const int one_sided = n_fft / 2 + 1;
  const int keep = std::min(one_sided, static_cast<int>(std::floor(max_freq_hz / df + 1e-9)) + 1);
  const int hop = n_fft / 2;
  const int frames = static_cast<int>((samples.size() - static_cast<std::size_t>(n_fft)) / hop) + 1;

  Spectrogram spec;
  spec.n_fft = n_fft;
  spec.freq_bins = keep;
  spec.frames = frames;
  spec.freq_resolution_hz = df;
  spec.bins.assign(static_cast<std::size_t>(keep) * frames, 0.0);

  std::vector<double> window(static_cast<std::size_t>(n_fft));
  for (int i = 0; i < n_fft; ++i) window[i] = 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * i / n_fft));

  fftw_plan plan = plans().get(n_fft);
  std::vector<double> frame(static_cast<std::size_t>(n_fft));
  std::vector<fftw_complex> out(static_cast<std::size_t>(one_sided));
  for (int t = 0; t < frames; ++t) {
    const auto* x = samples.data() + static_cast<std::size_t>(t) * hop;
    for (int i = 0; i < n_fft; ++i) frame[i] = x[i] * window[i];
    fftw_execute_dft_r2c(plan, frame.data(), out.data());
    for (int f = 0; f < keep; ++f)
      spec.bins[static_cast<std::size_t>(f) * frames + t] = out[f][0] * out[f][0] + out[f][1] * out[f][1];
  }
  return spec;
}

Spectrogram stft_spectrogram(const Segment& segment, int n_fft) {
  if (n_fft != 64 && n_fft != 128 && n_fft != 256)
    throw Error(ErrorCode::ConfigError, "n_fft must be 64, 128 or 256");
  auto spec = stft_power(segment.samples, n_fft, kMaxFreqHz);
  spec.start_s = segment.start_s;
  spec.source = segment.source;
  return spec;
}

double psd_ratio(const Spectrogram& spec) {
  const double df = spec.freq_resolution_hz;
  const int bx = static_cast<int>(std::ceil(20.0 / df - 1e-9));
  const int by = std::min(spec.freq_bins - 1, static_cast<int>(std::floor(200.0 / df + 1e-9)));
  double band = 0.0, total = 0.0;
  for (int f = 0; f < spec.freq_bins; ++f) {
    double row = 0.0;
    for (int t = 0; t < spec.frames; ++t) row += spec.at(f, t);
    total += row;
    if (f >= bx && f <= by) band += row;
  }
  return total > 0.0 ? band / total : 0.0;
}

std::size_t QualityReport::kept_count() const {
  return static_cast<std::size_t>(std::count(kept.begin(), kept.end(), true));
}

QualityReport quality_filter_ratios(std::span<const double> ratios, std::span<const double> start_s,
                                    double psd_thr, int min_keep) {
  if (psd_thr < 0.0 || psd_thr > 1.0) throw Error(ErrorCode::ConfigError, "psd_thr must be in [0, 1]");
  if (ratios.size() != start_s.size()) throw Error(ErrorCode::ShapeError, "ratios/start_s length mismatch");
  QualityReport report;
  report.threshold = psd_thr;
  report.psd_ratio.assign(ratios.begin(), ratios.end());
  report.kept.assign(ratios.size(), false);
  std::size_t passed = 0;
  for (std::size_t i = 0; i < ratios.size(); ++i)
    if (ratios[i] >= psd_thr) {
      report.kept[i] = true;
      ++passed;
    }
  const auto want = std::min(ratios.size(), static_cast<std::size_t>(std::max(0, min_keep)));
  if (passed < want) {
    std::vector<std::size_t> order(ratios.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      if (ratios[a] != ratios[b]) return ratios[a] > ratios[b];
      return start_s[a] < start_s[b];
    });
    for (std::size_t k = 0; k < order.size() && passed < want; ++k)
      if (!report.kept[order[k]]) {
        report.kept[order[k]] = true;
        ++passed;
      }
  }
  return report;
}

QualityReport quality_filter(std::span<const Spectrogram> specs, double psd_thr, int min_keep) {
  std::vector<double> ratios, starts;
  ratios.reserve(specs.size());
  starts.reserve(specs.size());
  for (const auto& s : specs) {
    ratios.push_back(psd_ratio(s));
    starts.push_back(s.start_s);
  }
  return quality_filter_ratios(ratios, starts, psd_thr, min_keep);
}

std::vector<float> network_input(const Spectrogram& spec) {
  const auto n = spec.bins.size();
  std::vector<double> logs(n);
  double mean = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    logs[i] = std::log(spec.bins[i] + 1e-10);
    mean += logs[i];
  }
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (double v : logs) var += (v - mean) * (v - mean);
  var /= static_cast<double>(n);
  std::vector<float> out(n, 0.0f);
  if (var < 1e-20) return out;
  const double inv = 1.0 / std::sqrt(var);
  for (std::size_t i = 0; i < n; ++i) out[i] = static_cast<float>((logs[i] - mean) * inv);
  return out;
}

// --- feature cache -----------------------------------------------------------

namespace {

void put_u32(std::string& b, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) b.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::uint32_t get_u32(std::string_view b, std::size_t at) {
  std::uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(b[at + i]);
  return v;
}

}  // namespace

std::string encode_feature_cache(std::span<const Spectrogram> specs) {
  std::string b = "MESF";
  b.push_back(static_cast<char>(kFeatureCacheVersion));
  const std::uint32_t n_fft = specs.empty() ? 0 : static_cast<std::uint32_t>(specs[0].n_fft);
  const std::uint32_t f = specs.empty() ? 0 : static_cast<std::uint32_t>(specs[0].freq_bins);
  const std::uint32_t t = specs.empty() ? 0 : static_cast<std::uint32_t>(specs[0].frames);
  put_u32(b, n_fft);
  put_u32(b, f);
  put_u32(b, t);
  put_u32(b, static_cast<std::uint32_t>(specs.size()));
  for (const auto& s : specs) {
    if (static_cast<std::uint32_t>(s.freq_bins) != f || static_cast<std::uint32_t>(s.frames) != t)
      throw Error(ErrorCode::ShapeError, "feature cache requires equal spectrogram shapes");
    for (double v : s.bins) put_u32(b, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  }
  return b;
}

FeatureCache decode_feature_cache(std::string_view bytes) {
  constexpr std::size_t kHeader = 4 + 1 + 16;
  if (bytes.size() < kHeader || bytes.substr(0, 4) != "MESF")
    throw Error(ErrorCode::ParseError, "not a MESF feature cache");
  if (static_cast<std::uint8_t>(bytes[4]) != kFeatureCacheVersion)
    throw Error(ErrorCode::UnsupportedFormat, "unsupported feature cache version");
  FeatureCache cache;
  cache.n_fft = static_cast<int>(get_u32(bytes, 5));
  cache.freq_bins = static_cast<int>(get_u32(bytes, 9));
  cache.frames = static_cast<int>(get_u32(bytes, 13));
  const auto count = get_u32(bytes, 17);
  const std::size_t per = static_cast<std::size_t>(cache.freq_bins) * cache.frames;
  if (bytes.size() != kHeader + 4 * per * count) throw Error(ErrorCode::ParseError, "feature cache size mismatch");
  std::size_t at = kHeader;
  cache.matrices.resize(count);
  for (auto& m : cache.matrices) {
    m.resize(per);
    for (auto& v : m) {
      v = std::bit_cast<float>(get_u32(bytes, at));
      at += 4;
    }
  }
  return cache;
}

}  // namespace murmur
