#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "murmur/dataset.hpp"

namespace murmur {

struct SegmentSource {
  std::string patient_id;
  Location location = Location::Other;
};

struct Segment {
  std::vector<double> samples;
  double start_s = 0.0;
  SegmentSource source;
};

// Left-aligned windows of window_s seconds every hop_s seconds; the trailing
// remainder is dropped. Windows and hops are rounded to whole samples.
std::vector<Segment> segment(const Waveform& waveform, double window_s, double hop_s);

// Row-major [freq_bins x frames] matrix of |X|^2 values.
struct Spectrogram {
  int n_fft = 0;
  int freq_bins = 0;
  int frames = 0;
  double freq_resolution_hz = 0.0;
  std::vector<double> bins;
  double start_s = 0.0;
  SegmentSource source;

  double at(int f, int t) const { return bins[static_cast<std::size_t>(f) * frames + t]; }
};

inline constexpr double kMaxFreqHz = 1000.0;

// Periodic Hann, hop n_fft/2, no padding; keeps one-sided bins whose center
// frequency is <= max_freq_hz.
Spectrogram stft_power(std::span<const double> samples, int n_fft, double max_freq_hz,
                       int sample_rate_hz = kSampleRateHz);

// n_fft in {64, 128, 256}, truncated at 1 kHz.
Spectrogram stft_spectrogram(const Segment& segment, int n_fft);

// In-band (20-200 Hz) over total energy of the retained bins; 0 when the total is 0.
double psd_ratio(const Spectrogram& spec);

struct QualityReport {
  std::vector<double> psd_ratio;
  std::vector<bool> kept;
  double threshold = 0.0;

  std::size_t kept_count() const;
};

// Keeps ratio >= psd_thr; tops up to min(min_keep, n) with the best remaining
// ratios, earlier start_s first on ties.
QualityReport quality_filter_ratios(std::span<const double> ratios, std::span<const double> start_s,
                                    double psd_thr, int min_keep = 5);
QualityReport quality_filter(std::span<const Spectrogram> specs, double psd_thr, int min_keep = 5);

// Network input representation: log(|X|^2 + 1e-10), standardized per spectrogram.
std::vector<float> network_input(const Spectrogram& spec);

// "MESF" feature cache: magic, version byte, then uint32 n_fft, F, T, count and
// count row-major float32 matrices, all little-endian.
inline constexpr std::uint8_t kFeatureCacheVersion = 1;

struct FeatureCache {
  int n_fft = 0;
  int freq_bins = 0;
  int frames = 0;
  std::vector<std::vector<float>> matrices;
};

std::string encode_feature_cache(std::span<const Spectrogram> specs);
FeatureCache decode_feature_cache(std::string_view bytes);

}  // namespace murmur
