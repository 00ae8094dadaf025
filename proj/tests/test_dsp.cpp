#include <doctest.h>

#include <cmath>
#include <complex>
#include <numbers>
#include <numeric>

#include "murmur/dsp.hpp"
#include "murmur/error.hpp"
#include "murmur/random.hpp"

using namespace murmur;

namespace {

Waveform wave(double seconds, double (*fn)(double) = nullptr) {
  Waveform w;
  w.samples.resize(static_cast<std::size_t>(std::llround(seconds * kSampleRateHz)));
  for (std::size_t i = 0; i < w.samples.size(); ++i) w.samples[i] = fn ? fn(i / 4000.0) : 0.0;
  return w;
}

Segment seg_of(std::vector<double> x) {
  Segment s;
  s.samples = std::move(x);
  return s;
}

Spectrogram one_hot_energy(int bin, int n_fft = 128) {
  Spectrogram s;
  s.n_fft = n_fft;
  s.freq_bins = 33;
  s.frames = 2;
  s.freq_resolution_hz = 4000.0 / n_fft;
  s.bins.assign(66, 0.0);
  s.bins[static_cast<std::size_t>(bin) * 2] = 5.0;
  return s;
}

}  // namespace

TEST_CASE("segment counts") {
  CHECK(segment(wave(8), 2, 1).size() == 7);
  CHECK(segment(wave(2), 2, 1).size() == 1);
  CHECK(segment(wave(8), 2, 0.25).size() == 25);
  CHECK(segment(wave(1.5), 2, 1).empty());
  const auto s = segment(wave(8), 2, 1);
  CHECK(s[3].start_s == 3.0);
  for (const auto& x : s) CHECK(x.samples.size() == 8000);
}

TEST_CASE("segment rejects bad arguments") {
  CHECK_THROWS_AS(segment(wave(8), 2, 0), Error);
  Waveform w = wave(8);
  w.sample_rate_hz = 8000;
  CHECK_THROWS_AS(segment(w, 2, 1), Error);
}

TEST_CASE("stft shape and zero input") {
  const auto spec = stft_spectrogram(seg_of(std::vector<double>(8000, 0.0)), 128);
  CHECK(spec.freq_bins == 33);
  CHECK(spec.frames == 124);
  for (double v : spec.bins) CHECK(v == 0.0);
  CHECK(stft_spectrogram(seg_of(std::vector<double>(8000, 0.0)), 64).freq_bins == 17);
  CHECK(stft_spectrogram(seg_of(std::vector<double>(8000, 0.0)), 256).freq_bins == 65);
  CHECK_THROWS_AS(stft_spectrogram(seg_of(std::vector<double>(8000, 0.0)), 100), Error);
  try {
    stft_spectrogram(seg_of(std::vector<double>(100, 0.0)), 128);
    FAIL("expected TooShort");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::TooShort);
  }
}

TEST_CASE("stft of a 500 Hz tone peaks at bin 16") {
  std::vector<double> x(8000);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = 1000 * std::sin(2 * std::numbers::pi * 500 * i / 4000.0);
  const auto spec = stft_spectrogram(seg_of(x), 128);
  for (int t = 0; t < spec.frames; ++t) {
    int best = 0;
    for (int f = 1; f < spec.freq_bins; ++f)
      if (spec.at(f, t) > spec.at(best, t)) best = f;
    CHECK(best == 16);
  }
}

TEST_CASE("stft matches a direct DFT oracle") {
  Rng rng(3);
  std::vector<double> x(512);
  for (auto& v : x) v = gaussian(rng);
  const auto spec = stft_power(x, 128, 1000.0);
  for (int t : {0, 3}) {
    for (int f : {0, 5, 32}) {
      std::complex<double> acc = 0;
      for (int n = 0; n < 128; ++n) {
        const double w = 0.5 * (1 - std::cos(2 * std::numbers::pi * n / 128));
        acc += w * x[t * 64 + n] * std::polar(1.0, -2 * std::numbers::pi * f * n / 128);
      }
      CHECK(spec.at(f, t) == doctest::Approx(std::norm(acc)).epsilon(1e-9));
    }
  }
}

TEST_CASE("parseval over the full one-sided spectrum") {
  Rng rng(11);
  std::vector<double> x(1024);
  for (auto& v : x) v = gaussian(rng);
  const int n = 128;
  // 2000 Hz keeps every one-sided bin.
  const auto spec = stft_power(x, n, 2000.0);
  REQUIRE(spec.freq_bins == n / 2 + 1);
  for (int t = 0; t < spec.frames; ++t) {
    double time_energy = 0;
    for (int i = 0; i < n; ++i) {
      const double w = 0.5 * (1 - std::cos(2 * std::numbers::pi * i / n));
      time_energy += std::pow(w * x[t * n / 2 + i], 2);
    }
    double freq = spec.at(0, t) + spec.at(n / 2, t);
    for (int f = 1; f < n / 2; ++f) freq += 2 * spec.at(f, t);
    CHECK(freq / n == doctest::Approx(time_energy).epsilon(1e-6));
  }
}

TEST_CASE("stft is shift covariant by one hop") {
  Rng rng(5);
  std::vector<double> x(8000 + 64);
  for (auto& v : x) v = gaussian(rng);
  const auto a = stft_power(std::span<const double>(x.data() + 64, 8000), 128, 1000.0);
  const auto b = stft_power(std::span<const double>(x.data(), 8000), 128, 1000.0);
  for (int t = 0; t + 1 < b.frames; ++t)
    for (int f = 0; f < b.freq_bins; ++f) CHECK(std::fabs(b.at(f, t + 1) - a.at(f, t)) <= 1e-9 * (1 + a.at(f, t)));
}

TEST_CASE("psd_ratio examples") {
  CHECK(psd_ratio(one_hot_energy(3)) == doctest::Approx(1.0));
  CHECK(psd_ratio(one_hot_energy(0)) == doctest::Approx(0.0));
  auto uniform = one_hot_energy(0);
  std::fill(uniform.bins.begin(), uniform.bins.end(), 1.0);
  CHECK(psd_ratio(uniform) == doctest::Approx(6.0 / 33.0).epsilon(1e-12));
  auto zero = one_hot_energy(0);
  std::fill(zero.bins.begin(), zero.bins.end(), 0.0);
  CHECK(psd_ratio(zero) == 0.0);
}

TEST_CASE("psd_ratio range and monotone under in-band energy") {
  Rng rng(9);
  for (int trial = 0; trial < 200; ++trial) {
    auto s = one_hot_energy(0);
    for (auto& v : s.bins) v = uniform01(rng);
    const double r = psd_ratio(s);
    CHECK(r >= 0.0);
    CHECK(r <= 1.0);
    s.bins[static_cast<std::size_t>(1 + trial % 6) * 2 + 1] += uniform01(rng);
    CHECK(psd_ratio(s) >= r);
  }
}

TEST_CASE("quality filter examples") {
  const std::vector<double> starts6{0, 1, 2, 3, 4, 5};
  const std::vector<double> r6{0.5, 0.6, 0.7, 0.8, 0.9, 0.95};
  CHECK(quality_filter_ratios(r6, starts6, 0.45).kept_count() == 6);

  const std::vector<double> starts7{0, 1, 2, 3, 4, 5, 6};
  const std::vector<double> low7(7, 0.1);
  const auto q = quality_filter_ratios(low7, starts7, 0.45);
  CHECK(q.kept_count() == 5);
  for (int i = 0; i < 5; ++i) CHECK(q.kept[i]);  // ties go to the earliest
  CHECK_FALSE(q.kept[5]);

  const std::vector<double> low3(3, 0.1), starts3{0, 1, 2};
  CHECK(quality_filter_ratios(low3, starts3, 0.45).kept_count() == 3);

  const std::vector<double> mixed{0.1, 0.9, 0.2, 0.05, 0.3, 0.4, 0.35};
  const auto m = quality_filter_ratios(mixed, starts7, 0.45);
  CHECK(m.kept_count() == 5);
  CHECK_FALSE(m.kept[0]);
  CHECK_FALSE(m.kept[3]);
}

TEST_CASE("quality filter never returns fewer than min(min_keep, n)") {
  Rng rng(21);
  for (int trial = 0; trial < 300; ++trial) {
    const auto n = 1 + uniform_index(rng, 12);
    std::vector<double> r(n), s(n);
    for (std::size_t i = 0; i < n; ++i) {
      r[i] = uniform01(rng);
      s[i] = static_cast<double>(i);
    }
    const double thr = uniform01(rng);
    const auto q = quality_filter_ratios(r, s, thr);
    CHECK(q.kept_count() >= std::min<std::size_t>(5, n));
    for (std::size_t i = 0; i < n; ++i)
      if (r[i] >= thr) CHECK(q.kept[i]);
  }
}

TEST_CASE("network input is log power, standardized") {
  Rng rng(2);
  std::vector<double> x(8000);
  for (auto& v : x) v = gaussian(rng);
  const auto spec = stft_spectrogram(seg_of(x), 128);
  const auto in = network_input(spec);
  REQUIRE(in.size() == 33u * 124u);
  const double mean = std::accumulate(in.begin(), in.end(), 0.0) / in.size();
  double var = 0;
  for (float v : in) var += (v - mean) * (v - mean);
  var /= in.size();
  CHECK(mean == doctest::Approx(0.0).epsilon(1e-5));
  CHECK(var == doctest::Approx(1.0).epsilon(1e-4));
  // Order is preserved by the monotone transform.
  CHECK((in[0] < in[1]) == (spec.bins[0] < spec.bins[1]));
}

TEST_CASE("feature cache round trip and errors") {
  std::vector<Spectrogram> specs;
  Rng rng(4);
  for (int k = 0; k < 3; ++k) {
    std::vector<double> x(8000);
    for (auto& v : x) v = gaussian(rng);
    specs.push_back(stft_spectrogram(seg_of(x), 128));
  }
  const auto bytes = encode_feature_cache(specs);
  CHECK(bytes.substr(0, 4) == "MESF");
  const auto cache = decode_feature_cache(bytes);
  CHECK(cache.n_fft == 128);
  CHECK(cache.freq_bins == 33);
  CHECK(cache.frames == 124);
  REQUIRE(cache.matrices.size() == 3);
  CHECK(cache.matrices[1][77] == static_cast<float>(specs[1].bins[77]));
  CHECK_THROWS_AS(decode_feature_cache("JUNKJUNKJUNKJUNKJUNKJUNK"), Error);
  auto wrong = bytes;
  wrong[4] = 9;
  CHECK_THROWS_AS(decode_feature_cache(wrong), Error);
  CHECK_THROWS_AS(decode_feature_cache(bytes.substr(0, bytes.size() - 1)), Error);
}
