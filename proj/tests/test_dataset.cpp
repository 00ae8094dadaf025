#include <doctest.h>

#include <cmath>
#include <complex>
#include <numbers>
#include <fstream>
#include <functional>
#include <map>
#include <set>

#include "murmur/dataset.hpp"
#include "murmur/error.hpp"
#include "test_util.hpp"

using namespace murmur;

namespace {

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected murmur::Error");
  return ErrorCode::IoError;
}

std::string wav_header(int channels, int bits, int format, int rate, std::uint32_t data_bytes) {
  std::string b = "RIFF";
  auto u32 = [&](std::uint32_t v) { for (int i = 0; i < 4; ++i) b.push_back(static_cast<char>((v >> (8 * i)) & 0xFF)); };
  auto u16 = [&](std::uint16_t v) { for (int i = 0; i < 2; ++i) b.push_back(static_cast<char>((v >> (8 * i)) & 0xFF)); };
  u32(36 + data_bytes);
  b += "WAVEfmt ";
  u32(16);
  u16(static_cast<std::uint16_t>(format));
  u16(static_cast<std::uint16_t>(channels));
  u32(static_cast<std::uint32_t>(rate));
  u32(static_cast<std::uint32_t>(rate * channels * bits / 8));
  u16(static_cast<std::uint16_t>(channels * bits / 8));
  u16(static_cast<std::uint16_t>(bits));
  b += "data";
  u32(data_bytes);
  return b;
}

double band_energy(const std::vector<double>& x, double lo, double hi, double fs) {
  // Direct DFT restricted to the band.
  const std::size_t n = x.size();
  double e = 0;
  for (std::size_t k = static_cast<std::size_t>(std::ceil(lo * n / fs)); k <= static_cast<std::size_t>(hi * n / fs); ++k) {
    std::complex<double> acc = 0;
    for (std::size_t t = 0; t < n; ++t) acc += x[t] * std::polar(1.0, -2 * std::numbers::pi * k * t / n);
    e += std::norm(acc);
  }
  return e;
}

}  // namespace

TEST_CASE("manifest: single row") {
  const auto m = parse_manifest("p001\tTrain\tAbsent\tAV:p001_AV.wav\n");
  REQUIRE(m.entries.size() == 1);
  CHECK(m.entries[0].patient_id == "p001");
  CHECK(m.entries[0].label == MurmurLabel::Absent);
  CHECK(m.entries[0].split == Split::Train);
  REQUIRE(m.entries[0].recordings.size() == 1);
  CHECK(m.entries[0].recordings[0].location == Location::AV);
  CHECK(m.entries[0].recordings[0].path == "p001_AV.wav");
}

TEST_CASE("manifest: empty text and comments") {
  CHECK(parse_manifest("").entries.empty());
  CHECK(parse_manifest("# header only\n\n").entries.empty());
}

TEST_CASE("manifest: duplicate patient across splits") {
  CHECK(code_of([] { parse_manifest("p1\tTrain\tAbsent\tAV:a.wav\np1\tTest\tAbsent\tPV:b.wav\n"); }) ==
        ErrorCode::DuplicatePatient);
}

TEST_CASE("manifest: malformed rows report line numbers") {
  try {
    parse_manifest("p1\tTrain\tAbsent\tAV:a.wav\np2\tTrain\tMaybe\tAV:b.wav\n");
    FAIL("expected ParseError");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ParseError);
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
  CHECK(code_of([] { parse_manifest("p1\tTrain\tAbsent\n"); }) == ErrorCode::ParseError);
  CHECK(code_of([] { parse_manifest("p1\tTrain\tAbsent\tXX:a.wav\n"); }) == ErrorCode::ParseError);
  CHECK(code_of([] { parse_manifest("p1\tTrain\tAbsent\tAV:a,AV:b,AV:c\n"); }) == ErrorCode::ParseError);
}

TEST_CASE("manifest: write/parse round trip") {
  SynthCorpusOptions o;
  o.patients = 12;
  o.unknown_fraction = 0.2;
  const auto corpus = synth_corpus(o);
  CHECK(parse_manifest(write_manifest(corpus.manifest)) == corpus.manifest);
}

TEST_CASE("wav: int16 scaling and header rate") {
  std::string b = wav_header(1, 16, 1, 4000, 6);
  for (std::int16_t v : {std::int16_t(0), std::int16_t(16384), std::int16_t(-32768)}) {
    b.push_back(static_cast<char>(v & 0xFF));
    b.push_back(static_cast<char>((v >> 8) & 0xFF));
  }
  const auto w = parse_wav(b);
  REQUIRE(w.samples.size() == 3);
  CHECK(w.samples[0] == 0.0);
  CHECK(w.samples[1] == 0.5);
  CHECK(w.samples[2] == -1.0);
  CHECK(w.sample_rate_hz == 4000);
}

TEST_CASE("wav: unsupported and truncated") {
  CHECK(code_of([] { parse_wav(wav_header(1, 8, 1, 4000, 2) + "ab"); }) == ErrorCode::UnsupportedFormat);
  CHECK(code_of([] { parse_wav(wav_header(2, 16, 1, 4000, 4) + "abcd"); }) == ErrorCode::UnsupportedFormat);
  CHECK(code_of([] { parse_wav(wav_header(1, 32, 3, 4000, 4) + "abcd"); }) == ErrorCode::UnsupportedFormat);
  CHECK(code_of([] { parse_wav(wav_header(1, 16, 1, 4000, 100) + "abcd"); }) == ErrorCode::ParseError);
  CHECK(code_of([] { parse_wav("RIFF"); }) == ErrorCode::ParseError);
}

TEST_CASE("wav: encode/decode round trip through a file") {
  TempDir dir("wav");
  Waveform w;
  for (int i = 0; i < 4000; ++i) w.samples.push_back(std::sin(i * 0.01) * 0.5);
  save_recording(dir.path / "x.wav", w);
  const auto back = load_recording(dir.path / "x.wav");
  REQUIRE(back.samples.size() == w.samples.size());
  for (std::size_t i = 0; i < w.samples.size(); ++i) CHECK(std::fabs(back.samples[i] - w.samples[i]) <= 1.0 / 32768);
}

TEST_CASE("synth: determinism, length and errors") {
  const auto a = synth_recording(MurmurLabel::Absent, 8.0, 1);
  const auto b = synth_recording(MurmurLabel::Absent, 8.0, 1);
  CHECK(a.samples == b.samples);
  CHECK(a.samples.size() == 32000);
  CHECK(synth_recording(MurmurLabel::Present, 3.3, 5).samples.size() == 13200);
  CHECK(code_of([] { synth_recording(MurmurLabel::Present, 1.0, 1); }) == ErrorCode::TooShort);
  for (double v : a.samples) CHECK(std::isfinite(v));
}

TEST_CASE("synth: Present has more 100-400 Hz energy") {
  const auto present = synth_recording(MurmurLabel::Present, 8.0, 1);
  const auto absent = synth_recording(MurmurLabel::Absent, 8.0, 1);
  // 2 s excerpt keeps the direct DFT oracle cheap.
  std::vector<double> p(present.samples.begin(), present.samples.begin() + 8000);
  std::vector<double> q(absent.samples.begin(), absent.samples.begin() + 8000);
  CHECK(band_energy(p, 100, 400, 4000) > band_energy(q, 100, 400, 4000));
}

TEST_CASE("synth corpus: both classes, no split leakage, files on disk") {
  SynthCorpusOptions o;
  o.patients = 80;
  const auto corpus = synth_corpus(o);
  std::size_t recordings = 0;
  std::set<MurmurLabel> labels;
  for (const auto& p : corpus.manifest.entries) {
    labels.insert(p.label);
    recordings += p.recordings.size();
    CHECK(p.recordings.size() >= 2);
    CHECK(p.recordings.size() <= 4);
  }
  CHECK(labels.count(MurmurLabel::Present) == 1);
  CHECK(labels.count(MurmurLabel::Absent) == 1);
  CHECK(recordings == corpus.waveforms.size());
  // parse_manifest rejects cross-split duplicates, so a clean re-parse proves no leakage.
  CHECK_NOTHROW(parse_manifest(write_manifest(corpus.manifest)));

  TempDir dir("corpus");
  write_corpus(corpus, dir.path);
  const auto loaded = load_manifest_file(dir.path / "manifest.tsv");
  REQUIRE(loaded.entries.size() == corpus.manifest.entries.size());
  const auto w = load_recording(loaded.entries[0].recordings[0].path);
  CHECK(w.samples.size() == corpus.waveforms[0].samples.size());
}

TEST_CASE("resample_linear keeps duration") {
  Waveform w;
  w.sample_rate_hz = 2000;
  w.samples.assign(4000, 0.25);
  const auto r = resample_linear(w, 4000);
  CHECK(r.sample_rate_hz == 4000);
  CHECK(r.samples.size() == 8000);
  CHECK(r.samples[123] == doctest::Approx(0.25));
}

TEST_CASE("circor adapter maps headers into a manifest") {
  TempDir dir("circor");
  auto write = [&](const std::string& name, const std::string& text) {
    std::ofstream(dir.path / name) << text;
  };
  write("1001.txt", "1001 3 4000\nAV 1001_AV.hea 1001_AV.wav 1001_AV.tsv\nMV 1001_MV.hea 1001_MV.wav 1001_MV.tsv\n"
                    "Phc 1001_Phc.hea 1001_Phc.wav 1001_Phc.tsv\n#Age: Child\n#Murmur: Present\n");
  write("1002.txt", "1002 1 4000\nPV 1002_PV.hea 1002_PV.wav 1002_PV.tsv\n#Murmur: Unknown\n");
  write("1003.txt", "1003 1 4000\nTV 1003_TV.hea 1003_TV.wav 1003_TV.tsv\n#Murmur: Absent\n");
  const auto m = circor_manifest(dir.path, 1);
  REQUIRE(m.entries.size() == 3);
  std::map<std::string, PatientRecord> by_id;
  for (const auto& p : m.entries) by_id[p.patient_id] = p;
  CHECK(by_id["1001"].label == MurmurLabel::Present);
  CHECK(by_id["1001"].recordings.size() == 3);
  CHECK(by_id["1001"].recordings[2].location == Location::Other);
  CHECK(by_id["1002"].label == MurmurLabel::Unknown);
  CHECK(by_id["1003"].label == MurmurLabel::Absent);
  CHECK(circor_manifest(dir.path, 1) == m);

  write("bad.txt", "bad 1 4000\nAV a.hea a.wav a.tsv\n");
  CHECK(code_of([&] { circor_manifest(dir.path, 1); }) == ErrorCode::ParseError);
}
