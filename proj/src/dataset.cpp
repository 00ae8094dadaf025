#include "murmur/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <numbers>
#include <set>
#include <sstream>

#include "murmur/error.hpp"
#include "murmur/random.hpp"

namespace murmur {

namespace fs = std::filesystem;

std::string_view to_string(MurmurLabel label) {
  switch (label) {
    case MurmurLabel::Absent: return "Absent";
    case MurmurLabel::Present: return "Present";
    case MurmurLabel::Unknown: return "Unknown";
  }
  return "Unknown";
}

std::string_view to_string(Location location) {
  switch (location) {
    case Location::AV: return "AV";
    case Location::PV: return "PV";
    case Location::TV: return "TV";
    case Location::MV: return "MV";
    case Location::Other: return "Other";
  }
  return "Other";
}

std::string_view to_string(Split split) {
  switch (split) {
    case Split::Train: return "Train";
    case Split::Validation: return "Validation";
    case Split::Test: return "Test";
  }
  return "Train";
}

MurmurLabel parse_label(std::string_view token) {
  if (token == "Absent") return MurmurLabel::Absent;
  if (token == "Present") return MurmurLabel::Present;
  if (token == "Unknown") return MurmurLabel::Unknown;
  throw Error(ErrorCode::ParseError, "unknown murmur label '" + std::string(token) + "'");
}

Location parse_location(std::string_view token) {
  if (token == "AV") return Location::AV;
  if (token == "PV") return Location::PV;
  if (token == "TV") return Location::TV;
  if (token == "MV") return Location::MV;
  if (token == "Other") return Location::Other;
  throw Error(ErrorCode::ParseError, "unknown location '" + std::string(token) + "'");
}

Split parse_split(std::string_view token) {
  if (token == "Train") return Split::Train;
  if (token == "Validation") return Split::Validation;
  if (token == "Test") return Split::Test;
  throw Error(ErrorCode::ParseError, "unknown split '" + std::string(token) + "'");
}

std::vector<PatientRecord> DatasetManifest::in_split(Split split) const {
  std::vector<PatientRecord> out;
  for (const auto& e : entries)
    if (e.split == split) out.push_back(e);
  return out;
}

namespace {

std::vector<std::string_view> split_on(std::string_view s, char sep) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    if (pos == std::string_view::npos) {
      parts.push_back(s.substr(start));
      return parts;
    }
    parts.push_back(s.substr(start, pos - start));
    start = pos + 1;
  }
}

[[noreturn]] void parse_fail(std::size_t line, const std::string& what) {
  throw Error(ErrorCode::ParseError, "line " + std::to_string(line) + ": " + what);
}

}  // namespace

DatasetManifest parse_manifest(std::string_view text) {
  DatasetManifest manifest;
  std::map<std::string, std::size_t, std::less<>> index;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty() || line.front() == '#') continue;

    const auto fields = split_on(line, '\t');
    if (fields.size() != 4) parse_fail(line_no, "expected 4 tab-separated fields");
    PatientRecord rec;
    rec.patient_id = std::string(fields[0]);
    if (rec.patient_id.empty()) parse_fail(line_no, "empty patient_id");
    try {
      rec.split = parse_split(fields[1]);
      rec.label = parse_label(fields[2]);
    } catch (const Error& e) {
      parse_fail(line_no, e.what());
    }
    if (fields[3].empty()) parse_fail(line_no, "no recordings");
    for (auto item : split_on(fields[3], ',')) {
      const auto colon = item.find(':');
      if (colon == std::string_view::npos || colon + 1 >= item.size())
        parse_fail(line_no, "recording must be loc:path");
      RecordingRef ref;
      try {
        ref.location = parse_location(item.substr(0, colon));
      } catch (const Error& e) {
        parse_fail(line_no, e.what());
      }
      ref.path = std::string(item.substr(colon + 1));
      rec.recordings.push_back(std::move(ref));
    }

    if (auto it = index.find(rec.patient_id); it != index.end()) {
      auto& existing = manifest.entries[it->second];
      if (existing.split != rec.split)
        throw Error(ErrorCode::DuplicatePatient,
                    "patient '" + rec.patient_id + "' appears in " +
                        std::string(to_string(existing.split)) + " and " +
                        std::string(to_string(rec.split)));
      if (existing.label != rec.label) parse_fail(line_no, "conflicting labels for " + rec.patient_id);
      existing.recordings.insert(existing.recordings.end(), rec.recordings.begin(),
                                 rec.recordings.end());
    } else {
      index.emplace(rec.patient_id, manifest.entries.size());
      manifest.entries.push_back(std::move(rec));
    }
  }

  for (const auto& e : manifest.entries) {
    std::map<Location, int> seen;
    for (const auto& r : e.recordings)
      if (++seen[r.location] > 2)
        throw Error(ErrorCode::ParseError, "patient '" + e.patient_id + "' has location " +
                                               std::string(to_string(r.location)) +
                                               " more than twice");
  }
  return manifest;
}

std::string write_manifest(const DatasetManifest& manifest) {
  std::ostringstream out;
  out << "# patient_id\tsplit\tlabel\trecordings\n";
  for (const auto& e : manifest.entries) {
    out << e.patient_id << '\t' << to_string(e.split) << '\t' << to_string(e.label) << '\t';
    for (std::size_t i = 0; i < e.recordings.size(); ++i) {
      if (i) out << ',';
      out << to_string(e.recordings[i].location) << ':' << e.recordings[i].path;
    }
    out << '\n';
  }
  return out.str();
}

namespace {

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace

DatasetManifest load_manifest_file(const fs::path& path) {
  auto manifest = parse_manifest(read_file(path));
  const auto base = path.parent_path();
  for (auto& e : manifest.entries)
    for (auto& r : e.recordings)
      if (fs::path(r.path).is_relative()) r.path = (base / r.path).string();
  return manifest;
}

// --- WAV ---------------------------------------------------------------------

namespace {

std::uint32_t read_u32(std::string_view b, std::size_t at) {
  std::uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(b[at + i]);
  return v;
}

std::uint16_t read_u16(std::string_view b, std::size_t at) {
  return static_cast<std::uint16_t>(static_cast<unsigned char>(b[at]) |
                                    (static_cast<unsigned char>(b[at + 1]) << 8));
}

void put_u32(std::string& b, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) b.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_u16(std::string& b, std::uint16_t v) {
  b.push_back(static_cast<char>(v & 0xFF));
  b.push_back(static_cast<char>(v >> 8));
}

}  // namespace

Waveform parse_wav(std::string_view bytes) {
  if (bytes.size() < 12 || bytes.substr(0, 4) != "RIFF" || bytes.substr(8, 4) != "WAVE")
    throw Error(ErrorCode::ParseError, "not a RIFF/WAVE file");

  bool have_fmt = false;
  std::uint32_t rate = 0;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const auto id = bytes.substr(pos, 4);
    const std::uint32_t size = read_u32(bytes, pos + 4);
    const std::size_t body = pos + 8;
    if (id == "fmt ") {
      if (size < 16 || body + 16 > bytes.size()) throw Error(ErrorCode::ParseError, "truncated fmt chunk");
      const auto format = read_u16(bytes, body);
      const auto channels = read_u16(bytes, body + 2);
      rate = read_u32(bytes, body + 4);
      const auto bits = read_u16(bytes, body + 14);
      if (format != 1) throw Error(ErrorCode::UnsupportedFormat, "only PCM (format 1) is supported");
      if (channels != 1) throw Error(ErrorCode::UnsupportedFormat, "only mono is supported");
      if (bits != 16) throw Error(ErrorCode::UnsupportedFormat, "only 16-bit samples are supported");
      if (rate == 0) throw Error(ErrorCode::ParseError, "zero sample rate");
      have_fmt = true;
    } else if (id == "data") {
      if (!have_fmt) throw Error(ErrorCode::ParseError, "data chunk before fmt chunk");
      if (body + size > bytes.size() || size % 2 != 0)
        throw Error(ErrorCode::ParseError, "truncated data chunk");
      Waveform w;
      w.sample_rate_hz = static_cast<int>(rate);
      w.samples.resize(size / 2);
      for (std::size_t i = 0; i < w.samples.size(); ++i)
        w.samples[i] = static_cast<std::int16_t>(read_u16(bytes, body + 2 * i)) / 32768.0;
      return w;
    }
    pos = body + size + (size & 1u);
  }
  throw Error(ErrorCode::ParseError, have_fmt ? "missing data chunk" : "missing fmt chunk");
}

Waveform load_recording(const fs::path& path) { return parse_wav(read_file(path)); }

std::string encode_wav(const Waveform& waveform) {
  const auto n = static_cast<std::uint32_t>(waveform.samples.size());
  std::string b;
  b.reserve(44 + 2 * n);
  b += "RIFF";
  put_u32(b, 36 + 2 * n);
  b += "WAVEfmt ";
  put_u32(b, 16);
  put_u16(b, 1);
  put_u16(b, 1);
  put_u32(b, static_cast<std::uint32_t>(waveform.sample_rate_hz));
  put_u32(b, static_cast<std::uint32_t>(waveform.sample_rate_hz) * 2);
  put_u16(b, 2);
  put_u16(b, 16);
  b += "data";
  put_u32(b, 2 * n);
  for (double s : waveform.samples) {
    const double q = std::clamp(std::nearbyint(s * 32768.0), -32768.0, 32767.0);
    put_u16(b, static_cast<std::uint16_t>(static_cast<std::int16_t>(q)));
  }
  return b;
}

void save_recording(const fs::path& path, const Waveform& waveform) {
  write_file(path, encode_wav(waveform));
}

Waveform resample_linear(const Waveform& waveform, int target_rate_hz) {
  if (target_rate_hz <= 0) throw Error(ErrorCode::ConfigError, "target rate must be positive");
  if (waveform.sample_rate_hz == target_rate_hz) return waveform;
  Waveform out = waveform;
  out.sample_rate_hz = target_rate_hz;
  const auto& in = waveform.samples;
  const auto n_out = static_cast<std::size_t>(
      std::floor(waveform.duration_s() * target_rate_hz));
  out.samples.assign(n_out, 0.0);
  const double step = static_cast<double>(waveform.sample_rate_hz) / target_rate_hz;
  for (std::size_t i = 0; i < n_out; ++i) {
    const double x = static_cast<double>(i) * step;
    const auto i0 = static_cast<std::size_t>(x);
    const double frac = x - static_cast<double>(i0);
    const double a = in[std::min(i0, in.size() - 1)];
    const double b = in[std::min(i0 + 1, in.size() - 1)];
    out.samples[i] = a + frac * (b - a);
  }
  return out;
}

// --- synthetic PCG -----------------------------------------------------------

namespace {

void add_heart_sound(std::vector<double>& x, double center_s, double freq_hz, double amp,
                     double sigma_s, double phase) {
  const double fs = kSampleRateHz;
  const auto lo = static_cast<long>(std::floor((center_s - 4 * sigma_s) * fs));
  const auto hi = static_cast<long>(std::ceil((center_s + 4 * sigma_s) * fs));
  for (long i = std::max(0L, lo); i < std::min<long>(hi, static_cast<long>(x.size())); ++i) {
    const double t = i / fs - center_s;
    x[i] += amp * std::exp(-0.5 * t * t / (sigma_s * sigma_s)) *
            std::sin(2 * std::numbers::pi * freq_hz * t + phase);
  }
}

double rms(const std::vector<double>& x) {
  double s = 0;
  for (double v : x) s += v * v;
  return x.empty() ? 0.0 : std::sqrt(s / static_cast<double>(x.size()));
}

}  // namespace

Waveform synth_recording(MurmurLabel label, double duration_s, std::uint64_t seed,
                         const SynthOptions& options) {
  if (duration_s < 2.0) throw Error(ErrorCode::TooShort, "synthetic recordings need at least 2 s");
  if (label == MurmurLabel::Unknown)
    throw Error(ErrorCode::DomainError, "synthetic label must be Absent or Present");

  const double fs = kSampleRateHz;
  const auto n = static_cast<std::size_t>(std::llround(duration_s * fs));
  // Heart sounds and noise draw from separate streams so that the Present and
  // Absent variants of one seed share the same cardiac cycle.
  Rng beat_rng(derive_seed(seed, 1));
  Rng murmur_rng(derive_seed(seed, 2));
  Rng noise_rng(derive_seed(seed, 3));

  std::vector<double> clean(n, 0.0);
  const double base_period = 60.0 / uniform(beat_rng, 55.0, 75.0);
  const double s1_freq = uniform(beat_rng, 35.0, 60.0);
  const double s2_freq = uniform(beat_rng, 60.0, 100.0);

  struct Systole { double start, end; };
  std::vector<Systole> systoles;
  double onset = uniform(beat_rng, 0.05, 0.5);
  while (onset < duration_s) {
    const double period = base_period * uniform(beat_rng, 0.95, 1.05);
    const double systole = 0.3 * period + uniform(beat_rng, 0.0, 0.03);
    add_heart_sound(clean, onset, s1_freq, 1.0, 0.018, uniform(beat_rng, 0, 2 * std::numbers::pi));
    add_heart_sound(clean, onset + systole, s2_freq, 0.7, 0.014,
                    uniform(beat_rng, 0, 2 * std::numbers::pi));
    systoles.push_back({onset + 0.06, onset + systole - 0.05});
    onset += period;
  }

  if (label == MurmurLabel::Present) {
    // Band-limited noise as a sum of random-phase tones strictly inside 100-400 Hz.
    constexpr int kTones = 48;
    std::vector<double> freq(kTones), phase(kTones);
    for (int k = 0; k < kTones; ++k) {
      freq[k] = uniform(murmur_rng, 100.0, 400.0);
      phase[k] = uniform(murmur_rng, 0.0, 2 * std::numbers::pi);
    }
    const double amp = 0.12 * options.murmur_gain;
    for (const auto& s : systoles) {
      const auto lo = static_cast<long>(s.start * fs);
      const auto hi = std::min<long>(static_cast<long>(s.end * fs), static_cast<long>(n));
      const double len = std::max(1.0, static_cast<double>(hi - lo));
      for (long i = std::max(0L, lo); i < hi; ++i) {
        const double u = (static_cast<double>(i - lo) + 0.5) / len;
        const double envelope = std::sin(std::numbers::pi * u);  // smooth on/off
        double v = 0;
        for (int k = 0; k < kTones; ++k) v += std::sin(2 * std::numbers::pi * freq[k] * i / fs + phase[k]);
        clean[i] += amp * envelope * v / std::sqrt(kTones / 2.0);
      }
    }
  }

  const double noise_sigma = options.noise_rms_fraction * rms(clean);
  Waveform w;
  w.sample_rate_hz = kSampleRateHz;
  w.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) w.samples[i] = 0.45 * (clean[i] + noise_sigma * gaussian(noise_rng));
  return w;
}

SynthCorpus synth_corpus(const SynthCorpusOptions& o) {
  if (o.patients < 1) throw Error(ErrorCode::ConfigError, "patients must be positive");
  if (o.min_locations < 1 || o.max_locations > 4 || o.min_locations > o.max_locations)
    throw Error(ErrorCode::ConfigError, "locations must satisfy 1 <= min <= max <= 4");
  if (o.train_fraction < 0 || o.validation_fraction < 0 ||
      o.train_fraction + o.validation_fraction > 1.0)
    throw Error(ErrorCode::ConfigError, "split fractions must be non-negative and sum to <= 1");

  Rng rng(derive_seed(o.seed, 100));
  SynthCorpus corpus;
  const int n_train = static_cast<int>(std::lround(o.patients * o.train_fraction));
  const int n_val = static_cast<int>(std::lround(o.patients * o.validation_fraction));

  // Labels are assigned by a shuffled quota so every split sees both classes.
  std::vector<MurmurLabel> labels(static_cast<std::size_t>(o.patients), MurmurLabel::Absent);
  const int n_present = std::max(1, static_cast<int>(std::lround(o.patients * o.present_fraction)));
  const int n_unknown = static_cast<int>(std::lround(o.patients * o.unknown_fraction));
  {
    // Interleave quotas across the patient index so each split gets a fair share.
    double present_acc = 0, unknown_acc = 0;
    const double present_rate = static_cast<double>(n_present) / o.patients;
    const double unknown_rate = static_cast<double>(n_unknown) / o.patients;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      present_acc += present_rate;
      unknown_acc += unknown_rate;
      if (present_acc >= 1.0 - 1e-9) {
        labels[i] = MurmurLabel::Present;
        present_acc -= 1.0;
      } else if (unknown_acc >= 1.0 - 1e-9) {
        labels[i] = MurmurLabel::Unknown;
        unknown_acc -= 1.0;
      }
    }
  }

  const std::vector<Location> all_locations{Location::AV, Location::PV, Location::TV, Location::MV};
  for (int p = 0; p < o.patients; ++p) {
    PatientRecord rec;
    char id[32];
    std::snprintf(id, sizeof id, "syn%04d", p);
    rec.patient_id = id;
    rec.split = p < n_train ? Split::Train : (p < n_train + n_val ? Split::Validation : Split::Test);
    rec.label = labels[static_cast<std::size_t>(p)];

    auto locs = all_locations;
    shuffle(locs.begin(), locs.end(), rng);
    const int n_loc = o.min_locations +
                      static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(
                                                              o.max_locations - o.min_locations + 1)));
    locs.resize(static_cast<std::size_t>(n_loc));
    std::sort(locs.begin(), locs.end());

    // Unknown patients: random underlying state buried in heavy noise.
    const MurmurLabel underlying =
        rec.label == MurmurLabel::Unknown
            ? (uniform01(rng) < 0.5 ? MurmurLabel::Present : MurmurLabel::Absent)
            : rec.label;
    for (auto loc : locs) {
      const double duration = uniform(rng, o.min_duration_s, o.max_duration_s);
      SynthOptions so;
      so.murmur_gain = uniform(rng, 0.7, 1.0);
      if (rec.label == MurmurLabel::Unknown) so.noise_rms_fraction = uniform(rng, 0.8, 1.5);
      const auto rec_seed = derive_seed(o.seed, 1000 + static_cast<std::uint64_t>(p) * 8 +
                                                    static_cast<std::uint64_t>(loc));
      Waveform w = synth_recording(underlying, std::round(duration * 4) / 4, rec_seed, so);
      w.patient_id = rec.patient_id;
      w.location = loc;
      rec.recordings.push_back({loc, rec.patient_id + "_" + std::string(to_string(loc)) + ".wav"});
      corpus.waveforms.push_back(std::move(w));
    }
    corpus.manifest.entries.push_back(std::move(rec));
  }
  return corpus;
}

void write_corpus(const SynthCorpus& corpus, const fs::path& dir) {
  fs::create_directories(dir);
  write_file(dir / "manifest.tsv", write_manifest(corpus.manifest));
  std::size_t k = 0;
  for (const auto& e : corpus.manifest.entries)
    for (const auto& r : e.recordings) save_recording(dir / r.path, corpus.waveforms.at(k++));
}

}  // namespace murmur
