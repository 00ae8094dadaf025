#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace murmur {

inline constexpr int kSampleRateHz = 4000;

enum class MurmurLabel { Absent, Present, Unknown };
enum class Location { AV, PV, TV, MV, Other };
enum class Split { Train, Validation, Test };

std::string_view to_string(MurmurLabel label);
std::string_view to_string(Location location);
std::string_view to_string(Split split);
MurmurLabel parse_label(std::string_view token);
Location parse_location(std::string_view token);
Split parse_split(std::string_view token);

struct RecordingRef {
  Location location = Location::Other;
  std::string path;

  bool operator==(const RecordingRef&) const = default;
};

struct PatientRecord {
  std::string patient_id;
  Split split = Split::Train;
  MurmurLabel label = MurmurLabel::Unknown;
  std::vector<RecordingRef> recordings;

  bool operator==(const PatientRecord&) const = default;
};

// Rows of a manifest file, in file order. A patient belongs to exactly one split.
struct DatasetManifest {
  std::vector<PatientRecord> entries;

  std::vector<PatientRecord> in_split(Split split) const;
  bool operator==(const DatasetManifest&) const = default;
};

DatasetManifest parse_manifest(std::string_view text);
std::string write_manifest(const DatasetManifest& manifest);

// Reads a manifest file and rewrites relative recording paths against the
// manifest's own directory.
DatasetManifest load_manifest_file(const std::filesystem::path& path);

struct Waveform {
  std::vector<double> samples;
  int sample_rate_hz = kSampleRateHz;
  std::string patient_id;
  Location location = Location::Other;

  double duration_s() const {
    return static_cast<double>(samples.size()) / static_cast<double>(sample_rate_hz);
  }
};

// 16-bit mono PCM only. Samples are scaled by 1/32768.
Waveform load_recording(const std::filesystem::path& path);
Waveform parse_wav(std::string_view bytes);
std::string encode_wav(const Waveform& waveform);
void save_recording(const std::filesystem::path& path, const Waveform& waveform);

// Linear-interpolation resampler used for inputs that are not at kSampleRateHz.
Waveform resample_linear(const Waveform& waveform, int target_rate_hz);

struct SynthOptions {
  double noise_rms_fraction = 0.10;
  double murmur_gain = 1.0;
};

// Synthetic phonocardiogram: S1/S2 pulse train near 1 Hz, with a 100-400 Hz
// noise burst between S1 and S2 of every cycle when label is Present.
Waveform synth_recording(MurmurLabel label, double duration_s, std::uint64_t seed,
                         const SynthOptions& options = {});

struct SynthCorpusOptions {
  int patients = 200;
  std::uint64_t seed = 1;
  double present_fraction = 0.3;
  double unknown_fraction = 0.0;
  double min_duration_s = 8.0;
  double max_duration_s = 8.0;
  int min_locations = 2;
  int max_locations = 4;
  double train_fraction = 0.6;
  double validation_fraction = 0.2;
};

struct SynthCorpus {
  DatasetManifest manifest;             // paths are "<patient>_<loc>.wav"
  std::vector<Waveform> waveforms;      // same order as the recordings in manifest
};

SynthCorpus synth_corpus(const SynthCorpusOptions& options);

// Writes the corpus (manifest.tsv plus one WAV per recording) into dir.
void write_corpus(const SynthCorpus& corpus, const std::filesystem::path& dir);

// CirCor DigiScope layout: one "<id>.txt" header per patient listing its
// recordings and a "#Murmur:" line. Patients are split at random (seeded).
DatasetManifest circor_manifest(const std::filesystem::path& data_dir, std::uint64_t seed,
                                double train_fraction = 0.6, double validation_fraction = 0.3);

}  // namespace murmur
