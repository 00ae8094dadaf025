#pragma once

// End-to-end composition used by the CLI and the acceptance suite: recordings
// to quality-filtered spectrograms, training, segment/location/patient
// inference, cross-validation and report rendering.

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "murmur/aggregate.hpp"
#include "murmur/config.hpp"
#include "murmur/dataset.hpp"
#include "murmur/metrics.hpp"
#include "murmur/nn/train.hpp"
#include "murmur/quant.hpp"

namespace murmur {

struct LocationFeatures {
  Location location = Location::Other;
  int height = 0;
  int width = 0;
  std::size_t total_segments = 0;         // before the quality gate
  std::vector<std::vector<float>> maps;   // kept segments in time order
  std::vector<double> start_s;
};

struct PatientFeatures {
  std::string patient_id;
  MurmurLabel label = MurmurLabel::Unknown;
  Split split = Split::Train;
  std::vector<LocationFeatures> locations;  // recordings too short to segment are dropped
};

using WaveformLoader = std::function<Waveform(const RecordingRef&)>;
WaveformLoader file_loader();
// Serves the in-memory waveforms of a synthetic corpus by path.
WaveformLoader corpus_loader(const SynthCorpus& corpus);

// Segments (window, hop), STFT, quality gate, log-standardized maps.
LocationFeatures extract_location(const Waveform& waveform, const PipelineConfig& config, double hop_s);

// Present patients use hop / oversample_divisor when oversample is set.
std::vector<PatientFeatures> extract_patients(std::span<const PatientRecord> patients, const PipelineConfig& config,
                                              bool oversample, const WaveformLoader& loader);

// Segment-level set of the Known patients; label 1 = Present.
nn::FeatureSet to_feature_set(std::span<const PatientFeatures> patients);

struct TrainOutcome {
  nn::FitResult fit;
  ThresholdCalibration calibration;  // location vote threshold fitted on validation
  std::size_t train_segments = 0;
  std::size_t val_segments = 0;
};

TrainOutcome train_pipeline(std::span<const PatientFeatures> train, std::span<const PatientFeatures> val,
                            const PipelineConfig& config, const nn::EpochCallback& on_epoch = {});

struct LocationResult {
  Location location = Location::Other;
  std::vector<McdResult> segments;  // n_passes == 0 when Monte Carlo dropout is off
  std::vector<double> start_s;
  LocationDecision plain;           // all segments, vote_thr
  LocationDecision selective;       // confidence-gated with fallback
};

struct PatientResult {
  std::string patient_id;
  MurmurLabel truth = MurmurLabel::Unknown;
  std::vector<LocationResult> locations;
  PatientPrediction plain;
  PatientPrediction selective;
};

// Patients without any usable location are skipped. Deterministic for a given
// config regardless of thread count.
std::vector<PatientResult> infer(const nn::Network& network, std::span<const PatientFeatures> patients,
                                 const PipelineConfig& config);

// Patient-level metrics over Known patients.
BinaryMetrics patient_metrics(std::span<const PatientResult> results, bool selective);

std::string render_predictions(std::span<const PatientResult> results, const PipelineConfig& config);

struct UqSummary {
  std::vector<double> known_ratios;    // confident-segment ratio per recording
  std::vector<double> unknown_ratios;
  MannWhitneyResult test;
  bool test_valid = false;  // both groups nonempty
};

UqSummary summarize_uq(std::span<const PatientResult> results, const PipelineConfig& config);
std::string render_uq_report(std::span<const PatientResult> results, const PipelineConfig& config);

struct CvRow {
  int n_fft = 0;
  double psd_thr = 0;
  std::vector<BinaryMetrics> folds;  // segment-level, test fold
  MeanStd accuracy;
  MeanStd f1;
};

// For each (n_fft, psd_thr): k patient-level folds; fold f is the test set,
// fold f+1 the validation set, the rest train.
std::vector<CvRow> cross_validate(std::span<const PatientRecord> patients, const PipelineConfig& config,
                                  std::span<const int> n_ffts, std::span<const double> psd_thrs, int k,
                                  const WaveformLoader& loader);
std::string render_cv(std::span<const CvRow> rows, const PipelineConfig& config);

// Fraction of samples where the quantized network and the float network pick
// the same class.
double label_agreement(const nn::Network& network, const QNetwork& qnet, const nn::FeatureSet& features);

}  // namespace murmur
