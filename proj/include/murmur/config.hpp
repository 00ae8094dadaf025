#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "murmur/aggregate.hpp"
#include "murmur/nn/network.hpp"
#include "murmur/uq.hpp"

namespace murmur {

struct PipelineConfig {
  int n_fft = 128;
  double psd_thr = 0.45;
  int min_keep = 5;
  double window_s = 2.0;
  double hop_s = 1.0;
  int oversample_divisor = 4;
  double vote_thr = kVoteThreshold;
  double fallback_thr = kFallbackThreshold;
  double cs_threshold = 0.8;
  double confident_ratio = 0.6;
  int mcd_passes = kDefaultMcdPasses;
  double alpha = 0.5;
  std::uint64_t seed = 0;
  nn::Variant variant = nn::Variant::Light;
  bool selective = true;
  EntropyMode entropy_mode = EntropyMode::EntropyOfMean;
  VoteRule vote_rule = VoteRule::Share;
  // training
  int epochs = 20;
  int batch_size = 32;
  double lr = 1e-3;
  double weight_decay = 0.01;

  ConfidencePolicy policy() const { return {cs_threshold, alpha, confident_ratio}; }
  bool operator==(const PipelineConfig&) const = default;
};

// Throws ConfigError for out-of-range values.
void validate(const PipelineConfig& config);

std::string to_json(const PipelineConfig& config);
// Missing keys keep their defaults; unknown keys and bad values are ConfigError.
PipelineConfig config_from_json(const std::string& text);
PipelineConfig load_config(const std::filesystem::path& path);

// "# config {...}" line that starts every report.
std::string config_header(const PipelineConfig& config);

}  // namespace murmur
