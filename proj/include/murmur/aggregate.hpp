#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "murmur/dataset.hpp"
#include "murmur/uq.hpp"

namespace murmur {

inline constexpr double kVoteThreshold = 0.40;
inline constexpr double kFallbackThreshold = 0.20;

// How "Present over Absent exceeds thr" is evaluated.
enum class VoteRule {
  Share,     // n_present / n_segments > thr (default)
  Quotient,  // n_present / n_absent > thr
};

struct LocationDecision {
  Location location = Location::Other;
  int n_segments = 0;
  int n_present = 0;
  double present_fraction = 0;
  double threshold_used = kVoteThreshold;
  MurmurLabel label = MurmurLabel::Absent;
  double confident_ratio = 1.0;
};

struct PatientPrediction {
  std::string patient_id;
  std::vector<LocationDecision> locations;
  MurmurLabel label = MurmurLabel::Absent;
};

// Strict majority-style vote over 0/1 segment labels. EmptyLocation on empty input.
LocationDecision vote_location(std::span<const int> segment_labels, double thr = kVoteThreshold,
                               VoteRule rule = VoteRule::Share);

// Votes over the confident segments with thr_hi when enough of them are
// confident, otherwise over all segments with thr_lo.
LocationDecision vote_location_selective(std::span<const McdResult> results, const ConfidencePolicy& policy,
                                         double thr_hi = kVoteThreshold, double thr_lo = kFallbackThreshold,
                                         VoteRule rule = VoteRule::Share);

// Present iff any location is Present. EmptyPatient on empty input.
PatientPrediction predict_patient(std::vector<LocationDecision> decisions, std::string patient_id = {});

struct ThresholdCalibration {
  double threshold = kVoteThreshold;
  double f1 = 0;
  bool warning = false;  // no positive locations; default returned
};

// Grid search for the location vote threshold maximizing location-level F1;
// ties go to the smallest threshold.
ThresholdCalibration calibrate_threshold(std::span<const double> present_fractions, std::span<const int> truth,
                                         std::span<const double> grid);
std::vector<double> default_threshold_grid();  // 0.05, 0.10, ..., 0.95

}  // namespace murmur
