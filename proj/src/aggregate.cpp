#include "murmur/aggregate.hpp"

#include <cmath>
#include <limits>

#include "murmur/error.hpp"
#include "murmur/metrics.hpp"

namespace murmur {

namespace {

bool exceeds(int n_present, int n_segments, double thr, VoteRule rule) {
  if (rule == VoteRule::Quotient) {
    const int n_absent = n_segments - n_present;
    if (n_absent == 0) return n_present > 0;
    return static_cast<double>(n_present) / n_absent > thr;
  }
  return static_cast<double>(n_present) / n_segments > thr;
}

LocationDecision decide(int n_present, int n_segments, double thr, VoteRule rule) {
  LocationDecision d;
  d.n_segments = n_segments;
  d.n_present = n_present;
  d.present_fraction = static_cast<double>(n_present) / n_segments;
  d.threshold_used = thr;
  d.label = exceeds(n_present, n_segments, thr, rule) ? MurmurLabel::Present : MurmurLabel::Absent;
  return d;
}

}  // namespace

LocationDecision vote_location(std::span<const int> segment_labels, double thr, VoteRule rule) {
  if (segment_labels.empty()) throw Error(ErrorCode::EmptyLocation, "no segments to vote on");
  int present = 0;
  for (int l : segment_labels) present += l != 0;
  return decide(present, static_cast<int>(segment_labels.size()), thr, rule);
}

LocationDecision vote_location_selective(std::span<const McdResult> results, const ConfidencePolicy& policy,
                                         double thr_hi, double thr_lo, VoteRule rule) {
  const auto sel = select_confident(results, policy);
  LocationDecision d;
  if (sel.confident_ratio >= policy.confident_ratio_threshold && !sel.kept.empty()) {
    int present = 0;
    for (auto i : sel.kept) present += results[i].label();
    d = decide(present, static_cast<int>(sel.kept.size()), thr_hi, rule);
  } else {
    int present = 0;
    for (const auto& r : results) present += r.label();
    d = decide(present, static_cast<int>(results.size()), thr_lo, rule);
  }
  d.confident_ratio = sel.confident_ratio;
  return d;
}

PatientPrediction predict_patient(std::vector<LocationDecision> decisions, std::string patient_id) {
  if (decisions.empty()) throw Error(ErrorCode::EmptyPatient, "patient has no location decisions");
  PatientPrediction p;
  p.patient_id = std::move(patient_id);
  for (const auto& d : decisions)
    if (d.label == MurmurLabel::Present) p.label = MurmurLabel::Present;
  p.locations = std::move(decisions);
  return p;
}

std::vector<double> default_threshold_grid() {
  std::vector<double> g;
  for (int i = 1; i < 20; ++i) g.push_back(i * 0.05);
  return g;
}

ThresholdCalibration calibrate_threshold(std::span<const double> present_fractions, std::span<const int> truth,
                                         std::span<const double> grid) {
  if (present_fractions.size() != truth.size()) throw Error(ErrorCode::ShapeError, "length mismatch");
  if (grid.empty()) throw Error(ErrorCode::ConfigError, "empty threshold grid");
  ThresholdCalibration best;
  bool any_positive = false;
  for (int t : truth) any_positive |= t != 0;
  if (!any_positive) {
    best.warning = true;
    return best;
  }
  best.f1 = -1;
  std::vector<int> preds(truth.size());
  for (double thr : grid) {
    for (std::size_t i = 0; i < truth.size(); ++i) preds[i] = present_fractions[i] > thr ? 1 : 0;
    const double f1 = binary_metrics(preds, truth).f1;
    if (f1 > best.f1 || (f1 == best.f1 && thr < best.threshold)) {
      best.f1 = f1;
      best.threshold = thr;
    }
  }
  return best;
}

}  // namespace murmur
