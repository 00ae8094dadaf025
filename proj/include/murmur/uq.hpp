#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "murmur/nn/network.hpp"

namespace murmur {

inline constexpr int kDefaultMcdPasses = 10;

// How the predictive entropy aggregates the Monte Carlo passes.
enum class EntropyMode {
  EntropyOfMean,    // entropy of the mean softmax (default)
  MeanOfEntropies,  // mean of per-pass entropies
};

struct ConfidencePolicy {
  double cs_threshold = 0.8;
  double alpha = 0.5;
  double confident_ratio_threshold = 0.6;
};

struct McdResult {
  std::array<double, 2> deterministic_probs{0.5, 0.5};  // {p_absent, p_present}
  std::vector<std::array<double, 2>> pass_probs;
  std::vector<int> pass_preds;
  double entropy = 0;     // normalized to [0, 1]
  double coherence = 0;
  double confidence = 0;
  int n_passes = 0;

  // Segment label used for voting: argmax of the deterministic pass.
  int label() const { return deterministic_probs[1] > deterministic_probs[0] ? 1 : 0; }
};

// Shannon entropy (natural log) divided by ln 2, so a binary distribution maps
// to [0, 1]. 0 log 0 = 0.
double entropy(std::array<double, 2> probs);
double pass_entropy(std::span<const std::array<double, 2>> pass_probs, EntropyMode mode = EntropyMode::EntropyOfMean);

// 1 - 4 * population variance of the 0/1 pass predictions. DomainError on
// non-binary entries or fewer than two passes.
double coherence(std::span<const int> pass_preds);

double confidence_score(double entropy, double coherence, double alpha = 0.5);

// One deterministic (dropout off) pass plus n passes with dropout on. The
// stochastic passes depend only on seed; deterministic_probs never does.
McdResult mcd_predict(const nn::Network& network, std::span<const float> features, int height, int width,
                      int n = kDefaultMcdPasses, std::uint64_t seed = 0, double alpha = 0.5,
                      EntropyMode mode = EntropyMode::EntropyOfMean);

struct Selection {
  std::vector<std::size_t> kept;  // indices with confidence >= cs_threshold
  double confident_ratio = 0;
};

Selection select_confident(std::span<const McdResult> results, const ConfidencePolicy& policy);

// Correct/misclassified confidence analysis for choosing cs_threshold.
struct ThresholdRow {
  double threshold = 0;
  std::size_t kept = 0;
  double kept_fraction = 0;
  double kept_accuracy = 0;
  std::size_t correct_kept = 0;
  std::size_t wrong_kept = 0;
};

std::vector<ThresholdRow> threshold_sweep(std::span<const double> confidences, std::span<const int> correct,
                                          std::span<const double> thresholds);

// Counts per equal-width bin over [0, 1]; the value 1.0 lands in the last bin.
std::vector<std::size_t> histogram01(std::span<const double> values, int bins);

}  // namespace murmur
