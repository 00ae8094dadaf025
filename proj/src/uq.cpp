#include "murmur/uq.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "murmur/error.hpp"
#include "murmur/random.hpp"

namespace murmur {

double entropy(std::array<double, 2> probs) {
  double e = 0;
  for (double p : probs)
    if (p > 0) e -= p * std::log(p);
  return std::clamp(e / std::numbers::ln2, 0.0, 1.0);
}

double pass_entropy(std::span<const std::array<double, 2>> pass_probs, EntropyMode mode) {
  if (pass_probs.empty()) throw Error(ErrorCode::DomainError, "entropy needs at least one pass");
  const auto n = static_cast<double>(pass_probs.size());
  if (mode == EntropyMode::MeanOfEntropies) {
    double s = 0;
    for (const auto& p : pass_probs) s += entropy(p);
    return s / n;
  }
  std::array<double, 2> mean{0, 0};
  for (const auto& p : pass_probs) {
    mean[0] += p[0] / n;
    mean[1] += p[1] / n;
  }
  return entropy(mean);
}

double coherence(std::span<const int> pass_preds) {
  if (pass_preds.size() < 2) throw Error(ErrorCode::DomainError, "coherence needs at least two passes");
  double ones = 0;
  for (int p : pass_preds) {
    if (p != 0 && p != 1) throw Error(ErrorCode::DomainError, "pass predictions must be 0 or 1");
    ones += p;
  }
  const double mean = ones / static_cast<double>(pass_preds.size());
  const double var = mean * (1.0 - mean);  // population variance of a 0/1 sequence
  return std::clamp(1.0 - 4.0 * var, 0.0, 1.0);
}

double confidence_score(double e, double c, double alpha) { return alpha * (1.0 - e) + (1.0 - alpha) * c; }

McdResult mcd_predict(const nn::Network& network, std::span<const float> features, int height, int width, int n,
                      std::uint64_t seed, double alpha, EntropyMode mode) {
  if (n < 2) throw Error(ErrorCode::ConfigError, "Monte Carlo dropout needs at least two passes");
  const auto per = static_cast<std::size_t>(height) * width;
  if (features.size() != per) throw Error(ErrorCode::ShapeError, "feature map size mismatch");

  McdResult r;
  r.n_passes = n;
  const auto det = network.predict(nn::make_batch(features, 1, height, width));
  r.deterministic_probs = {det.data[0], det.data[1]};

  // All passes run as one batch of n copies; each copy draws its own masks.
  nn::Tensor<float> batch(n, 1, height, width);
  for (int i = 0; i < n; ++i) std::copy(features.begin(), features.end(), batch.sample(i));
  Rng rng(derive_seed(seed, 40));
  const auto probs = network.predict(batch, &rng);
  r.pass_probs.resize(static_cast<std::size_t>(n));
  r.pass_preds.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    r.pass_probs[i] = {probs.data[2 * i], probs.data[2 * i + 1]};
    r.pass_preds[i] = probs.data[2 * i + 1] > probs.data[2 * i] ? 1 : 0;
  }
  r.entropy = pass_entropy(r.pass_probs, mode);
  r.coherence = coherence(r.pass_preds);
  r.confidence = confidence_score(r.entropy, r.coherence, alpha);
  return r;
}

Selection select_confident(std::span<const McdResult> results, const ConfidencePolicy& policy) {
  if (results.empty()) throw Error(ErrorCode::EmptyLocation, "no segments to select from");
  Selection s;
  for (std::size_t i = 0; i < results.size(); ++i)
    if (results[i].confidence >= policy.cs_threshold) s.kept.push_back(i);
  s.confident_ratio = static_cast<double>(s.kept.size()) / static_cast<double>(results.size());
  return s;
}

std::vector<ThresholdRow> threshold_sweep(std::span<const double> confidences, std::span<const int> correct,
                                          std::span<const double> thresholds) {
  if (confidences.size() != correct.size()) throw Error(ErrorCode::ShapeError, "length mismatch");
  std::vector<ThresholdRow> rows;
  for (double t : thresholds) {
    ThresholdRow row;
    row.threshold = t;
    for (std::size_t i = 0; i < confidences.size(); ++i) {
      if (confidences[i] < t) continue;
      ++row.kept;
      (correct[i] ? row.correct_kept : row.wrong_kept)++;
    }
    row.kept_fraction = confidences.empty() ? 0 : static_cast<double>(row.kept) / static_cast<double>(confidences.size());
    row.kept_accuracy = row.kept ? static_cast<double>(row.correct_kept) / static_cast<double>(row.kept) : 0;
    rows.push_back(row);
  }
  return rows;
}

std::vector<std::size_t> histogram01(std::span<const double> values, int bins) {
  if (bins < 1) throw Error(ErrorCode::ConfigError, "bins must be positive");
  std::vector<std::size_t> h(static_cast<std::size_t>(bins), 0);
  for (double v : values) {
    auto b = static_cast<int>(std::floor(std::clamp(v, 0.0, 1.0) * bins));
    h[static_cast<std::size_t>(std::min(b, bins - 1))]++;
  }
  return h;
}

}  // namespace murmur
