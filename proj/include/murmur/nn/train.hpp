#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "murmur/nn/network.hpp"
#include "murmur/nn/optim.hpp"

namespace murmur::nn {

// Flat storage of equally-sized single-channel feature maps with 0/1 labels
// (1 = murmur Present).
struct FeatureSet {
  int height = 0;
  int width = 0;
  std::vector<float> data;
  std::vector<int> labels;

  std::size_t size() const { return labels.size(); }
  bool empty() const { return labels.empty(); }
  std::size_t stride() const { return static_cast<std::size_t>(height) * width; }
  std::span<const float> sample(std::size_t i) const { return {data.data() + i * stride(), stride()}; }
  void push(std::span<const float> features, int label);
};

struct TrainConfig {
  double lr = 1e-3;
  int epochs = 20;
  int batch_size = 32;
  double weight_decay = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::uint64_t seed = 0;
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0;
  double val_f1 = 0;
  double val_accuracy = 0;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  int best_epoch = 0;  // 1-based
};

struct FitResult {
  Network network;  // snapshot of the best validation-F1 epoch, in Eval mode
  TrainHistory history;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

// Mini-batch AdamW on mean cross-entropy. After every epoch the segment-level
// F1 on val is measured; the earliest epoch with the highest F1 is returned.
FitResult fit(Network network, const FeatureSet& train, const FeatureSet& val, const TrainConfig& config,
              const EpochCallback& on_epoch = {});

// Eval-mode class probabilities, row-major [n x 2].
std::vector<float> predict_probs(const Network& network, const FeatureSet& features);

// argmax with ties resolved to Absent.
inline int predicted_class(float p_absent, float p_present) { return p_present > p_absent ? 1 : 0; }

}  // namespace murmur::nn
