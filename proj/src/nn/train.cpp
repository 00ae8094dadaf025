#include "murmur/nn/train.hpp"

#include <algorithm>
#include <numeric>

#include "murmur/error.hpp"
#include "murmur/metrics.hpp"
#include "murmur/parallel.hpp"
#include "murmur/random.hpp"

namespace murmur::nn {

void FeatureSet::push(std::span<const float> features, int label) {
  if (features.size() != stride()) throw Error(ErrorCode::ShapeError, "feature map size mismatch");
  if (label != 0 && label != 1) throw Error(ErrorCode::LabelError, "labels must be 0 or 1");
  data.insert(data.end(), features.begin(), features.end());
  labels.push_back(label);
}

std::vector<float> predict_probs(const Network& network, const FeatureSet& features) {
  constexpr std::size_t kChunk = 32;
  const std::size_t n = features.size();
  std::vector<float> out(2 * n);
  const std::size_t chunks = (n + kChunk - 1) / kChunk;
  parallel_for(chunks, [&](std::size_t c) {
    const std::size_t begin = c * kChunk, end = std::min(n, begin + kChunk);
    const auto count = static_cast<int>(end - begin);
    auto batch = make_batch(std::span<const float>(features.data.data() + begin * features.stride(),
                                                   static_cast<std::size_t>(count) * features.stride()),
                            count, features.height, features.width);
    const auto probs = network.predict(batch);
    std::copy(probs.data.begin(), probs.data.end(), out.begin() + static_cast<std::ptrdiff_t>(2 * begin));
  });
  return out;
}

namespace {

BinaryMetrics evaluate(const Network& network, const FeatureSet& features) {
  const auto probs = predict_probs(network, features);
  std::vector<int> preds(features.size());
  for (std::size_t i = 0; i < preds.size(); ++i) preds[i] = predicted_class(probs[2 * i], probs[2 * i + 1]);
  return binary_metrics(preds, features.labels);
}

}  // namespace

FitResult fit(Network network, const FeatureSet& train, const FeatureSet& val, const TrainConfig& config,
              const EpochCallback& on_epoch) {
  if (train.empty()) throw Error(ErrorCode::EmptyDataset, "training set is empty");
  if (val.empty()) throw Error(ErrorCode::EmptyDataset, "validation set is empty");
  if (config.epochs < 1 || config.lr <= 0 || config.batch_size < 1)
    throw Error(ErrorCode::ConfigError, "epochs, lr and batch_size must be positive");

  AdamW<float> optimizer({config.lr, config.beta1, config.beta2, config.eps, config.weight_decay});
  Rng order_rng(derive_seed(config.seed, 20));
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);

  FitResult result;
  double best_f1 = -1.0;
  std::vector<float> batch_data;
  std::vector<int> batch_labels;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    network.set_mode(Mode::Train);
    Rng dropout_rng(derive_seed(config.seed, 1000 + static_cast<std::uint64_t>(epoch)));
    shuffle(order.begin(), order.end(), order_rng);
    double loss_sum = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
      batch_data.clear();
      batch_labels.clear();
      for (std::size_t i = start; i < end; ++i) {
        const auto s = train.sample(order[i]);
        batch_data.insert(batch_data.end(), s.begin(), s.end());
        batch_labels.push_back(train.labels[order[i]]);
      }
      const auto count = static_cast<int>(end - start);
      network.forward(make_batch(batch_data, count, train.height, train.width), &dropout_rng);
      network.zero_grad();
      loss_sum += static_cast<double>(network.backward(batch_labels)) * count;
      optimizer.step(network.params());
    }
    network.set_mode(Mode::Eval);
    const auto m = evaluate(network, val);
    EpochRecord rec{epoch, loss_sum / static_cast<double>(train.size()), m.f1, m.accuracy};
    result.history.epochs.push_back(rec);
    if (on_epoch) on_epoch(rec);
    if (m.f1 > best_f1) {
      best_f1 = m.f1;
      result.history.best_epoch = epoch;
      network.clear_cache();
      result.network = network;
    }
  }
  result.network.set_mode(Mode::Eval);
  return result;
}

}  // namespace murmur::nn
