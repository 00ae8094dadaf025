#include "murmur/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "murmur/error.hpp"
#include "murmur/random.hpp"

namespace murmur {

BinaryMetrics metrics_from_counts(std::int64_t tp, std::int64_t fp, std::int64_t tn, std::int64_t fn) {
  BinaryMetrics m{tp, fp, tn, fn};
  const auto total = tp + fp + tn + fn;
  m.accuracy = total ? static_cast<double>(tp + tn) / static_cast<double>(total) : 0.0;
  m.precision = tp + fp ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
  m.recall = tp + fn ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
  m.f1 = m.precision + m.recall > 0 ? 2 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
  return m;
}

BinaryMetrics binary_metrics(std::span<const int> predictions, std::span<const int> labels) {
  if (predictions.size() != labels.size())
    throw Error(ErrorCode::ShapeError, "predictions and labels differ in length");
  if (predictions.empty()) throw Error(ErrorCode::ShapeError, "metrics need at least one sample");
  std::int64_t tp = 0, fp = 0, tn = 0, fn = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const bool pred = predictions[i] != 0, truth = labels[i] != 0;
    if (pred && truth) ++tp;
    else if (pred) ++fp;
    else if (truth) ++fn;
    else ++tn;
  }
  return metrics_from_counts(tp, fp, tn, fn);
}

std::vector<std::string> FoldAssignment::patients_in(int fold) const {
  std::vector<std::string> out;
  for (const auto& [id, f] : fold_of)
    if (f == fold) out.push_back(id);
  return out;
}

FoldAssignment patient_kfold(std::vector<std::string> ids, int k, std::uint64_t seed) {
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  if (k < 2) throw Error(ErrorCode::ConfigError, "k must be at least 2");
  if (ids.size() < static_cast<std::size_t>(k))
    throw Error(ErrorCode::ConfigError, "fewer patients than folds");
  Rng rng(derive_seed(seed, 300));
  shuffle(ids.begin(), ids.end(), rng);
  FoldAssignment out;
  out.k = k;
  for (std::size_t i = 0; i < ids.size(); ++i) out.fold_of[ids[i]] = static_cast<int>(i % static_cast<std::size_t>(k));
  return out;
}

// --- Mann-Whitney U ----------------------------------------------------------

namespace {

struct Pooled {
  std::vector<double> ranks;  // midranks, a first then b
  double tie_term = 0;        // sum over tie groups of t^3 - t
};

Pooled midranks(std::span<const double> a, std::span<const double> b) {
  const std::size_t n = a.size() + b.size();
  std::vector<std::pair<double, std::size_t>> v;
  v.reserve(n);
  for (std::size_t i = 0; i < a.size(); ++i) v.emplace_back(a[i], i);
  for (std::size_t i = 0; i < b.size(); ++i) v.emplace_back(b[i], a.size() + i);
  std::sort(v.begin(), v.end());
  Pooled out;
  out.ranks.assign(n, 0.0);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && v[j].first == v[i].first) ++j;
    const double rank = 0.5 * static_cast<double>(i + 1 + j);  // mean of ranks i+1..j
    for (std::size_t q = i; q < j; ++q) out.ranks[v[q].second] = rank;
    const auto t = static_cast<double>(j - i);
    out.tie_term += t * t * t - t;
    i = j;
  }
  return out;
}

void check_inputs(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw Error(ErrorCode::ShapeError, "Mann-Whitney needs two nonempty samples");
}

MannWhitneyResult u_statistic(std::span<const double> a, std::span<const double> b, const Pooled& pooled) {
  double ra = 0;
  for (std::size_t i = 0; i < a.size(); ++i) ra += pooled.ranks[i];
  const auto na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  MannWhitneyResult r;
  r.u = ra - na * (na + 1) / 2;
  r.u_b = na * nb - r.u;
  return r;
}

}  // namespace

MannWhitneyResult mann_whitney_exact(std::span<const double> a, std::span<const double> b) {
  check_inputs(a, b);
  const auto pooled = midranks(a, b);
  auto r = u_statistic(a, b, pooled);
  r.exact = true;
  const std::size_t n = pooled.ranks.size(), na = a.size();
  const double mean = static_cast<double>(na) * static_cast<double>(b.size()) / 2;
  const double observed = std::abs(r.u - mean) - 1e-9;
  const double offset = static_cast<double>(na) * (static_cast<double>(na) + 1) / 2;

  // Enumerate all size-na subsets of the pooled ranks (lexicographic index sets).
  std::vector<std::size_t> idx(na);
  std::iota(idx.begin(), idx.end(), 0);
  double extreme = 0, total = 0;
  while (true) {
    double rank_sum = 0;
    for (auto i : idx) rank_sum += pooled.ranks[i];
    total += 1;
    if (std::abs(rank_sum - offset - mean) >= observed) extreme += 1;
    std::size_t pos = na;
    while (pos > 0 && idx[pos - 1] == n - na + pos - 1) --pos;
    if (pos == 0) break;
    ++idx[pos - 1];
    for (std::size_t q = pos; q < na; ++q) idx[q] = idx[q - 1] + 1;
  }
  r.p_two_sided = std::min(1.0, extreme / total);
  return r;
}

MannWhitneyResult mann_whitney_normal(std::span<const double> a, std::span<const double> b) {
  check_inputs(a, b);
  const auto pooled = midranks(a, b);
  auto r = u_statistic(a, b, pooled);
  const auto na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  const double n = na + nb;
  const double mean = na * nb / 2;
  const double var = na * nb / 12.0 * ((n + 1) - pooled.tie_term / (n * (n - 1)));
  if (var <= 0) {
    r.p_two_sided = 1.0;
    return r;
  }
  const double z = std::max(0.0, std::abs(r.u - mean) - 0.5) / std::sqrt(var);
  r.p_two_sided = std::min(1.0, std::erfc(z / std::sqrt(2.0)));
  return r;
}

MannWhitneyResult mann_whitney_u(std::span<const double> a, std::span<const double> b) {
  check_inputs(a, b);
  return a.size() * b.size() <= 64 ? mann_whitney_exact(a, b) : mann_whitney_normal(a, b);
}

MeanStd mean_std(std::span<const double> values) {
  MeanStd out;
  if (values.empty()) return out;
  out.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  if (values.size() > 1) {
    double s = 0;
    for (double v : values) s += (v - out.mean) * (v - out.mean);
    out.std = std::sqrt(s / static_cast<double>(values.size() - 1));
  }
  return out;
}

}  // namespace murmur
