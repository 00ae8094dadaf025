#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace murmur {

// Present (1) is the positive class. Zero denominators give 0.
struct BinaryMetrics {
  std::int64_t tp = 0, fp = 0, tn = 0, fn = 0;
  double accuracy = 0, precision = 0, recall = 0, f1 = 0;
};

BinaryMetrics binary_metrics(std::span<const int> predictions, std::span<const int> labels);
BinaryMetrics metrics_from_counts(std::int64_t tp, std::int64_t fp, std::int64_t tn, std::int64_t fn);

struct FoldAssignment {
  int k = 0;
  std::map<std::string, int> fold_of;

  std::vector<std::string> patients_in(int fold) const;
};

// Seeded shuffle of the sorted unique ids, then round-robin over k folds.
FoldAssignment patient_kfold(std::vector<std::string> patient_ids, int k, std::uint64_t seed);

struct MannWhitneyResult {
  double u = 0;        // U of sample a: pairs (x in a, y in b) with x > y, ties count 1/2
  double u_b = 0;      // n_a * n_b - u
  double p_two_sided = 1;
  bool exact = false;
};

// Exact permutation distribution when n_a * n_b <= 64, otherwise the normal
// approximation with tie-corrected variance and continuity correction.
MannWhitneyResult mann_whitney_u(std::span<const double> a, std::span<const double> b);
MannWhitneyResult mann_whitney_exact(std::span<const double> a, std::span<const double> b);
MannWhitneyResult mann_whitney_normal(std::span<const double> a, std::span<const double> b);

struct MeanStd {
  double mean = 0, std = 0;  // sample standard deviation (n - 1)
};
MeanStd mean_std(std::span<const double> values);

}  // namespace murmur
