#pragma once

// Independent reference implementations used by unit and acceptance tests.

#include <cmath>
#include <cstdint>
#include <map>
#include <vector>

namespace oracle {

// Vote with integer arithmetic: present/n > num/den.
inline bool vote_present(int present, int n, int num, int den) { return present * den > num * n; }

// Location rule with confidence gating and fallback. Thresholds 0.40 / 0.20 and
// the 0.6 confident share are written as integer ratios.
struct Selective {
  bool present;
  bool fallback;
};

inline Selective selective_vote(const std::vector<int>& labels, const std::vector<int>& confident) {
  const int n = static_cast<int>(labels.size());
  int kept = 0, kept_present = 0, all_present = 0;
  for (int i = 0; i < n; ++i) {
    all_present += labels[i];
    if (confident[i]) {
      ++kept;
      kept_present += labels[i];
    }
  }
  if (kept * 10 >= 6 * n && kept > 0) return {vote_present(kept_present, kept, 2, 5), false};
  return {vote_present(all_present, n, 1, 5), true};
}

// Mann-Whitney U of a against b by pair counting, ties 1/2.
inline double u_pairs(const std::vector<double>& a, const std::vector<double>& b) {
  double u = 0;
  for (double x : a)
    for (double y : b) u += x > y ? 1.0 : (x == y ? 0.5 : 0.0);
  return u;
}

// Null distribution of U for tie-free samples: count(u; m, n) via the classic
// recursion count(u; m, n) = count(u - n; m - 1, n) + count(u; m, n - 1).
inline double u_count(int u, int m, int n, std::map<std::tuple<int, int, int>, double>& memo) {
  if (u < 0) return 0;
  if (m == 0 || n == 0) return u == 0 ? 1 : 0;
  const auto key = std::make_tuple(u, m, n);
  if (auto it = memo.find(key); it != memo.end()) return it->second;
  const double v = u_count(u - n, m - 1, n, memo) + u_count(u, m, n - 1, memo);
  memo[key] = v;
  return v;
}

// Two-sided exact p: mass at least as far from the mean as the observed U.
inline double exact_p(double u, int m, int n) {
  std::map<std::tuple<int, int, int>, double> memo;
  const double mean = m * n / 2.0;
  double total = 0, extreme = 0;
  for (int k = 0; k <= m * n; ++k) {
    const double c = u_count(k, m, n, memo);
    total += c;
    if (std::fabs(k - mean) >= std::fabs(u - mean) - 1e-9) extreme += c;
  }
  return extreme / total;
}

}  // namespace oracle
