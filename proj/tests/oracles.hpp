#pragma once

// Independent brute-force references for the ranking metrics. These stay
// deliberately naive (O(n^2), explicit threshold sweeps) so they share no
// code path with the production implementations they check.

#include <algorithm>
#include <span>
#include <utility>
#include <vector>

namespace oracles {

// AP as the explicit step-wise sum over distinct score thresholds:
// AP = sum_k (R_k - R_{k-1}) * P_k, recounting TP/FP from scratch per
// threshold.
inline double average_precision_bruteforce(
    std::span<const std::pair<double, bool>> scored) {
  std::vector<double> thresholds;
  long total_pos = 0;
  for (const auto& [score, is_pos] : scored) {
    thresholds.push_back(score);
    total_pos += is_pos ? 1 : 0;
  }
  std::sort(thresholds.begin(), thresholds.end(), std::greater<>());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()),
                   thresholds.end());

  double ap = 0.0;
  double prev_recall = 0.0;
  for (double threshold : thresholds) {
    long tp = 0, fp = 0;
    for (const auto& [score, is_pos] : scored) {
      if (score >= threshold) (is_pos ? tp : fp) += 1;
    }
    const double recall = static_cast<double>(tp) / total_pos;
    const double precision = static_cast<double>(tp) / (tp + fp);
    ap += (recall - prev_recall) * precision;
    prev_recall = recall;
  }
  return ap;
}

// AUC by enumerating all (positive, negative) pairs.
inline double roc_auc_bruteforce(
    std::span<const std::pair<double, bool>> scored) {
  double wins = 0.0;
  long pairs = 0;
  for (const auto& [sp, lp] : scored) {
    if (!lp) continue;
    for (const auto& [sn, ln] : scored) {
      if (ln) continue;
      ++pairs;
      if (sp > sn) {
        wins += 1.0;
      } else if (sp == sn) {
        wins += 0.5;
      }
    }
  }
  return wins / static_cast<double>(pairs);
}

}  // namespace oracles
