// Copyright 2026 The fedens Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <vector>

#include "fedens/error.hpp"
#include "fedens/nn.hpp"

namespace fedens {

struct ScoredLabel {
  double prediction = 0.5;
  int label = 0;
};

// Mann-Whitney AUC: the fraction of (positive, negative) pairs ranked
// correctly, ties counting one half. Computed from midranks in O(n log n).
inline double compute_auc(std::span<const ScoredLabel> scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores[a].prediction < scores[b].prediction;
  });
  double positives = 0.0;
  double rank_sum = 0.0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]].prediction == scores[order[i]].prediction) ++j;
    // 1-based ranks i+1..j share the midrank.
    const double midrank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) {
      if (scores[order[k]].label == 1) {
        positives += 1.0;
        rank_sum += midrank;
      }
    }
    i = j;
  }
  const double negatives = static_cast<double>(scores.size()) - positives;
  if (positives == 0.0 || negatives == 0.0) {
    throw UndefinedMetricError("AUC needs both classes");
  }
  return (rank_sum - positives * (positives + 1.0) / 2.0) / (positives * negatives);
}

inline double compute_logloss(std::span<const ScoredLabel> scores) {
  if (scores.empty()) throw UndefinedMetricError("logloss of no predictions");
  double s = 0.0;
  for (const auto& sl : scores) s += bce_loss(sl.prediction, sl.label);
  return s / static_cast<double>(scores.size());
}

// Mean logloss over the entropy of the base positive rate; 1.0 means no
// better than predicting the base rate.
inline double compute_ne(std::span<const ScoredLabel> scores) {
  if (scores.empty()) throw UndefinedMetricError("NE of no predictions");
  double pos = 0.0;
  for (const auto& sl : scores) pos += sl.label;
  const double p = pos / static_cast<double>(scores.size());
  if (p <= 0.0 || p >= 1.0) throw UndefinedMetricError("NE needs a base rate in (0, 1)");
  const double entropy = -(p * std::log(p) + (1.0 - p) * std::log(1.0 - p));
  return compute_logloss(scores) / entropy;
}

inline double compute_accuracy(std::span<const ScoredLabel> scores) {
  if (scores.empty()) throw UndefinedMetricError("accuracy of no predictions");
  double hits = 0.0;
  for (const auto& sl : scores) hits += ((sl.prediction >= 0.5) == (sl.label == 1)) ? 1.0 : 0.0;
  return hits / static_cast<double>(scores.size());
}

struct Metrics {
  double auc = 0.0;
  double accuracy = 0.0;
  double logloss = 0.0;
  double ne = 0.0;
};

inline Metrics compute_metrics(std::span<const ScoredLabel> scores) {
  return {compute_auc(scores), compute_accuracy(scores), compute_logloss(scores),
          compute_ne(scores)};
}

}  // namespace fedens
