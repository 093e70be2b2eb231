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

// Renyi-DP accounting for federated ensembles.
//
// Every mechanism is summarized by its RDP curve: epsilon(alpha) over a fixed
// grid of orders. Mechanisms that see the same users compose by pointwise sum;
// mechanisms over disjoint user sets compose by pointwise max. The final
// curve converts to (epsilon, delta)-DP by minimizing over the grid.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "fedens/error.hpp"

namespace fedens {

inline const std::vector<double>& default_rdp_orders() {
  static const std::vector<double> orders{1.25, 1.5, 1.75, 2.0, 2.5, 3.0,  4.0,  5.0,
                                          6.0,  8.0, 16.0, 32.0, 64.0, 128.0, 256.0};
  return orders;
}

struct RdpCurve {
  std::vector<double> orders;
  std::vector<double> epsilons;

  bool empty() const { return orders.empty(); }

  double at(double order) const {
    for (std::size_t i = 0; i < orders.size(); ++i) {
      if (orders[i] == order) return epsilons[i];
    }
    throw InvalidArgumentError("order " + std::to_string(order) + " is not on the curve");
  }

  bool operator==(const RdpCurve&) const = default;
};

// Builds a curve, dropping orders whose epsilon is infinite.
inline RdpCurve make_curve(std::span<const double> orders, std::span<const double> epsilons) {
  if (orders.size() != epsilons.size()) throw InvalidArgumentError("orders/epsilons length mismatch");
  RdpCurve c;
  for (std::size_t i = 0; i < orders.size(); ++i) {
    if (!(orders[i] > 1.0)) throw InvalidArgumentError("RDP orders must exceed 1");
    if (std::isnan(epsilons[i]) || epsilons[i] < 0.0) {
      throw InvalidArgumentError("RDP epsilons must be nonnegative");
    }
    if (std::isinf(epsilons[i])) continue;
    c.orders.push_back(orders[i]);
    c.epsilons.push_back(epsilons[i]);
  }
  return c;
}

inline RdpCurve zero_curve(std::span<const double> orders = default_rdp_orders()) {
  std::vector<double> zeros(orders.size(), 0.0);
  return make_curve(orders, zeros);
}

// Order-alpha Renyi divergence between N(0, s^2) and N(1, s^2): alpha / (2 s^2).
// A nonpositive noise multiplier gives an unbounded mechanism (+inf).
inline double gaussian_rdp(double noise_multiplier, double order) {
  if (!(order > 1.0)) throw InvalidArgumentError("RDP order must exceed 1");
  if (!(noise_multiplier > 0.0)) return std::numeric_limits<double>::infinity();
  return order / (2.0 * noise_multiplier * noise_multiplier);
}

inline RdpCurve gaussian_curve(double noise_multiplier,
                               std::span<const double> orders = default_rdp_orders()) {
  std::vector<double> eps;
  eps.reserve(orders.size());
  for (double a : orders) eps.push_back(gaussian_rdp(noise_multiplier, a));
  return make_curve(orders, eps);
}

namespace detail {

template <typename Combine>
RdpCurve combine_curves(std::span<const RdpCurve> curves, Combine combine) {
  if (curves.empty()) throw InvalidArgumentError("composition of no curves");
  RdpCurve out = curves.front();
  for (std::size_t i = 1; i < curves.size(); ++i) {
    if (curves[i].orders != out.orders) {
      throw InvalidArgumentError("composed curves use different order grids");
    }
    for (std::size_t j = 0; j < out.epsilons.size(); ++j) {
      out.epsilons[j] = combine(out.epsilons[j], curves[i].epsilons[j]);
    }
  }
  return out;
}

}  // namespace detail

// Same users feed every mechanism: epsilons add.
inline RdpCurve compose_sequential(std::span<const RdpCurve> curves) {
  return detail::combine_curves(curves, [](double a, double b) { return a + b; });
}

// Disjoint users feed each mechanism: the worst one dominates.
inline RdpCurve compose_parallel(std::span<const RdpCurve> curves) {
  return detail::combine_curves(curves, [](double a, double b) { return std::max(a, b); });
}

struct DpBudgetReport {
  double epsilon = 0.0;
  double delta = 0.0;
  double optimal_order = 0.0;
};

// epsilon = min over orders of eps(alpha) + ln(1/delta) / (alpha - 1).
inline DpBudgetReport rdp_to_dp(const RdpCurve& curve, double delta) {
  if (!(delta > 0.0 && delta < 1.0)) throw InvalidArgumentError("delta must lie in (0, 1)");
  if (curve.empty()) throw InvalidArgumentError("cannot convert an empty RDP curve");
  DpBudgetReport best{std::numeric_limits<double>::infinity(), delta, 0.0};
  const double log_inv_delta = std::log(1.0 / delta);
  for (std::size_t i = 0; i < curve.orders.size(); ++i) {
    const double eps = curve.epsilons[i] + log_inv_delta / (curve.orders[i] - 1.0);
    if (eps < best.epsilon) {
      best.epsilon = eps;
      best.optimal_order = curve.orders[i];
    }
  }
  return best;
}

enum class AggRegime { kOptin, kSameUsers, kDisjointUsers };

inline std::string to_string(AggRegime r) {
  switch (r) {
    case AggRegime::kOptin: return "optin";
    case AggRegime::kSameUsers: return "same_users";
    case AggRegime::kDisjointUsers: return "disjoint_users";
  }
  return "?";
}

inline AggRegime parse_regime(const std::string& s) {
  if (s == "optin") return AggRegime::kOptin;
  if (s == "same_users") return AggRegime::kSameUsers;
  if (s == "disjoint_users") return AggRegime::kDisjointUsers;
  throw InvalidConfigError("unknown aggregation regime '" + s + "'");
}

struct PrivacyLedger {
  std::map<std::size_t, RdpCurve> leaf_costs;  // cluster id -> cost
  RdpCurve agg_cost = zero_curve();
  AggRegime agg_regime = AggRegime::kOptin;
};

// Leaves train on disjoint clusters, so e_leafs is their parallel
// composition. The aggregation layer then adds nothing (opt-in data), adds
// sequentially (same users), or composes in parallel (disjoint users).
inline RdpCurve total_cost(const PrivacyLedger& ledger) {
  if (ledger.leaf_costs.empty()) throw InvalidLedgerError("ledger has no leaf costs");
  std::vector<RdpCurve> leaves;
  for (const auto& [_, c] : ledger.leaf_costs) leaves.push_back(c);
  const RdpCurve e_leafs = compose_parallel(leaves);
  switch (ledger.agg_regime) {
    case AggRegime::kOptin:
      for (double e : ledger.agg_cost.epsilons) {
        if (e != 0.0) throw InvalidLedgerError("opt-in aggregation must have zero cost");
      }
      return e_leafs;
    case AggRegime::kSameUsers: {
      const RdpCurve parts[] = {e_leafs, ledger.agg_cost};
      return compose_sequential(parts);
    }
    case AggRegime::kDisjointUsers: {
      const RdpCurve parts[] = {e_leafs, ledger.agg_cost};
      return compose_parallel(parts);
    }
  }
  throw InvalidLedgerError("unknown regime");
}

inline void write_curve_csv(std::ostream& out, const RdpCurve& curve) {
  out << "alpha,epsilon\n";
  char buf[96];
  for (std::size_t i = 0; i < curve.orders.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%g,%.10g\n", curve.orders[i], curve.epsilons[i]);
    out << buf;
  }
}

}  // namespace fedens
