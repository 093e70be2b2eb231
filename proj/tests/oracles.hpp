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

// Reference computations used by the tests. None of these call into the
// library's numerical code; they re-derive results from first principles.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

namespace oracle {

// ---------------------------------------------------------------------------
// MLP loss in long double over a flat parameter vector laid out layer by
// layer: weights row-major (out x in), then biases.

inline long double mlp_logit(const std::vector<std::size_t>& dims,
                             const std::vector<long double>& theta,
                             const std::vector<double>& x) {
  std::vector<long double> a(x.begin(), x.end());
  std::size_t off = 0;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    const std::size_t in = dims[l];
    const std::size_t out = dims[l + 1];
    std::vector<long double> z(out, 0.0L);
    for (std::size_t r = 0; r < out; ++r) {
      long double s = theta[off + in * out + r];
      for (std::size_t c = 0; c < in; ++c) s += theta[off + r * in + c] * a[c];
      z[r] = s;
    }
    off += in * out + out;
    if (l + 2 < dims.size()) {
      for (auto& v : z) v = v > 0.0L ? v : 0.0L;
    }
    a = std::move(z);
  }
  return a[0];
}

inline long double mean_bce(const std::vector<std::size_t>& dims,
                            const std::vector<long double>& theta,
                            const std::vector<std::vector<double>>& xs,
                            const std::vector<double>& ys) {
  long double total = 0.0L;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const long double z = mlp_logit(dims, theta, xs[i]);
    // log(1 + e^z) - y z, stable for either sign.
    const long double softplus = z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
    total += softplus - static_cast<long double>(ys[i]) * z;
  }
  return total / static_cast<long double>(xs.size());
}

// Central finite differences with step h on every coordinate.
inline std::vector<double> fd_gradient(const std::vector<std::size_t>& dims,
                                       const std::vector<double>& params,
                                       const std::vector<std::vector<double>>& xs,
                                       const std::vector<double>& ys, double h) {
  std::vector<long double> theta(params.begin(), params.end());
  std::vector<double> g(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    const long double saved = theta[i];
    theta[i] = saved + h;
    const long double up = mean_bce(dims, theta, xs, ys);
    theta[i] = saved - h;
    const long double down = mean_bce(dims, theta, xs, ys);
    theta[i] = saved;
    g[i] = static_cast<double>((up - down) / (2.0L * h));
  }
  return g;
}

// ---------------------------------------------------------------------------
// Order-alpha Renyi divergence D(N(0, s^2) || N(1, s^2)) by composite Simpson
// integration of p^alpha q^(1-alpha) in log space. The integrand peak is
// located numerically by golden-section search on the log integrand.

inline long double log_normal_pdf(long double x, long double mean, long double sd) {
  const long double z = (x - mean) / sd;
  return -0.5L * z * z - std::log(sd) - 0.5L * std::log(2.0L * 3.141592653589793238462643383279502884L);
}

inline double renyi_gaussian_integral(double sigma, double alpha) {
  const long double s = sigma;
  const long double a = alpha;
  auto log_f = [&](long double x) {
    return a * log_normal_pdf(x, 0.0L, s) + (1.0L - a) * log_normal_pdf(x, 1.0L, s);
  };
  // Golden-section search for the maximum over a wide bracket.
  long double lo = -10.0L * a - 10.0L;
  long double hi = 10.0L * a + 10.0L;
  const long double phi = (std::sqrt(5.0L) - 1.0L) / 2.0L;
  for (int it = 0; it < 400; ++it) {
    const long double m1 = hi - phi * (hi - lo);
    const long double m2 = lo + phi * (hi - lo);
    if (log_f(m1) < log_f(m2)) lo = m1; else hi = m2;
  }
  const long double peak = 0.5L * (lo + hi);
  const long double fmax = log_f(peak);
  // The integrand is Gaussian-shaped with scale s; 40 s covers it.
  const long double half = 40.0L * s;
  const int n = 40000;  // even
  const long double h = 2.0L * half / n;
  long double sum = 0.0L;
  for (int i = 0; i <= n; ++i) {
    const long double x = peak - half + h * i;
    const long double w = (i == 0 || i == n) ? 1.0L : (i % 2 == 1 ? 4.0L : 2.0L);
    sum += w * std::exp(log_f(x) - fmax);
  }
  const long double integral_scaled = sum * h / 3.0L;
  return static_cast<double>((fmax + std::log(integral_scaled)) / (a - 1.0L));
}

// ---------------------------------------------------------------------------
// AUC by enumerating every (positive, negative) pair.

inline double pairwise_auc(const std::vector<double>& pred, const std::vector<int>& label) {
  double wins = 0.0;
  double pairs = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (label[i] != 1) continue;
    for (std::size_t j = 0; j < pred.size(); ++j) {
      if (label[j] != 0) continue;
      pairs += 1.0;
      if (pred[i] > pred[j]) wins += 1.0;
      else if (pred[i] == pred[j]) wins += 0.5;
    }
  }
  return wins / pairs;
}

// ---------------------------------------------------------------------------
// Index of the nearest centroid, lowest index on ties.

inline std::size_t nearest_centroid(const std::vector<double>& p,
                                    const std::vector<std::vector<double>>& centroids) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < centroids.size(); ++c) {
    double d = 0.0;
    for (std::size_t j = 0; j < p.size(); ++j) d += (p[j] - centroids[c][j]) * (p[j] - centroids[c][j]);
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  return best;
}

// ---------------------------------------------------------------------------
// Full-batch gradient descent on logistic loss; returns weights with the
// bias in the last slot. Used as a train-to-convergence reference.

inline std::vector<double> train_logistic(const std::vector<std::vector<double>>& xs,
                                          const std::vector<int>& ys, int iterations = 400,
                                          double lr = 0.5) {
  const std::size_t d = xs.empty() ? 0 : xs[0].size();
  std::vector<double> w(d + 1, 0.0);
  std::vector<double> g(d + 1);
  const double n = static_cast<double>(xs.size());
  for (int it = 0; it < iterations; ++it) {
    std::fill(g.begin(), g.end(), 0.0);
    for (std::size_t i = 0; i < xs.size(); ++i) {
      double z = w[d];
      for (std::size_t j = 0; j < d; ++j) z += w[j] * xs[i][j];
      const double r = 1.0 / (1.0 + std::exp(-z)) - ys[i];
      for (std::size_t j = 0; j < d; ++j) g[j] += r * xs[i][j];
      g[d] += r;
    }
    for (std::size_t j = 0; j <= d; ++j) w[j] -= lr * g[j] / n;
  }
  return w;
}

inline double logistic_score(const std::vector<double>& w, const std::vector<double>& x) {
  double z = w.back();
  for (std::size_t j = 0; j < x.size(); ++j) z += w[j] * x[j];
  return z;
}

}  // namespace oracle
