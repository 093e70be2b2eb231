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

// Partitioning a client population into disjoint clusters.

#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "fedens/data.hpp"
#include "fedens/error.hpp"
#include "fedens/seed.hpp"

namespace fedens {

struct ClusterAssignment {
  std::size_t num_clusters = 0;
  std::map<std::string, std::size_t> mapping;  // user_id -> cluster id

  std::size_t cluster_of(const std::string& user_id) const {
    auto it = mapping.find(user_id);
    if (it == mapping.end()) throw InvalidArgumentError("user " + user_id + " is not assigned");
    return it->second;
  }

  std::vector<std::size_t> sizes() const {
    std::vector<std::size_t> out(num_clusters, 0);
    for (const auto& [_, c] : mapping) ++out[c];
    return out;
  }

  std::vector<std::size_t> empty_clusters() const {
    std::vector<std::size_t> out;
    const auto sz = sizes();
    for (std::size_t c = 0; c < sz.size(); ++c) {
      if (sz[c] == 0) out.push_back(c);
    }
    return out;
  }

  // Users of each cluster, in population order.
  std::vector<Population> partition(const Population& population) const {
    std::vector<Population> out(num_clusters);
    for (const auto& u : population) out[cluster_of(u.user_id)].push_back(u);
    return out;
  }

  bool operator==(const ClusterAssignment&) const = default;
};

inline void write_assignment_csv(const std::filesystem::path& path,
                                 const ClusterAssignment& assignment) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << "user_id,cluster_id\n";
  for (const auto& [uid, c] : assignment.mapping) out << uid << ',' << c << '\n';
}

// Numeric values fall into len(bin_edges) + 1 buckets (value < edges[0] is
// bucket 0). If any user carries a categorical value, the feature is treated
// as categorical: one cluster per distinct category, in sorted order.
inline ClusterAssignment cluster_by_feature(const Population& population,
                                            const std::string& feature_name,
                                            const std::vector<double>& bin_edges) {
  for (std::size_t i = 1; i < bin_edges.size(); ++i) {
    if (!(bin_edges[i] > bin_edges[i - 1])) {
      throw InvalidConfigError("bin edges must be strictly increasing");
    }
  }
  std::vector<std::string> missing;
  bool categorical = false;
  std::set<std::string> categories;
  for (const auto& u : population) {
    auto it = u.static_features.find(feature_name);
    if (it == u.static_features.end()) {
      missing.push_back(u.user_id);
      continue;
    }
    if (const auto* s = std::get_if<std::string>(&it->second)) {
      categorical = true;
      categories.insert(*s);
    }
  }
  if (!missing.empty()) {
    std::string msg = "feature '" + feature_name + "' missing for " +
                      std::to_string(missing.size()) + " user(s):";
    for (std::size_t i = 0; i < std::min<std::size_t>(missing.size(), 10); ++i) {
      msg += " " + missing[i];
    }
    if (missing.size() > 10) msg += " ...";
    throw IncompleteFeatureError(msg);
  }

  ClusterAssignment out;
  if (categorical) {
    // Numeric values are rendered so mixed columns still partition cleanly.
    auto key = [](const AttributeValue& v) {
      if (const auto* s = std::get_if<std::string>(&v)) return *s;
      return std::to_string(std::get<double>(v));
    };
    for (const auto& u : population) categories.insert(key(u.static_features.at(feature_name)));
    std::map<std::string, std::size_t> index;
    for (const auto& c : categories) index.emplace(c, index.size());
    out.num_clusters = std::max<std::size_t>(index.size(), 1);
    for (const auto& u : population) {
      out.mapping[u.user_id] = index.at(key(u.static_features.at(feature_name)));
    }
    return out;
  }
  out.num_clusters = bin_edges.size() + 1;
  for (const auto& u : population) {
    const double v = std::get<double>(u.static_features.at(feature_name));
    out.mapping[u.user_id] = static_cast<std::size_t>(
        std::upper_bound(bin_edges.begin(), bin_edges.end(), v) - bin_edges.begin());
  }
  return out;
}

using AttributeExtractor = std::function<std::vector<double>(const ClientDataset&)>;

// Numeric static features whose names start with `prefix`, in name order.
inline AttributeExtractor static_prefix_extractor(std::string prefix) {
  return [prefix = std::move(prefix)](const ClientDataset& u) {
    std::vector<double> out;
    for (auto it = u.static_features.lower_bound(prefix); it != u.static_features.end(); ++it) {
      if (it->first.compare(0, prefix.size(), prefix) != 0) break;
      const auto* v = std::get_if<double>(&it->second);
      if (v == nullptr) throw InvalidConfigError("attribute " + it->first + " is not numeric");
      out.push_back(*v);
    }
    if (out.empty()) throw IncompleteFeatureError("user " + u.user_id + " has no '" + prefix + "*' attributes");
    return out;
  };
}

// Per-user mean of the dense features.
inline AttributeExtractor mean_dense_extractor() {
  return [](const ClientDataset& u) {
    std::vector<double> out;
    for (const auto& e : u.examples) {
      if (out.empty()) out.assign(e.dense.size(), 0.0);
      for (std::size_t i = 0; i < out.size(); ++i) out[i] += e.dense[i];
    }
    for (double& v : out) v /= static_cast<double>(std::max<std::size_t>(u.examples.size(), 1));
    return out;
  };
}

struct KMeansResult {
  ClusterAssignment assignment;
  std::vector<std::vector<double>> centroids;
  // Within-cluster sum of squares after each assignment step.
  std::vector<double> objective_history;
  std::size_t iterations = 0;
  std::size_t repairs = 0;
};

namespace detail {

inline double squared_distance(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

}  // namespace detail

// Lloyd's algorithm from a seeded k-means++ start. Nearest-centroid ties go
// to the lowest cluster index. A cluster left empty by an assignment step is
// reseeded at the point farthest from its current centroid.
inline KMeansResult kmeans(const Population& population,
                           const AttributeExtractor& extractor, std::size_t k,
                           std::size_t max_iter, std::uint64_t seed) {
  if (k < 1) throw InvalidConfigError("k must be >= 1");
  if (k > population.size()) {
    throw InvalidConfigError("k = " + std::to_string(k) + " exceeds the " +
                             std::to_string(population.size()) + " users");
  }
  const std::size_t n = population.size();
  std::vector<std::vector<double>> points;
  points.reserve(n);
  for (const auto& u : population) points.push_back(extractor(u));
  const std::size_t dim = points.front().size();
  for (const auto& p : points) {
    if (p.size() != dim) throw ShapeError("attribute vectors differ in length");
  }

  KMeansResult result;
  Rng rng(seed);
  auto& centroids = result.centroids;
  {
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    centroids.push_back(points[pick(rng)]);
    std::vector<double> dist(n, std::numeric_limits<double>::infinity());
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    while (centroids.size() < k) {
      double total = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        dist[i] = std::min(dist[i], detail::squared_distance(points[i], centroids.back()));
        total += dist[i];
      }
      std::size_t chosen = 0;
      if (total > 0.0) {
        double target = unit(rng) * total;
        chosen = n - 1;
        for (std::size_t i = 0; i < n; ++i) {
          target -= dist[i];
          if (target < 0.0 && dist[i] > 0.0) {
            chosen = i;
            break;
          }
        }
      }
      centroids.push_back(points[chosen]);
    }
  }

  std::vector<std::size_t> labels(n, 0);
  std::vector<double> own(n, 0.0);
  for (std::size_t iter = 0; iter < std::max<std::size_t>(max_iter, 1); ++iter) {
    bool changed = iter == 0;
    double objective = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t best = 0;
      double best_d = detail::squared_distance(points[i], centroids[0]);
      for (std::size_t c = 1; c < k; ++c) {
        const double d = detail::squared_distance(points[i], centroids[c]);
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      if (labels[i] != best) changed = true;
      labels[i] = best;
      own[i] = best_d;
      objective += best_d;
    }
    result.objective_history.push_back(objective);
    result.iterations = iter + 1;
    if (!changed) break;

    std::vector<std::vector<double>> sums(k, std::vector<double>(dim, 0.0));
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      ++counts[labels[i]];
      for (std::size_t j = 0; j < dim; ++j) sums[labels[i]][j] += points[i][j];
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] == 0) {
        std::size_t far = 0;
        for (std::size_t i = 1; i < n; ++i) {
          if (own[i] > own[far]) far = i;
        }
        centroids[c] = points[far];
        own[far] = 0.0;
        ++result.repairs;
        continue;
      }
      for (std::size_t j = 0; j < dim; ++j) {
        centroids[c][j] = sums[c][j] / static_cast<double>(counts[c]);
      }
    }
  }

  result.assignment.num_clusters = k;
  for (std::size_t i = 0; i < n; ++i) {
    result.assignment.mapping[population[i].user_id] = labels[i];
  }
  return result;
}

inline ClusterAssignment random_hash(const Population& population, std::size_t k,
                                     std::uint64_t seed) {
  if (k < 1) throw InvalidConfigError("k must be >= 1");
  ClusterAssignment out;
  out.num_clusters = k;
  for (const auto& u : population) {
    out.mapping[u.user_id] = mix64(fnv1a(u.user_id) ^ mix64(seed)) % k;
  }
  return out;
}

}  // namespace fedens
