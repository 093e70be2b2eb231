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

// Experiment configuration and its key-value file format.
//
// One `key = value` per line; `#` starts a comment; blank lines are ignored.
// Keys carry a section prefix (data., model., rounds., dp., cluster.,
// ensemble., embedding., experiment., sweep.). Unknown keys are errors. Lists
// are comma-separated. See configs/ for annotated examples.

#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "fedens/data.hpp"
#include "fedens/ensemble.hpp"
#include "fedens/error.hpp"
#include "fedens/fed.hpp"
#include "fedens/privacy.hpp"

namespace fedens {

enum class DataSource { kSynthetic, kCsv };
enum class ClusterMethodKind { kFeature, kKMeans, kHash };

struct ClusteringConfig {
  ClusterMethodKind kind = ClusterMethodKind::kFeature;
  std::string feature = "segment_noisy";
  std::vector<double> edges{0.5, 1.5, 2.5};
  std::size_t k = 4;
  std::size_t max_iter = 50;
  // kmeans attribute vectors: numeric static features with this name prefix,
  // or the per-user dense mean when set to "mean_dense".
  std::string attributes = "attr_";
};

struct ExperimentConfig {
  std::string name = "experiment";

  DataSource source = DataSource::kSynthetic;
  SyntheticSpec synthetic;
  std::filesystem::path csv_path;
  std::filesystem::path user_attributes;
  FeatureSchema csv_schema;
  double optin_fraction = 0.1;
  SplitRule split = SplitRule::kTemporal;
  double test_fraction = 0.2;
  // Trailing dense columns only the client may see; they feed a private leaf.
  std::size_t private_dense = 0;

  int decay_k = 4;
  std::size_t max_hidden_layers = 3;

  RoundConfig rounds;
  DpConfig dp;
  double dp_delta = 0.0;  // 0 selects 1 / (10 * users)
  // Noise multiplier charged to an over-arch trained on private data.
  double overarch_noise_multiplier = 0.0;

  ClusteringConfig cluster;

  std::vector<AggregationMethod> methods{AggregationMethod::kMean, AggregationMethod::kMedian,
                                         AggregationMethod::kMax, AggregationMethod::kNn};
  AggregationMethod serve_method = AggregationMethod::kNn;
  OverarchConfig overarch;

  PretrainConfig pretrain;

  std::vector<std::uint64_t> seeds{1};

  std::vector<std::size_t> sweep_clusters;
  std::vector<double> sweep_noise;

  FeatureSchema schema() const {
    return source == DataSource::kSynthetic ? synthetic.schema() : csv_schema;
  }

  void validate() const {
    if (seeds.empty()) throw InvalidConfigError("experiment.seeds must not be empty");
    if (source == DataSource::kSynthetic) {
      synthetic.validate();
    } else {
      if (csv_path.empty()) throw InvalidConfigError("data.csv_path is required for csv data");
      if (!std::filesystem::exists(csv_path)) {
        throw InvalidConfigError("data.csv_path does not exist: " + csv_path.string());
      }
      if (!user_attributes.empty() && !std::filesystem::exists(user_attributes)) {
        throw InvalidConfigError("data.user_attributes does not exist: " + user_attributes.string());
      }
    }
    if (private_dense >= schema().dense_dim && private_dense > 0) {
      throw InvalidConfigError("data.private_dense must leave at least one public dense column");
    }
    if (!(optin_fraction > 0.0 && optin_fraction <= 1.0)) {
      throw InvalidConfigError("data.optin_fraction must lie in (0, 1]");
    }
    if (decay_k < 2) throw InvalidConfigError("model.decay_k must be >= 2");
    if (methods.empty()) throw InvalidConfigError("ensemble.methods must not be empty");
    rounds.validate();
    dp.validate();
  }
};

namespace detail {

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream ss(s);
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

inline double to_double(const std::string& key, const std::string& v) {
  if (v == "inf" || v == "infinity") return std::numeric_limits<double>::infinity();
  double out = 0.0;
  char* end = nullptr;
  out = std::strtod(v.c_str(), &end);
  if (v.empty() || end != v.c_str() + v.size() || std::isnan(out)) {
    throw InvalidConfigError(key + ": expected a number, got '" + v + "'");
  }
  return out;
}

inline std::uint64_t to_u64(const std::string& key, const std::string& v) {
  std::int64_t out = 0;
  if (!parse_int64(v, out) || out < 0) {
    throw InvalidConfigError(key + ": expected a nonnegative integer, got '" + v + "'");
  }
  return static_cast<std::uint64_t>(out);
}

inline bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw InvalidConfigError(key + ": expected a boolean, got '" + v + "'");
}

template <typename T>
std::vector<T> to_list(const std::string& key, const std::string& v) {
  std::vector<T> out;
  for (const auto& item : split_list(v)) {
    if constexpr (std::is_same_v<T, double>) {
      out.push_back(to_double(key, item));
    } else {
      out.push_back(static_cast<T>(to_u64(key, item)));
    }
  }
  return out;
}

using Setter = std::function<void(ExperimentConfig&, const std::string&, const std::string&)>;

inline const std::map<std::string, Setter>& config_setters() {
  using C = ExperimentConfig;
  using S = std::string;
  static const std::map<std::string, Setter> setters = {
      {"experiment.name", [](C& c, const S&, const S& v) { c.name = v; }},
      {"experiment.seeds", [](C& c, const S& k, const S& v) { c.seeds = to_list<std::uint64_t>(k, v); }},

      {"data.source", [](C& c, const S& k, const S& v) {
         if (v == "synthetic") c.source = DataSource::kSynthetic;
         else if (v == "csv") c.source = DataSource::kCsv;
         else throw InvalidConfigError(k + ": expected synthetic or csv");
       }},
      {"data.users", [](C& c, const S& k, const S& v) { c.synthetic.num_users = to_u64(k, v); }},
      {"data.segments", [](C& c, const S& k, const S& v) { c.synthetic.num_segments = to_u64(k, v); }},
      {"data.dense_dim", [](C& c, const S& k, const S& v) {
         c.synthetic.dense_dim = to_u64(k, v);
         c.csv_schema.dense_dim = c.synthetic.dense_dim;
       }},
      {"data.min_examples", [](C& c, const S& k, const S& v) { c.synthetic.min_examples = to_u64(k, v); }},
      {"data.max_examples", [](C& c, const S& k, const S& v) { c.synthetic.max_examples = to_u64(k, v); }},
      {"data.teacher_scale", [](C& c, const S& k, const S& v) { c.synthetic.teacher_scale = to_double(k, v); }},
      {"data.label_noise", [](C& c, const S& k, const S& v) { c.synthetic.label_noise = to_double(k, v); }},
      {"data.segment_shift", [](C& c, const S& k, const S& v) { c.synthetic.segment_shift = to_double(k, v); }},
      {"data.attribute_noise", [](C& c, const S& k, const S& v) { c.synthetic.attribute_noise = to_double(k, v); }},
      {"data.attribute_jitter", [](C& c, const S& k, const S& v) { c.synthetic.attribute_jitter = to_double(k, v); }},
      {"data.antipodal", [](C& c, const S& k, const S& v) { c.synthetic.antipodal = to_bool(k, v); }},
      {"data.sparse_cardinalities", [](C& c, const S& k, const S& v) {
         c.synthetic.sparse_cardinalities = to_list<std::size_t>(k, v);
         c.csv_schema.sparse_cardinalities = c.synthetic.sparse_cardinalities;
       }},
      {"data.sparse_effect_scale", [](C& c, const S& k, const S& v) { c.synthetic.sparse_effect_scale = to_double(k, v); }},
      {"data.csv_path", [](C& c, const S&, const S& v) { c.csv_path = v; }},
      {"data.user_attributes", [](C& c, const S&, const S& v) { c.user_attributes = v; }},
      {"data.optin_fraction", [](C& c, const S& k, const S& v) { c.optin_fraction = to_double(k, v); }},
      {"data.split", [](C& c, const S& k, const S& v) {
         if (v == "temporal") c.split = SplitRule::kTemporal;
         else if (v == "user") c.split = SplitRule::kUser;
         else throw InvalidConfigError(k + ": expected temporal or user");
       }},
      {"data.test_fraction", [](C& c, const S& k, const S& v) { c.test_fraction = to_double(k, v); }},
      {"data.private_dense", [](C& c, const S& k, const S& v) { c.private_dense = to_u64(k, v); }},

      {"model.decay_k", [](C& c, const S& k, const S& v) { c.decay_k = static_cast<int>(to_u64(k, v)); }},
      {"model.max_hidden_layers", [](C& c, const S& k, const S& v) { c.max_hidden_layers = to_u64(k, v); }},

      {"rounds.clients_per_round", [](C& c, const S& k, const S& v) { c.rounds.clients_per_round = to_u64(k, v); }},
      {"rounds.local_epochs", [](C& c, const S& k, const S& v) { c.rounds.local_epochs = to_u64(k, v); }},
      {"rounds.batch_size", [](C& c, const S& k, const S& v) { c.rounds.batch_size = to_u64(k, v); }},
      {"rounds.learning_rate", [](C& c, const S& k, const S& v) { c.rounds.learning_rate = to_double(k, v); }},
      {"rounds.global_epochs", [](C& c, const S& k, const S& v) { c.rounds.global_epochs = to_u64(k, v); }},
      {"rounds.uniform_weights", [](C& c, const S& k, const S& v) { c.rounds.uniform_weights = to_bool(k, v); }},
      {"rounds.threads", [](C& c, const S& k, const S& v) { c.rounds.threads = to_u64(k, v); }},

      {"dp.enabled", [](C& c, const S& k, const S& v) { c.dp.enabled = to_bool(k, v); }},
      {"dp.clip_norm", [](C& c, const S& k, const S& v) { c.dp.clip_norm = to_double(k, v); }},
      {"dp.noise_multiplier", [](C& c, const S& k, const S& v) { c.dp.noise_multiplier = to_double(k, v); }},
      {"dp.delta", [](C& c, const S& k, const S& v) { c.dp_delta = to_double(k, v); }},
      {"dp.overarch_noise_multiplier", [](C& c, const S& k, const S& v) { c.overarch_noise_multiplier = to_double(k, v); }},

      {"cluster.method", [](C& c, const S& k, const S& v) {
         if (v == "feature") c.cluster.kind = ClusterMethodKind::kFeature;
         else if (v == "kmeans") c.cluster.kind = ClusterMethodKind::kKMeans;
         else if (v == "hash") c.cluster.kind = ClusterMethodKind::kHash;
         else throw InvalidConfigError(k + ": expected feature, kmeans or hash");
       }},
      {"cluster.feature", [](C& c, const S&, const S& v) { c.cluster.feature = v; }},
      {"cluster.edges", [](C& c, const S& k, const S& v) { c.cluster.edges = to_list<double>(k, v); }},
      {"cluster.k", [](C& c, const S& k, const S& v) { c.cluster.k = to_u64(k, v); }},
      {"cluster.max_iter", [](C& c, const S& k, const S& v) { c.cluster.max_iter = to_u64(k, v); }},
      {"cluster.attributes", [](C& c, const S&, const S& v) { c.cluster.attributes = v; }},

      {"ensemble.methods", [](C& c, const S&, const S& v) {
         c.methods.clear();
         for (const auto& m : split_list(v)) c.methods.push_back(parse_aggregation(m));
       }},
      {"ensemble.serve_method", [](C& c, const S&, const S& v) { c.serve_method = parse_aggregation(v); }},
      {"ensemble.overarch_decay_k", [](C& c, const S& k, const S& v) { c.overarch.decay_k = static_cast<int>(to_u64(k, v)); }},
      {"ensemble.overarch_epochs", [](C& c, const S& k, const S& v) { c.overarch.epochs = to_u64(k, v); }},
      {"ensemble.overarch_batch_size", [](C& c, const S& k, const S& v) { c.overarch.batch_size = to_u64(k, v); }},
      {"ensemble.overarch_max_hidden_layers", [](C& c, const S& k, const S& v) { c.overarch.max_hidden_layers = to_u64(k, v); }},
      {"ensemble.overarch_learning_rate", [](C& c, const S& k, const S& v) { c.overarch.learning_rate = to_double(k, v); }},

      {"embedding.epochs", [](C& c, const S& k, const S& v) { c.pretrain.epochs = to_u64(k, v); }},
      {"embedding.learning_rate", [](C& c, const S& k, const S& v) { c.pretrain.learning_rate = to_double(k, v); }},
      {"embedding.head_decay_k", [](C& c, const S& k, const S& v) { c.pretrain.head_decay_k = static_cast<int>(to_u64(k, v)); }},

      {"sweep.clusters", [](C& c, const S& k, const S& v) { c.sweep_clusters = to_list<std::size_t>(k, v); }},
      {"sweep.noise_multipliers", [](C& c, const S& k, const S& v) { c.sweep_noise = to_list<double>(k, v); }},
  };
  return setters;
}

}  // namespace detail

inline void apply_setting(ExperimentConfig& cfg, const std::string& key,
                          const std::string& value) {
  const auto& setters = detail::config_setters();
  auto it = setters.find(key);
  if (it == setters.end()) throw InvalidConfigError("unknown config key '" + key + "'");
  it->second(cfg, key, value);
}

// Applies `key = value` lines from text onto cfg.
inline void apply_config_text(ExperimentConfig& cfg, const std::string& text,
                              const std::string& origin = "<config>") {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw InvalidConfigError(origin + ":" + std::to_string(line_no) + ": expected key = value");
    }
    const auto key = detail::trim(line.substr(0, eq));
    const auto value = detail::trim(line.substr(eq + 1));
    try {
      apply_setting(cfg, key, value);
    } catch (const InvalidConfigError& e) {
      throw InvalidConfigError(origin + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidConfigError("cannot open config " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  ExperimentConfig cfg;
  apply_config_text(cfg, buf.str(), path.string());
  // Relative data paths resolve against the config's directory.
  const auto base = path.parent_path();
  if (!cfg.csv_path.empty() && cfg.csv_path.is_relative()) cfg.csv_path = base / cfg.csv_path;
  if (!cfg.user_attributes.empty() && cfg.user_attributes.is_relative()) {
    cfg.user_attributes = base / cfg.user_attributes;
  }
  return cfg;
}

}  // namespace fedens
