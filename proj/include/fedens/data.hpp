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

// Client populations: synthetic multi-segment generation, CSV ingestion,
// opt-in selection, train/test splitting, and the server-side embedding
// table that translates sparse categorical features into dense vectors.

#pragma once

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "fedens/error.hpp"
#include "fedens/nn.hpp"
#include "fedens/seed.hpp"

namespace fedens {

struct SparseFeature {
  std::size_t slot = 0;
  std::size_t category = 0;
  bool operator==(const SparseFeature&) const = default;
};

struct Example {
  std::vector<double> dense;
  std::vector<SparseFeature> sparse;
  int label = 0;
  std::string user_id;
  std::int64_t timestamp = 0;
  bool operator==(const Example&) const = default;
};

// Static per-user attributes usable for clustering. Numeric or categorical.
using AttributeValue = std::variant<double, std::string>;

struct ClientDataset {
  std::string user_id;
  std::vector<Example> examples;
  std::map<std::string, AttributeValue> static_features;
  bool operator==(const ClientDataset&) const = default;
};

using Population = std::vector<ClientDataset>;

struct FeatureSchema {
  std::size_t dense_dim = 0;
  std::vector<std::size_t> sparse_cardinalities;

  std::size_t num_slots() const { return sparse_cardinalities.size(); }
};

// ---------------------------------------------------------------------------
// Synthetic populations

// Each user belongs to one latent segment; each segment owns a teacher
// vector w_s and (optionally) a feature-mean offset. Labels follow
// Bernoulli(sigmoid(w_s . x + sparse effects)), then flip with label_noise.
struct SyntheticSpec {
  std::size_t num_users = 2000;
  std::size_t num_segments = 4;
  std::size_t dense_dim = 16;
  std::size_t min_examples = 20;
  std::size_t max_examples = 30;
  // Standard deviation of the teacher logit w_s . z for z ~ N(0, I).
  double teacher_scale = 3.0;
  double label_noise = 0.0;
  // Norm of the per-segment mean offset added to x. Zero gives x ~ N(0, I).
  double segment_shift = 0.0;
  // Probability that a user's observable segment attribute is resampled
  // uniformly instead of reporting the true segment.
  double attribute_noise = 0.1;
  // Standard deviation of the jitter on the attr_* one-hot vector.
  double attribute_jitter = 0.25;
  // Segments alternate between w_0 and -w_0.
  bool antipodal = false;
  std::vector<std::size_t> sparse_cardinalities;
  double sparse_effect_scale = 1.0;
  std::uint64_t seed = 1;

  void validate() const {
    if (num_segments < 1) throw InvalidConfigError("num_segments must be >= 1");
    if (dense_dim < 1) throw InvalidConfigError("dense_dim must be >= 1");
    if (min_examples < 1 || max_examples < min_examples) {
      throw InvalidConfigError("examples-per-user range is invalid");
    }
    if (!(label_noise >= 0.0 && label_noise < 0.5)) {
      throw InvalidConfigError("label_noise must lie in [0, 0.5)");
    }
    if (!(attribute_noise >= 0.0 && attribute_noise <= 1.0)) {
      throw InvalidConfigError("attribute_noise must lie in [0, 1]");
    }
    for (std::size_t c : sparse_cardinalities) {
      if (c == 0) throw InvalidConfigError("sparse cardinality must be >= 1");
    }
  }

  FeatureSchema schema() const { return {dense_dim, sparse_cardinalities}; }
};

struct SyntheticPopulation {
  Population users;
  std::map<std::string, std::size_t> segments;  // ground truth
  std::vector<std::vector<double>> teachers;
};

inline std::string synthetic_user_id(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "u%07zu", index);
  return buf;
}

inline SyntheticPopulation generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  const std::size_t d = spec.dense_dim;
  const std::size_t segs = spec.num_segments;
  SyntheticPopulation pop;

  Rng world(derive_seed(spec.seed, "synthetic-world"));
  std::normal_distribution<double> normal(0.0, 1.0);
  const double w_scale = spec.teacher_scale / std::sqrt(static_cast<double>(d));
  std::vector<std::vector<double>> shifts(segs, std::vector<double>(d, 0.0));
  pop.teachers.assign(segs, std::vector<double>(d, 0.0));
  for (std::size_t s = 0; s < segs; ++s) {
    if (spec.antipodal && s > 0) {
      const double sign = (s % 2 == 1) ? -1.0 : 1.0;
      for (std::size_t j = 0; j < d; ++j) pop.teachers[s][j] = sign * pop.teachers[0][j];
    } else {
      for (double& w : pop.teachers[s]) w = normal(world) * w_scale;
    }
    double norm = 0.0;
    for (double& m : shifts[s]) {
      m = normal(world);
      norm += m * m;
    }
    norm = std::sqrt(norm);
    for (double& m : shifts[s]) m = norm > 0.0 ? m * spec.segment_shift / norm : 0.0;
  }
  // effects[s][slot][category]
  std::vector<std::vector<std::vector<double>>> effects(segs);
  std::normal_distribution<double> effect_dist(0.0, spec.sparse_effect_scale);
  for (std::size_t s = 0; s < segs; ++s) {
    for (std::size_t card : spec.sparse_cardinalities) {
      std::vector<double> row(card);
      for (double& e : row) e = effect_dist(world);
      effects[s].push_back(std::move(row));
    }
  }

  pop.users.reserve(spec.num_users);
  for (std::size_t u = 0; u < spec.num_users; ++u) {
    Rng rng(derive_seed(spec.seed, "synthetic-user", u));
    std::uniform_int_distribution<std::size_t> seg_dist(0, segs - 1);
    std::uniform_int_distribution<std::size_t> count_dist(spec.min_examples,
                                                          spec.max_examples);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);
    const std::size_t seg = seg_dist(rng);
    const std::size_t count = count_dist(rng);

    ClientDataset client;
    client.user_id = synthetic_user_id(u);
    client.examples.reserve(count);
    std::size_t positives = 0;
    for (std::size_t j = 0; j < count; ++j) {
      Example ex;
      ex.user_id = client.user_id;
      ex.timestamp = static_cast<std::int64_t>((j * 1000) / count);
      ex.dense.resize(d);
      double logit = 0.0;
      for (std::size_t k = 0; k < d; ++k) {
        ex.dense[k] = shifts[seg][k] + gauss(rng);
        logit += pop.teachers[seg][k] * ex.dense[k];
      }
      for (std::size_t slot = 0; slot < spec.sparse_cardinalities.size(); ++slot) {
        std::uniform_int_distribution<std::size_t> cat_dist(
            0, spec.sparse_cardinalities[slot] - 1);
        const std::size_t cat = cat_dist(rng);
        ex.sparse.push_back({slot, cat});
        logit += effects[seg][slot][cat];
      }
      int label = unit(rng) < sigmoid(logit) ? 1 : 0;
      if (unit(rng) < spec.label_noise) label = 1 - label;
      ex.label = label;
      positives += static_cast<std::size_t>(label);
      client.examples.push_back(std::move(ex));
    }

    std::size_t observed = seg;
    if (unit(rng) < spec.attribute_noise) observed = seg_dist(rng);
    client.static_features["segment"] = static_cast<double>(seg);
    client.static_features["segment_noisy"] = static_cast<double>(observed);
    std::normal_distribution<double> jitter(0.0, spec.attribute_jitter);
    for (std::size_t s = 0; s < segs; ++s) {
      client.static_features["attr_" + std::to_string(s)] =
          (s == observed ? 1.0 : 0.0) + jitter(rng);
    }
    client.static_features["click_ratio"] =
        static_cast<double>(positives) / static_cast<double>(count);
    pop.segments[client.user_id] = seg;
    pop.users.push_back(std::move(client));
  }
  return pop;
}

// ---------------------------------------------------------------------------
// CSV

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline std::string trim(std::string s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

inline bool parse_double(const std::string& s, double& out) {
  if (s.empty()) return false;
  char* end = nullptr;
  out = std::strtod(s.c_str(), &end);
  return end == s.c_str() + s.size() && std::isfinite(out);
}

inline bool parse_int64(const std::string& s, std::int64_t& out) {
  if (s.empty()) return false;
  char* end = nullptr;
  errno = 0;
  const long long v = std::strtoll(s.c_str(), &end, 10);
  if (errno != 0 || end != s.c_str() + s.size()) return false;
  out = v;
  return true;
}

}  // namespace detail

inline std::vector<std::string> csv_header(const FeatureSchema& schema) {
  std::vector<std::string> cols{"user_id", "timestamp", "label"};
  for (std::size_t i = 0; i < schema.dense_dim; ++i) cols.push_back("dense_" + std::to_string(i));
  for (std::size_t i = 0; i < schema.num_slots(); ++i) cols.push_back("sparse_" + std::to_string(i));
  return cols;
}

struct CsvLoadResult {
  Population users;
  std::size_t rejected = 0;
  std::vector<std::string> diagnostics;  // one per rejected row, capped
};

// Reads `user_id,timestamp,label,dense_*,sparse_*`. Rows are grouped by user
// (users ordered by id) and sorted by timestamp within a user. Bad rows are
// rejected and counted rather than aborting the load.
inline CsvLoadResult load_csv(const std::filesystem::path& path,
                              const FeatureSchema& schema) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw SchemaError("missing header in " + path.string());
  auto header = detail::split_csv_line(line);
  for (auto& h : header) h = detail::trim(h);
  const auto expected = csv_header(schema);
  std::map<std::string, std::size_t> position;
  for (std::size_t i = 0; i < header.size(); ++i) position[header[i]] = i;
  std::vector<std::string> missing;
  std::vector<std::size_t> column_of;
  for (const auto& name : expected) {
    auto it = position.find(name);
    if (it == position.end()) {
      missing.push_back(name);
    } else {
      column_of.push_back(it->second);
    }
  }
  if (!missing.empty()) {
    std::string msg = "CSV header is missing columns:";
    for (const auto& m : missing) msg += " " + m;
    throw SchemaError(msg);
  }
  if (header.size() != expected.size()) {
    throw SchemaError("CSV header has " + std::to_string(header.size()) +
                      " columns, schema expects " + std::to_string(expected.size()));
  }

  CsvLoadResult result;
  std::map<std::string, std::vector<Example>> grouped;
  std::size_t line_no = 1;
  auto reject = [&](const std::string& why) {
    ++result.rejected;
    if (result.diagnostics.size() < 100) {
      result.diagnostics.push_back("line " + std::to_string(line_no) + ": " + why);
    }
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    auto cells = detail::split_csv_line(line);
    if (cells.size() != header.size()) {
      reject("expected " + std::to_string(header.size()) + " cells, got " +
             std::to_string(cells.size()));
      continue;
    }
    for (auto& c : cells) c = detail::trim(c);
    Example ex;
    ex.user_id = cells[column_of[0]];
    if (ex.user_id.empty()) {
      reject("empty user_id");
      continue;
    }
    if (!detail::parse_int64(cells[column_of[1]], ex.timestamp)) {
      reject("bad timestamp");
      continue;
    }
    const auto& label = cells[column_of[2]];
    if (label == "0") {
      ex.label = 0;
    } else if (label == "1") {
      ex.label = 1;
    } else {
      reject("bad label '" + label + "'");
      continue;
    }
    bool ok = true;
    ex.dense.resize(schema.dense_dim);
    for (std::size_t i = 0; i < schema.dense_dim && ok; ++i) {
      if (!detail::parse_double(cells[column_of[3 + i]], ex.dense[i])) {
        reject("bad dense_" + std::to_string(i));
        ok = false;
      }
    }
    for (std::size_t s = 0; s < schema.num_slots() && ok; ++s) {
      std::int64_t cat = 0;
      if (!detail::parse_int64(cells[column_of[3 + schema.dense_dim + s]], cat) ||
          cat < 0 ||
          static_cast<std::size_t>(cat) >= schema.sparse_cardinalities[s]) {
        reject("sparse_" + std::to_string(s) + " outside declared cardinality");
        ok = false;
        break;
      }
      ex.sparse.push_back({s, static_cast<std::size_t>(cat)});
    }
    if (!ok) continue;
    grouped[ex.user_id].push_back(std::move(ex));
  }

  for (auto& [uid, examples] : grouped) {
    std::stable_sort(examples.begin(), examples.end(),
                     [](const Example& a, const Example& b) {
                       return a.timestamp < b.timestamp;
                     });
    ClientDataset client;
    client.user_id = uid;
    double positives = 0.0;
    for (const auto& e : examples) positives += e.label;
    client.static_features["click_ratio"] =
        positives / static_cast<double>(examples.size());
    client.static_features["example_count"] = static_cast<double>(examples.size());
    client.examples = std::move(examples);
    result.users.push_back(std::move(client));
  }
  return result;
}

inline void write_csv(const std::filesystem::path& path, const Population& users,
                      const FeatureSchema& schema) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  const auto header = csv_header(schema);
  for (std::size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
  out << '\n';
  char buf[64];
  for (const auto& user : users) {
    for (const auto& ex : user.examples) {
      out << ex.user_id << ',' << ex.timestamp << ',' << ex.label;
      for (double v : ex.dense) {
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        out << ',' << buf;
      }
      for (const auto& sf : ex.sparse) out << ',' << sf.category;
      out << '\n';
    }
  }
}

// Numeric static features, one row per user: user_id,<name>,...
inline void write_user_attributes(const std::filesystem::path& path,
                                  const Population& users) {
  std::set<std::string> names;
  for (const auto& u : users) {
    for (const auto& [k, v] : u.static_features) {
      if (std::holds_alternative<double>(v)) names.insert(k);
    }
  }
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << "user_id";
  for (const auto& n : names) out << ',' << n;
  out << '\n';
  char buf[64];
  for (const auto& u : users) {
    out << u.user_id;
    for (const auto& n : names) {
      auto it = u.static_features.find(n);
      out << ',';
      if (it != u.static_features.end()) {
        std::snprintf(buf, sizeof(buf), "%.17g", std::get<double>(it->second));
        out << buf;
      }
    }
    out << '\n';
  }
}

// Attaches attributes from a user_id-keyed CSV. Cells that do not parse as
// numbers are stored as categorical values; empty cells are skipped.
inline void load_user_attributes(const std::filesystem::path& path,
                                 Population& users) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw SchemaError("missing header in " + path.string());
  auto header = detail::split_csv_line(line);
  for (auto& h : header) h = detail::trim(h);
  if (header.empty() || header[0] != "user_id") {
    throw SchemaError("user attribute file must start with a user_id column");
  }
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < users.size(); ++i) index[users[i].user_id] = i;
  while (std::getline(in, line)) {
    if (detail::trim(line).empty()) continue;
    auto cells = detail::split_csv_line(line);
    if (cells.size() != header.size()) continue;
    auto it = index.find(detail::trim(cells[0]));
    if (it == index.end()) continue;
    auto& features = users[it->second].static_features;
    for (std::size_t c = 1; c < cells.size(); ++c) {
      const auto cell = detail::trim(cells[c]);
      if (cell.empty()) continue;
      double v = 0.0;
      if (detail::parse_double(cell, v)) {
        features[header[c]] = v;
      } else {
        features[header[c]] = cell;
      }
    }
  }
}

// ---------------------------------------------------------------------------
// Opt-in selection and splitting

struct OptinSplit {
  Population optin;
  Population rest;
};

// Seeded uniform sample of round(fraction * |population|) users, without
// replacement. Both halves keep the input order.
inline OptinSplit select_optin(const Population& population, double fraction,
                               std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw InvalidConfigError("opt-in fraction must lie in (0, 1]");
  }
  OptinSplit split;
  if (population.empty()) return split;
  const auto count = static_cast<std::size_t>(
      std::llround(fraction * static_cast<double>(population.size())));
  std::vector<std::size_t> order(population.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<char> chosen(population.size(), 0);
  for (std::size_t i = 0; i < std::min(count, order.size()); ++i) chosen[order[i]] = 1;
  for (std::size_t i = 0; i < population.size(); ++i) {
    (chosen[i] ? split.optin : split.rest).push_back(population[i]);
  }
  return split;
}

enum class SplitRule { kTemporal, kUser };

struct TrainTestSplit {
  Population train;           // users with at least one training example
  std::vector<Example> test;  // held-out examples, ordered by user then time
};

// kTemporal holds out every example at or after the (1 - test_fraction)
// quantile of all timestamps. kUser holds out a seeded test_fraction of users.
inline TrainTestSplit split_train_test(const Population& population, SplitRule rule,
                                       double test_fraction, std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw InvalidConfigError("test_fraction must lie in (0, 1)");
  }
  TrainTestSplit out;
  if (rule == SplitRule::kTemporal) {
    std::vector<std::int64_t> stamps;
    for (const auto& u : population) {
      for (const auto& e : u.examples) stamps.push_back(e.timestamp);
    }
    if (stamps.empty()) return out;
    std::sort(stamps.begin(), stamps.end());
    auto idx = static_cast<std::size_t>(
        std::floor((1.0 - test_fraction) * static_cast<double>(stamps.size())));
    idx = std::min(idx, stamps.size() - 1);
    const std::int64_t cutoff = stamps[idx];
    for (const auto& u : population) {
      ClientDataset train_user = u;
      train_user.examples.clear();
      for (const auto& e : u.examples) {
        (e.timestamp >= cutoff ? out.test : train_user.examples).push_back(e);
      }
      if (!train_user.examples.empty()) out.train.push_back(std::move(train_user));
    }
    return out;
  }
  auto held = select_optin(population, test_fraction, seed);
  for (auto& u : held.optin) {
    for (auto& e : u.examples) out.test.push_back(std::move(e));
  }
  out.train = std::move(held.rest);
  return out;
}

// ---------------------------------------------------------------------------
// Embeddings

class EmbeddingTable {
 public:
  static constexpr std::size_t kDim = 32;

  EmbeddingTable() : frozen_(true) {}

  EmbeddingTable(std::vector<std::size_t> cardinalities, std::uint64_t seed,
                 double init_scale = 0.05)
      : cardinalities_(std::move(cardinalities)) {
    Rng rng(seed);
    std::uniform_real_distribution<double> dist(-init_scale, init_scale);
    for (std::size_t card : cardinalities_) {
      std::vector<double> table(card * kDim);
      for (double& v : table) v = dist(rng);
      tables_.push_back(std::move(table));
    }
  }

  std::size_t num_slots() const { return cardinalities_.size(); }
  std::size_t cardinality(std::size_t slot) const { return cardinalities_.at(slot); }
  const std::vector<std::size_t>& cardinalities() const { return cardinalities_; }
  bool frozen() const { return frozen_; }
  void freeze() { frozen_ = true; }

  std::span<const double> row(std::size_t slot, std::size_t category) const {
    check(slot, category);
    return {tables_[slot].data() + category * kDim, kDim};
  }

  std::span<double> mutable_row(std::size_t slot, std::size_t category) {
    if (frozen_) throw InvalidArgumentError("embedding table is frozen");
    check(slot, category);
    return {tables_[slot].data() + category * kDim, kDim};
  }

  bool operator==(const EmbeddingTable& o) const {
    return cardinalities_ == o.cardinalities_ && tables_ == o.tables_;
  }

 private:
  void check(std::size_t slot, std::size_t category) const {
    if (slot >= cardinalities_.size()) {
      throw SchemaError("unknown sparse slot " + std::to_string(slot));
    }
    if (category >= cardinalities_[slot]) {
      throw SchemaError("category " + std::to_string(category) +
                        " outside cardinality of slot " + std::to_string(slot));
    }
  }

  std::vector<std::size_t> cardinalities_;
  std::vector<std::vector<double>> tables_;
  bool frozen_ = false;
};

namespace detail {

// Dense features followed by one embedding row per slot, in slot order.
inline void featurize_into(const Example& example, const EmbeddingTable& table,
                           std::vector<double>& out) {
  const std::size_t slots = table.num_slots();
  out.assign(example.dense.begin(), example.dense.end());
  if (slots == 0) {
    if (!example.sparse.empty()) throw SchemaError("example has sparse features but table has no slots");
    return;
  }
  std::vector<const SparseFeature*> by_slot(slots, nullptr);
  for (const auto& sf : example.sparse) {
    if (sf.slot >= slots) throw SchemaError("unknown sparse slot " + std::to_string(sf.slot));
    by_slot[sf.slot] = &sf;
  }
  out.reserve(out.size() + slots * EmbeddingTable::kDim);
  for (std::size_t s = 0; s < slots; ++s) {
    if (by_slot[s] == nullptr) throw SchemaError("example lacks sparse slot " + std::to_string(s));
    const auto row = table.row(s, by_slot[s]->category);
    out.insert(out.end(), row.begin(), row.end());
  }
}

}  // namespace detail

inline std::vector<double> featurize(const Example& example,
                                     const EmbeddingTable& table) {
  if (!table.frozen()) {
    throw InvalidArgumentError("featurize requires a frozen embedding table");
  }
  std::vector<double> out;
  detail::featurize_into(example, table, out);
  return out;
}

inline std::size_t featurized_width(const FeatureSchema& schema) {
  return schema.dense_dim + EmbeddingTable::kDim * schema.num_slots();
}

struct PretrainConfig {
  std::size_t epochs = 1;
  double learning_rate = 0.01;
  int head_decay_k = 2;
  std::uint64_t seed = 1;
};

// Trains embeddings jointly with a throwaway MLP head by per-example AdaGrad
// over the opt-in examples, then freezes the table. Rows no example touches
// keep their initial values.
inline EmbeddingTable pretrain_embeddings(const Population& optin,
                                          const FeatureSchema& schema,
                                          const PretrainConfig& cfg) {
  if (schema.num_slots() == 0) {
    throw InvalidConfigError("embedding pretraining needs at least one sparse slot");
  }
  EmbeddingTable table(schema.sparse_cardinalities,
                       derive_seed(cfg.seed, "embedding-init"));
  std::vector<const Example*> examples;
  for (const auto& u : optin) {
    for (const auto& e : u.examples) examples.push_back(&e);
  }
  if (cfg.epochs > 0 && examples.empty()) {
    throw InvalidArgumentError("embedding pretraining needs opt-in examples");
  }
  const std::size_t width = featurized_width(schema);
  MlpModel head = build_mlp(width, cfg.head_decay_k, derive_seed(cfg.seed, "embedding-head"));
  auto head_state = OptimizerState::adagrad(cfg.learning_rate, head.parameter_count());
  std::vector<std::vector<double>> row_accum;
  for (std::size_t card : schema.sparse_cardinalities) {
    row_accum.emplace_back(card * EmbeddingTable::kDim, 0.0);
  }

  Rng rng(derive_seed(cfg.seed, "embedding-order"));
  Backprop bp(head);
  std::vector<double> x;
  std::vector<double> grad(head.parameter_count());
  std::vector<double> input_grad(width);
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(examples.begin(), examples.end(), rng);
    for (const Example* ex : examples) {
      detail::featurize_into(*ex, table, x);
      std::fill(grad.begin(), grad.end(), 0.0);
      bp.accumulate(x, ex->label, grad, 1.0, input_grad);
      apply_step(head, grad, head_state);
      for (const auto& sf : ex->sparse) {
        auto row = table.mutable_row(sf.slot, sf.category);
        auto& acc = row_accum[sf.slot];
        const std::size_t base = schema.dense_dim + sf.slot * EmbeddingTable::kDim;
        for (std::size_t k = 0; k < EmbeddingTable::kDim; ++k) {
          const double g = input_grad[base + k];
          double& a = acc[sf.category * EmbeddingTable::kDim + k];
          a += g * g;
          row[k] -= cfg.learning_rate * g / (std::sqrt(a) + kAdagradEpsilon);
        }
      }
    }
  }
  table.freeze();
  return table;
}

}  // namespace fedens
