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

// Server-side ensembles of per-cluster leaf models.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "fedens/checkpoint.hpp"
#include "fedens/error.hpp"
#include "fedens/nn.hpp"
#include "fedens/seed.hpp"

namespace fedens {

enum class AggregationMethod { kMean, kMedian, kMax, kNn };

inline std::string to_string(AggregationMethod m) {
  switch (m) {
    case AggregationMethod::kMean: return "mean";
    case AggregationMethod::kMedian: return "median";
    case AggregationMethod::kMax: return "max";
    case AggregationMethod::kNn: return "nn";
  }
  return "?";
}

inline AggregationMethod parse_aggregation(const std::string& name) {
  if (name == "mean") return AggregationMethod::kMean;
  if (name == "median") return AggregationMethod::kMedian;
  if (name == "max") return AggregationMethod::kMax;
  if (name == "nn") return AggregationMethod::kNn;
  throw InvalidConfigError("unknown aggregation method '" + name + "'");
}

struct Leaf {
  std::size_t cluster_id = 0;
  MlpModel model;
};

struct LeafOutput {
  double prediction = 0.5;
  std::vector<double> last_hidden;
};

struct LeafEnsemble {
  std::vector<Leaf> leaves;
  std::optional<MlpModel> private_leaf;
  std::optional<MlpModel> overarch;

  std::size_t public_width() const {
    return leaves.empty() ? 0 : leaves.front().model.input_dim();
  }
  std::size_t hidden_width() const {
    return leaves.empty() ? 0 : leaves.front().model.last_hidden_dim();
  }

  // N * (1 + H), plus 1 + H_p with a private leaf.
  std::size_t overarch_input_width() const {
    std::size_t w = leaves.size() * (1 + hidden_width());
    if (private_leaf) w += 1 + private_leaf->last_hidden_dim();
    return w;
  }

  void validate() const {
    if (leaves.empty()) throw InvalidConfigError("ensemble has no leaves");
    std::set<std::size_t> ids;
    for (const auto& leaf : leaves) {
      if (leaf.model.input_dim() != public_width()) {
        throw ShapeError("leaves disagree on input width");
      }
      if (leaf.model.last_hidden_dim() != hidden_width()) {
        throw ShapeError("leaves disagree on last hidden width");
      }
      if (!ids.insert(leaf.cluster_id).second) {
        throw InvalidConfigError("duplicate leaf cluster id " + std::to_string(leaf.cluster_id));
      }
    }
    if (overarch && overarch->input_dim() != overarch_input_width()) {
      throw ShapeError("over-arch input width " + std::to_string(overarch->input_dim()) +
                       " does not match " + std::to_string(overarch_input_width()));
    }
  }
};

inline std::vector<LeafOutput> predict_leaves(const LeafEnsemble& ensemble,
                                              std::span<const double> x) {
  std::vector<LeafOutput> out;
  out.reserve(ensemble.leaves.size());
  for (const auto& leaf : ensemble.leaves) {
    auto trace = forward(leaf.model, x);
    out.push_back({trace.prediction, std::move(trace.last_hidden)});
  }
  return out;
}

// Median of an even count is the mean of the two middle values.
inline double aggregate_simple(std::span<const double> predictions,
                               AggregationMethod method) {
  if (predictions.empty()) throw InvalidArgumentError("aggregate of no predictions");
  switch (method) {
    case AggregationMethod::kMean: {
      // summed in sorted order; clamped against rounding past the extremes
      std::vector<double> v(predictions.begin(), predictions.end());
      std::sort(v.begin(), v.end());
      double s = 0.0;
      for (double p : v) s += p;
      return std::clamp(s / static_cast<double>(v.size()), v.front(), v.back());
    }
    case AggregationMethod::kMedian: {
      std::vector<double> v(predictions.begin(), predictions.end());
      std::sort(v.begin(), v.end());
      const std::size_t n = v.size();
      return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
    }
    case AggregationMethod::kMax:
      return *std::max_element(predictions.begin(), predictions.end());
    case AggregationMethod::kNn:
      break;
  }
  throw InvalidArgumentError("nn is not a simple aggregation");
}

// [pred_1, hidden_1..., pred_2, hidden_2..., ...] in leaf order. The first
// `uniform` entries must share a hidden width; a trailing private-leaf entry
// may differ.
inline std::vector<double> build_overarch_input(
    std::span<const LeafOutput> outputs,
    std::size_t uniform = std::numeric_limits<std::size_t>::max()) {
  std::vector<double> x;
  if (outputs.empty()) return x;
  x.reserve(outputs.size() * (1 + outputs.front().last_hidden.size()));
  const std::size_t h = outputs.front().last_hidden.size();
  for (std::size_t i = 0; i < outputs.size(); ++i) {
    const auto& o = outputs[i];
    if (i < uniform && o.last_hidden.size() != h) throw ShapeError("leaf hidden widths differ");
    x.push_back(o.prediction);
    x.insert(x.end(), o.last_hidden.begin(), o.last_hidden.end());
  }
  return x;
}

// Public features for the leaves; private features (may be empty) for the
// private leaf.
struct EnsembleSample {
  std::vector<double> public_x;
  std::vector<double> private_x;
  double label = 0.0;
};

namespace detail {

inline std::vector<LeafOutput> all_outputs(const LeafEnsemble& ensemble,
                                           std::span<const double> public_x,
                                           std::span<const double> private_x) {
  auto outputs = predict_leaves(ensemble, public_x);
  if (ensemble.private_leaf) {
    auto trace = forward(*ensemble.private_leaf, private_x);
    outputs.push_back({trace.prediction, std::move(trace.last_hidden)});
  }
  return outputs;
}

}  // namespace detail

struct OverarchConfig {
  int decay_k = 2;
  std::size_t epochs = 10;
  std::size_t batch_size = 32;
  double learning_rate = 0.1;
  std::size_t max_hidden_layers = 3;
};

// Trains the over-arch centrally on opt-in examples pushed through the
// frozen leaves. The ensemble's leaves are only read.
inline MlpModel train_overarch(const LeafEnsemble& ensemble,
                               std::span<const EnsembleSample> optin,
                               const OverarchConfig& cfg, std::uint64_t seed) {
  if (optin.empty()) throw InvalidArgumentError("over-arch training needs opt-in examples");
  if (cfg.batch_size == 0) throw InvalidConfigError("batch_size must be positive");
  std::vector<Sample> inputs;
  inputs.reserve(optin.size());
  for (const auto& ex : optin) {
    const auto outputs = detail::all_outputs(ensemble, ex.public_x, ex.private_x);
    inputs.push_back({build_overarch_input(outputs, ensemble.leaves.size()), ex.label});
  }
  const std::size_t width = ensemble.overarch_input_width();
  // Train on standardized columns; the transform is folded into the first
  // layer afterwards so the result consumes raw leaf outputs.
  std::vector<double> mu(width, 0.0), sd(width, 0.0);
  for (const auto& s : inputs) {
    for (std::size_t j = 0; j < width; ++j) mu[j] += s.x[j];
  }
  for (double& m : mu) m /= static_cast<double>(inputs.size());
  for (const auto& s : inputs) {
    for (std::size_t j = 0; j < width; ++j) sd[j] += (s.x[j] - mu[j]) * (s.x[j] - mu[j]);
  }
  for (double& v : sd) {
    v = std::sqrt(v / static_cast<double>(inputs.size()));
    if (v < 1e-8) v = 1.0;
  }
  for (auto& s : inputs) {
    for (std::size_t j = 0; j < width; ++j) s.x[j] = (s.x[j] - mu[j]) / sd[j];
  }
  MlpModel model = build_mlp(width, cfg.decay_k, derive_seed(seed, "overarch-init"),
                             cfg.max_hidden_layers);
  auto state = OptimizerState::sgd(cfg.learning_rate);
  Rng rng(derive_seed(seed, "overarch-order"));
  std::vector<std::size_t> order(inputs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<double> grad(model.parameter_count());
  Backprop bp(model);
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      const double scale = 1.0 / static_cast<double>(end - start);
      std::fill(grad.begin(), grad.end(), 0.0);
      for (std::size_t i = start; i < end; ++i) {
        bp.accumulate(inputs[order[i]].x, inputs[order[i]].label, grad, scale);
      }
      apply_step(model, grad, state);
    }
  }
  // W x' + b with x' = (x - mu) / sd  ==  (W / sd) x + (b - W (mu / sd)).
  auto w = model.weights(0);
  auto b = model.biases(0);
  for (std::size_t r = 0; r < b.size(); ++r) {
    for (std::size_t j = 0; j < width; ++j) {
      double& wij = w[r * width + j];
      wij /= sd[j];
      b[r] -= wij * mu[j];
    }
  }
  return model;
}

// With a private leaf, its output is appended after the public leaves before
// aggregation; this stands in for the on-device ensembling step.
inline double predict_fel(const LeafEnsemble& ensemble, AggregationMethod method,
                          std::span<const double> public_x,
                          std::span<const double> private_x = {}) {
  if (method == AggregationMethod::kNn && !ensemble.overarch) {
    throw InvalidConfigError("nn aggregation requires an over-arch model");
  }
  const auto outputs = detail::all_outputs(ensemble, public_x, private_x);
  if (method == AggregationMethod::kNn) {
    return forward(*ensemble.overarch, build_overarch_input(outputs, ensemble.leaves.size()))
        .prediction;
  }
  std::vector<double> preds;
  preds.reserve(outputs.size());
  for (const auto& o : outputs) preds.push_back(o.prediction);
  return aggregate_simple(preds, method);
}

// ---------------------------------------------------------------------------
// Directory persistence: leaf_<cluster_id>.felm per leaf, optional
// private.felm and overarch.felm, plus manifest.txt.

inline void save_ensemble(const std::filesystem::path& dir, const LeafEnsemble& ensemble,
                          AggregationMethod method) {
  ensemble.validate();
  std::filesystem::create_directories(dir);
  std::ofstream manifest(dir / "manifest.txt", std::ios::trunc);
  if (!manifest) throw IoError("cannot write manifest in " + dir.string());
  manifest << "format=fedens-ensemble\nversion=1\n";
  manifest << "aggregation=" << to_string(method) << '\n';
  manifest << "leaf_count=" << ensemble.leaves.size() << '\n';
  manifest << "leaf_order=";
  for (std::size_t i = 0; i < ensemble.leaves.size(); ++i) {
    manifest << (i ? "," : "") << ensemble.leaves[i].cluster_id;
  }
  manifest << '\n';
  manifest << "input_width=" << ensemble.public_width() << '\n';
  manifest << "last_hidden_width=" << ensemble.hidden_width() << '\n';
  manifest << "private_leaf=" << (ensemble.private_leaf ? 1 : 0) << '\n';
  if (ensemble.private_leaf) {
    manifest << "private_input_width=" << ensemble.private_leaf->input_dim() << '\n';
  }
  manifest << "overarch=" << (ensemble.overarch ? 1 : 0) << '\n';
  if (ensemble.overarch) {
    manifest << "overarch_input_width=" << ensemble.overarch->input_dim() << '\n';
  }
  for (const auto& leaf : ensemble.leaves) {
    save_checkpoint(leaf.model, dir / ("leaf_" + std::to_string(leaf.cluster_id) + ".felm"));
  }
  if (ensemble.private_leaf) save_checkpoint(*ensemble.private_leaf, dir / "private.felm");
  if (ensemble.overarch) save_checkpoint(*ensemble.overarch, dir / "overarch.felm");
}

struct LoadedEnsemble {
  LeafEnsemble ensemble;
  AggregationMethod method = AggregationMethod::kMean;
};

inline LoadedEnsemble load_ensemble(const std::filesystem::path& dir) {
  std::ifstream in(dir / "manifest.txt");
  if (!in) throw IoError("no manifest.txt in " + dir.string());
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  if (kv["format"] != "fedens-ensemble") throw IoError("not an ensemble manifest");
  LoadedEnsemble out;
  out.method = parse_aggregation(kv["aggregation"]);
  std::string order = kv["leaf_order"];
  std::size_t pos = 0;
  while (pos < order.size()) {
    const auto comma = order.find(',', pos);
    const auto token = order.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
    const std::size_t id = std::stoul(token);
    out.ensemble.leaves.push_back(
        {id, load_checkpoint(dir / ("leaf_" + std::to_string(id) + ".felm"))});
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  if (kv["private_leaf"] == "1") out.ensemble.private_leaf = load_checkpoint(dir / "private.felm");
  if (kv["overarch"] == "1") out.ensemble.overarch = load_checkpoint(dir / "overarch.felm");
  out.ensemble.validate();
  return out;
}

}  // namespace fedens
