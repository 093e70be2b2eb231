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

// Dense ReLU/sigmoid networks with hand-derived backpropagation.
//
// Parameter flattening order (shared by gradients, optimizers, federated
// deltas and checkpoints): layer-major; within a layer the weight matrix
// (out x in, row-major) comes first, then the bias vector.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fedens/error.hpp"
#include "fedens/seed.hpp"

namespace fedens {

// One labeled feature vector. Labels are 0.0 or 1.0.
struct Sample {
  std::vector<double> x;
  double label = 0.0;
};

class MlpModel {
 public:
  MlpModel() = default;

  // Zero-initialized model with the given layer widths.
  explicit MlpModel(std::vector<std::size_t> layer_dims)
      : dims_(std::move(layer_dims)) {
    if (dims_.size() < 2 || dims_.back() != 1) {
      throw InvalidConfigError(
          "layer_dims needs at least two entries and must end with 1");
    }
    for (std::size_t d : dims_) {
      if (d == 0) throw InvalidConfigError("layer widths must be positive");
    }
    offsets_.reserve(dims_.size());
    std::size_t offset = 0;
    for (std::size_t l = 0; l + 1 < dims_.size(); ++l) {
      offsets_.push_back(offset);
      offset += dims_[l + 1] * dims_[l] + dims_[l + 1];
    }
    offsets_.push_back(offset);
    params_.assign(offset, 0.0);
  }

  const std::vector<std::size_t>& layer_dims() const { return dims_; }
  std::size_t num_layers() const { return dims_.empty() ? 0 : dims_.size() - 1; }
  std::size_t input_dim() const { return dims_.front(); }
  // Width of the final hidden layer; the input width when there is none.
  std::size_t last_hidden_dim() const { return dims_[dims_.size() - 2]; }
  std::size_t parameter_count() const { return params_.size(); }

  std::span<double> weights(std::size_t layer) {
    return {params_.data() + offsets_[layer], dims_[layer + 1] * dims_[layer]};
  }
  std::span<const double> weights(std::size_t layer) const {
    return {params_.data() + offsets_[layer], dims_[layer + 1] * dims_[layer]};
  }
  std::span<double> biases(std::size_t layer) {
    return {params_.data() + offsets_[layer] + dims_[layer + 1] * dims_[layer],
            dims_[layer + 1]};
  }
  std::span<const double> biases(std::size_t layer) const {
    return {params_.data() + offsets_[layer] + dims_[layer + 1] * dims_[layer],
            dims_[layer + 1]};
  }
  double& weight(std::size_t layer, std::size_t row, std::size_t col) {
    return weights(layer)[row * dims_[layer] + col];
  }
  double weight(std::size_t layer, std::size_t row, std::size_t col) const {
    return weights(layer)[row * dims_[layer] + col];
  }

  std::span<double> parameters() { return params_; }
  std::span<const double> parameters() const { return params_; }

  bool operator==(const MlpModel& other) const {
    return dims_ == other.dims_ && params_ == other.params_;
  }

 private:
  std::vector<std::size_t> dims_;
  std::vector<std::size_t> offsets_;
  std::vector<double> params_;
};

struct ForwardTrace {
  // activations[0] is the input; activations[l] is the post-activation output
  // of layer l (ReLU for hidden layers, sigmoid for the output).
  std::vector<std::vector<double>> activations;
  std::vector<double> last_hidden;
  double logit = 0.0;
  double prediction = 0.5;
};

enum class OptimizerKind { kSgd, kAdagrad };

struct OptimizerState {
  OptimizerKind kind = OptimizerKind::kSgd;
  double learning_rate = 0.01;
  std::vector<double> accumulators;  // adagrad only

  static OptimizerState sgd(double lr) { return {OptimizerKind::kSgd, lr, {}}; }
  static OptimizerState adagrad(double lr, std::size_t n) {
    return {OptimizerKind::kAdagrad, lr, std::vector<double>(n, 0.0)};
  }
};

inline constexpr double kAdagradEpsilon = 1e-10;
inline constexpr double kLossClamp = 1e-12;

inline double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// Widths of a network whose hidden layers shrink geometrically by decay_k:
// input_dim/K, input_dim/K^2, ... (integer division), stopping at the first
// width <= 1 or after max_hidden_layers, followed by the output width 1.
inline std::vector<std::size_t> decayed_layer_dims(
    std::size_t input_dim, int decay_k, std::size_t max_hidden_layers = 3) {
  if (input_dim < 1) throw InvalidConfigError("input_dim must be >= 1");
  if (decay_k < 2) throw InvalidConfigError("decay_k must be >= 2");
  std::vector<std::size_t> dims{input_dim};
  std::size_t width = input_dim;
  for (std::size_t h = 0; h < max_hidden_layers; ++h) {
    width /= static_cast<std::size_t>(decay_k);
    if (width <= 1) break;
    dims.push_back(width);
  }
  dims.push_back(1);
  return dims;
}

// Glorot-uniform weights from the seeded generator, zero biases.
inline MlpModel init_glorot(std::vector<std::size_t> dims,
                            std::uint64_t init_seed) {
  MlpModel model(std::move(dims));
  Rng rng(init_seed);
  const auto& d = model.layer_dims();
  for (std::size_t l = 0; l < model.num_layers(); ++l) {
    const double limit =
        std::sqrt(6.0 / static_cast<double>(d[l] + d[l + 1]));
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (double& w : model.weights(l)) w = dist(rng);
  }
  return model;
}

inline MlpModel build_mlp(std::size_t input_dim, int decay_k,
                          std::uint64_t init_seed,
                          std::size_t max_hidden_layers = 3) {
  return init_glorot(decayed_layer_dims(input_dim, decay_k, max_hidden_layers),
                     init_seed);
}

namespace detail {

inline void check_input(const MlpModel& model, std::span<const double> x) {
  if (x.size() != model.input_dim()) {
    throw ShapeError("input width " + std::to_string(x.size()) +
                     " does not match model input " +
                     std::to_string(model.input_dim()));
  }
  for (double v : x) {
    if (!std::isfinite(v)) throw NumericError("non-finite input feature");
  }
}

// Affine map out = W in + b for one layer.
inline void affine(const MlpModel& model, std::size_t layer,
                   std::span<const double> in, std::span<double> out) {
  const auto w = model.weights(layer);
  const auto b = model.biases(layer);
  const std::size_t cols = in.size();
  for (std::size_t r = 0; r < out.size(); ++r) {
    double acc = b[r];
    const double* row = w.data() + r * cols;
    for (std::size_t c = 0; c < cols; ++c) acc += row[c] * in[c];
    out[r] = acc;
  }
}

}  // namespace detail

inline ForwardTrace forward(const MlpModel& model, std::span<const double> x) {
  detail::check_input(model, x);
  const auto& d = model.layer_dims();
  const std::size_t layers = model.num_layers();
  ForwardTrace trace;
  trace.activations.resize(layers + 1);
  trace.activations[0].assign(x.begin(), x.end());
  for (std::size_t l = 0; l < layers; ++l) {
    auto& out = trace.activations[l + 1];
    out.resize(d[l + 1]);
    detail::affine(model, l, trace.activations[l], out);
    if (l + 1 < layers) {
      for (double& v : out) v = std::max(v, 0.0);
    } else {
      trace.logit = out[0];
      out[0] = sigmoid(out[0]);
    }
  }
  trace.last_hidden = trace.activations[layers - 1];
  trace.prediction = trace.activations[layers][0];
  return trace;
}

inline double predict(const MlpModel& model, std::span<const double> x) {
  return forward(model, x).prediction;
}

inline double bce_loss(double prediction, double label) {
  const double p = std::clamp(prediction, kLossClamp, 1.0 - kLossClamp);
  return -(label * std::log(p) + (1.0 - label) * std::log(1.0 - p));
}

// Reusable buffers for repeated backpropagation over one architecture.
class Backprop {
 public:
  explicit Backprop(const MlpModel& model) : model_(&model) {
    const auto& d = model.layer_dims();
    acts_.resize(d.size());
    deltas_.resize(d.size());
    for (std::size_t l = 0; l < d.size(); ++l) {
      acts_[l].resize(d[l]);
      deltas_[l].resize(d[l]);
    }
  }

  // Adds scale * d(loss)/d(params) for one example into grad and returns the
  // example's loss. When input_grad is nonempty it receives
  // scale * d(loss)/d(x).
  double accumulate(std::span<const double> x, double label,
                    std::span<double> grad, double scale,
                    std::span<double> input_grad = {}) {
    const MlpModel& model = *model_;
    detail::check_input(model, x);
    const auto& d = model.layer_dims();
    const std::size_t layers = model.num_layers();
    std::copy(x.begin(), x.end(), acts_[0].begin());
    for (std::size_t l = 0; l < layers; ++l) {
      detail::affine(model, l, acts_[l], acts_[l + 1]);
      if (l + 1 < layers) {
        for (double& v : acts_[l + 1]) v = std::max(v, 0.0);
      }
    }
    const double p = sigmoid(acts_[layers][0]);
    const double loss = bce_loss(p, label);

    // Sigmoid output with BCE: d(loss)/d(logit) = p - y.
    deltas_[layers][0] = (p - label) * scale;
    for (std::size_t l = layers; l-- > 0;) {
      const auto& in = acts_[l];
      const auto& delta = deltas_[l + 1];
      const std::size_t rows = d[l + 1];
      const std::size_t cols = d[l];
      // Offsets into the flat gradient mirror MlpModel's layout.
      const std::size_t w_off =
          static_cast<std::size_t>(model.weights(l).data() -
                                   model.parameters().data());
      double* gw = grad.data() + w_off;
      double* gb = gw + rows * cols;
      for (std::size_t r = 0; r < rows; ++r) {
        const double dr = delta[r];
        if (dr == 0.0) continue;
        double* grow = gw + r * cols;
        for (std::size_t c = 0; c < cols; ++c) grow[c] += dr * in[c];
        gb[r] += dr;
      }
      const bool want_input = l == 0 && !input_grad.empty();
      if (l == 0 && !want_input) break;
      auto& prev = deltas_[l];
      std::fill(prev.begin(), prev.end(), 0.0);
      const auto w = model.weights(l);
      for (std::size_t r = 0; r < rows; ++r) {
        const double dr = delta[r];
        if (dr == 0.0) continue;
        const double* row = w.data() + r * cols;
        for (std::size_t c = 0; c < cols; ++c) prev[c] += row[c] * dr;
      }
      if (want_input) {
        std::copy(prev.begin(), prev.end(), input_grad.begin());
      } else {
        for (std::size_t c = 0; c < cols; ++c) {
          if (in[c] <= 0.0) prev[c] = 0.0;
        }
      }
    }
    return loss;
  }

 private:
  const MlpModel* model_;
  std::vector<std::vector<double>> acts_;
  std::vector<std::vector<double>> deltas_;
};

struct LossAndGradient {
  double loss = 0.0;  // mean BCE over the batch
  std::vector<double> gradient;
};

inline LossAndGradient loss_and_gradient(const MlpModel& model,
                                         std::span<const Sample> batch) {
  if (batch.empty()) throw InvalidArgumentError("gradient of an empty batch");
  LossAndGradient out;
  out.gradient.assign(model.parameter_count(), 0.0);
  Backprop bp(model);
  const double scale = 1.0 / static_cast<double>(batch.size());
  double loss_sum = 0.0;
  for (const Sample& s : batch) {
    loss_sum += bp.accumulate(s.x, s.label, out.gradient, scale);
  }
  out.loss = loss_sum * scale;
  return out;
}

// Gradient of the mean BCE loss over the batch, in flattening order.
inline std::vector<double> gradient(const MlpModel& model,
                                    std::span<const Sample> batch) {
  return loss_and_gradient(model, batch).gradient;
}

inline void apply_update(std::span<double> params,
                         std::span<const double> grad, OptimizerState& state) {
  if (grad.size() != params.size()) {
    throw ShapeError("gradient length " + std::to_string(grad.size()) +
                     " does not match parameter count " +
                     std::to_string(params.size()));
  }
  const double lr = state.learning_rate;
  if (state.kind == OptimizerKind::kSgd) {
    for (std::size_t i = 0; i < params.size(); ++i) params[i] -= lr * grad[i];
    return;
  }
  if (state.accumulators.empty()) state.accumulators.assign(params.size(), 0.0);
  if (state.accumulators.size() != params.size()) {
    throw ShapeError("adagrad accumulator length mismatch");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grad[i];
    state.accumulators[i] += g * g;
    params[i] -= lr * g / (std::sqrt(state.accumulators[i]) + kAdagradEpsilon);
  }
}

inline void apply_step(MlpModel& model, std::span<const double> grad,
                       OptimizerState& state) {
  apply_update(model.parameters(), grad, state);
}

}  // namespace fedens
