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

// Synchronous federated averaging over simulated clients, with optional
// user-level DP (per-update clipping plus central Gaussian noise).

#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <ostream>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "fedens/error.hpp"
#include "fedens/nn.hpp"
#include "fedens/seed.hpp"

namespace fedens {

// A client's featurized training data.
struct FedClient {
  std::string user_id;
  std::vector<Sample> samples;
};

struct RoundConfig {
  std::size_t clients_per_round = 32;
  std::size_t local_epochs = 5;
  std::size_t batch_size = 32;
  double learning_rate = 0.579;
  std::size_t global_epochs = 1;
  // Weight every update 1.0 instead of by example count.
  bool uniform_weights = false;
  // Worker threads for local training; results do not depend on it.
  std::size_t threads = 1;

  void validate() const {
    if (clients_per_round == 0 || batch_size == 0 || global_epochs == 0) {
      throw InvalidConfigError("round config sizes must be positive");
    }
    if (!(learning_rate > 0.0)) throw InvalidConfigError("learning_rate must be positive");
  }
};

struct DpConfig {
  bool enabled = false;
  double clip_norm = 1.0;
  double noise_multiplier = 0.0;

  void validate() const {
    if (!enabled) return;
    if (!(clip_norm > 0.0)) throw InvalidConfigError("clip_norm must be positive");
    if (!(noise_multiplier >= 0.0) || !std::isfinite(noise_multiplier)) {
      throw InvalidConfigError("noise_multiplier must be finite and nonnegative");
    }
    if (std::isinf(clip_norm) && noise_multiplier > 0.0) {
      throw InvalidConfigError("an unbounded clip norm admits no finite noise scale");
    }
  }
};

struct ClientUpdate {
  std::string user_id;
  std::vector<double> delta;  // local minus global
  double weight = 1.0;
  double pre_clip_norm = 0.0;
  double mean_loss = 0.0;  // mean batch loss over the last local epoch
};

struct RoundRecord {
  std::size_t round = 0;
  std::size_t epoch = 0;
  std::size_t clients = 0;
  double mean_client_loss = 0.0;
  double aggregate_delta_norm = 0.0;
  double max_clipped_norm = 0.0;  // 0 without DP
};

inline void write_round_record(std::ostream& out, const RoundRecord& r) {
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "round=%zu epoch=%zu clients=%zu mean_loss=%.6f delta_norm=%.6e "
                "max_clipped_norm=%.6e\n",
                r.round, r.epoch, r.clients, r.mean_client_loss,
                r.aggregate_delta_norm, r.max_clipped_norm);
  out << buf;
}

struct ParticipationLog {
  std::vector<std::vector<std::string>> rounds;
  std::map<std::string, std::size_t> rounds_per_user;

  std::size_t max_participation() const {
    std::size_t m = 0;
    for (const auto& [_, n] : rounds_per_user) m = std::max(m, n);
    return m;
  }
};

inline double l2_norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

// Runs local_epochs passes of seeded-shuffled mini-batch SGD on a copy of the
// global model.
inline ClientUpdate local_train(const MlpModel& global, const FedClient& client,
                                const RoundConfig& cfg, std::uint64_t client_seed) {
  if (cfg.batch_size == 0) throw InvalidConfigError("batch_size must be positive");
  for (const auto& s : client.samples) {
    if (s.x.size() != global.input_dim()) {
      throw ShapeError("client " + client.user_id + " features have width " +
                       std::to_string(s.x.size()) + ", model expects " +
                       std::to_string(global.input_dim()));
    }
  }
  ClientUpdate update;
  update.user_id = client.user_id;
  update.weight = static_cast<double>(client.samples.size());
  MlpModel local = global;
  auto state = OptimizerState::sgd(cfg.learning_rate);
  Rng rng(client_seed);
  std::vector<std::size_t> order(client.samples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<double> grad(local.parameter_count());
  Backprop bp(local);
  for (std::size_t epoch = 0; epoch < cfg.local_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      const double scale = 1.0 / static_cast<double>(end - start);
      std::fill(grad.begin(), grad.end(), 0.0);
      double batch_loss = 0.0;
      for (std::size_t i = start; i < end; ++i) {
        const Sample& s = client.samples[order[i]];
        batch_loss += bp.accumulate(s.x, s.label, grad, scale);
      }
      apply_step(local, grad, state);
      loss_sum += batch_loss * scale;
      ++batches;
    }
    update.mean_loss = batches ? loss_sum / static_cast<double>(batches) : 0.0;
  }
  const auto g = global.parameters();
  const auto l = local.parameters();
  update.delta.resize(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) update.delta[i] = l[i] - g[i];
  update.pre_clip_norm = l2_norm(update.delta);
  return update;
}

inline ClientUpdate clip_update(ClientUpdate update, double clip_norm) {
  if (!(clip_norm > 0.0)) throw InvalidConfigError("clip_norm must be positive");
  update.pre_clip_norm = l2_norm(update.delta);
  if (update.pre_clip_norm > clip_norm) {
    const std::vector<double> raw = update.delta;
    double scale = clip_norm / update.pre_clip_norm;
    for (;;) {
      for (std::size_t i = 0; i < raw.size(); ++i) update.delta[i] = raw[i] * scale;
      if (l2_norm(update.delta) <= clip_norm) break;
      scale = std::nextafter(scale, 0.0);
    }
  }
  update.weight = 1.0;
  return update;
}

// Server-side reduction. Updates are summed in user_id order so the result
// does not depend on arrival order.
//   non-DP: sum(w_i * delta_i) / sum(w_i)
//   DP:     (sum(clip(delta_i)) + N(0, (sigma * C)^2 I)) / n
inline std::vector<double> aggregate(std::span<const ClientUpdate> updates,
                                     const DpConfig& dp, std::uint64_t round_seed) {
  if (updates.empty()) throw InvalidArgumentError("aggregate of no updates");
  dp.validate();
  const std::size_t len = updates.front().delta.size();
  for (const auto& u : updates) {
    if (u.delta.size() != len) throw ShapeError("client deltas differ in length");
  }
  std::vector<const ClientUpdate*> sorted;
  sorted.reserve(updates.size());
  for (const auto& u : updates) sorted.push_back(&u);
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const ClientUpdate* a, const ClientUpdate* b) {
                     return a->user_id < b->user_id;
                   });

  std::vector<double> sum(len, 0.0);
  double weight_sum = 0.0;
  for (const ClientUpdate* u : sorted) {
    if (dp.enabled) {
      const ClientUpdate clipped = clip_update(*u, dp.clip_norm);
      for (std::size_t i = 0; i < len; ++i) sum[i] += clipped.weight * clipped.delta[i];
      weight_sum += clipped.weight;
    } else {
      if (!(u->weight > 0.0)) throw InvalidArgumentError("update weight must be positive");
      for (std::size_t i = 0; i < len; ++i) sum[i] += u->weight * u->delta[i];
      weight_sum += u->weight;
    }
  }
  if (dp.enabled && dp.noise_multiplier > 0.0) {
    Rng rng(round_seed);
    std::normal_distribution<double> noise(0.0, dp.noise_multiplier * dp.clip_norm);
    for (double& s : sum) s += noise(rng);
  }
  for (double& s : sum) s /= weight_sum;
  return sum;
}

struct FlResult {
  MlpModel model;
  ParticipationLog participation;
  std::vector<RoundRecord> rounds;
};

using RoundObserver = std::function<void(const RoundRecord&)>;

namespace detail {

// Runs fn(i) for i in [0, n) on up to `threads` workers.
template <typename Fn>
void parallel_for(std::size_t n, std::size_t threads, Fn&& fn) {
  threads = std::max<std::size_t>(1, std::min(threads, n));
  if (threads == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(threads);
  std::vector<std::jthread> pool;
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&, t] {
      try {
        for (std::size_t i = next++; i < n; i = next++) fn(i);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  pool.clear();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace detail

// Each global epoch reshuffles the users once and consumes them in chunks of
// clients_per_round (the last chunk may be smaller), so with one global epoch
// every user participates exactly once.
inline FlResult train_fl(const std::vector<FedClient>& population, MlpModel initial,
                         const RoundConfig& cfg, const DpConfig& dp, std::uint64_t seed,
                         const RoundObserver& observer = {}) {
  if (population.empty()) throw InvalidArgumentError("train_fl on an empty population");
  cfg.validate();
  dp.validate();
  FlResult result;
  result.model = std::move(initial);
  std::vector<std::size_t> order(population.size());
  std::size_t round = 0;
  for (std::size_t epoch = 0; epoch < cfg.global_epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(derive_seed(seed, "fl-epoch", epoch));
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += cfg.clients_per_round, ++round) {
      const std::size_t end = std::min(order.size(), start + cfg.clients_per_round);
      std::vector<ClientUpdate> updates(end - start);
      const MlpModel& global = result.model;
      detail::parallel_for(updates.size(), cfg.threads, [&](std::size_t i) {
        const FedClient& client = population[order[start + i]];
        updates[i] = local_train(global, client, cfg,
                                 derive_seed(derive_seed(seed, "fl-client", round),
                                             "user", client.user_id));
        if (cfg.uniform_weights) updates[i].weight = 1.0;
      });

      RoundRecord record;
      record.round = round;
      record.epoch = epoch;
      record.clients = updates.size();
      std::vector<std::string> ids;
      for (const auto& u : updates) {
        record.mean_client_loss += u.mean_loss;
        ids.push_back(u.user_id);
        ++result.participation.rounds_per_user[u.user_id];
        if (dp.enabled) {
          record.max_clipped_norm = std::max(
              record.max_clipped_norm, l2_norm(clip_update(u, dp.clip_norm).delta));
        }
      }
      record.mean_client_loss /= static_cast<double>(updates.size());
      result.participation.rounds.push_back(std::move(ids));

      const auto delta = aggregate(updates, dp, derive_seed(seed, "fl-noise", round));
      record.aggregate_delta_norm = l2_norm(delta);
      auto params = result.model.parameters();
      for (std::size_t i = 0; i < params.size(); ++i) params[i] += delta[i];
      result.rounds.push_back(record);
      if (observer) observer(record);
    }
  }
  return result;
}

}  // namespace fedens
