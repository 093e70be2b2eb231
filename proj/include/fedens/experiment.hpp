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

// Baseline-FL versus federated-ensemble experiments.
//
// A seed's pipeline: build the population, split train/test, pick opt-in
// users, pretrain embeddings (sparse data only), train the FL baseline on the
// non-opt-in users, cluster those same users, train one leaf per cluster,
// fit the over-arch on opt-in users, then evaluate every variant on the
// held-out examples and account privacy.

#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "fedens/clustering.hpp"
#include "fedens/config.hpp"
#include "fedens/data.hpp"
#include "fedens/ensemble.hpp"
#include "fedens/error.hpp"
#include "fedens/fed.hpp"
#include "fedens/metrics.hpp"
#include "fedens/nn.hpp"
#include "fedens/privacy.hpp"
#include "fedens/seed.hpp"

namespace fedens {

// ---------------------------------------------------------------------------
// Data preparation

struct PreparedData {
  FeatureSchema schema;
  std::size_t private_dense = 0;
  std::size_t train_users = 0;  // opt-in plus rest
  Population optin;
  Population rest;
  std::vector<Example> test;
  EmbeddingTable table;  // frozen; zero slots for dense-only data
  std::map<std::string, std::size_t> segments;  // synthetic ground truth, else empty

  std::size_t public_width() const { return featurized_width(schema) - private_dense; }
};

inline Population load_population(const ExperimentConfig& cfg, std::uint64_t seed,
                                  std::map<std::string, std::size_t>* segments = nullptr) {
  if (cfg.source == DataSource::kSynthetic) {
    SyntheticSpec spec = cfg.synthetic;
    spec.seed = derive_seed(seed, "population");
    auto synth = generate_synthetic(spec);
    if (segments) *segments = std::move(synth.segments);
    return std::move(synth.users);
  }
  auto loaded = load_csv(cfg.csv_path, cfg.csv_schema);
  if (!cfg.user_attributes.empty()) load_user_attributes(cfg.user_attributes, loaded.users);
  return std::move(loaded.users);
}

inline PreparedData prepare_data(const ExperimentConfig& cfg, std::uint64_t seed) {
  PreparedData data;
  data.schema = cfg.schema();
  data.private_dense = cfg.private_dense;
  auto population = load_population(cfg, seed, &data.segments);
  auto split = split_train_test(population, cfg.split, cfg.test_fraction, derive_seed(seed, "split"));
  data.test = std::move(split.test);
  data.train_users = split.train.size();
  auto optin = select_optin(split.train, cfg.optin_fraction, derive_seed(seed, "optin"));
  data.optin = std::move(optin.optin);
  data.rest = std::move(optin.rest);
  if (data.rest.empty()) throw InvalidConfigError("no non-opt-in users left to train on");
  if (data.schema.num_slots() > 0) {
    PretrainConfig pc = cfg.pretrain;
    pc.seed = derive_seed(seed, "pretrain");
    data.table = pretrain_embeddings(data.optin, data.schema, pc);
  }
  return data;
}

struct SplitFeatures {
  std::vector<double> public_x;
  std::vector<double> private_x;
};

// The trailing private_dense dense columns go to the private view; the other
// dense columns and all embeddings form the public view.
inline SplitFeatures split_features(const Example& ex, const PreparedData& data) {
  SplitFeatures out;
  const auto full = featurize(ex, data.table);
  const std::size_t d = data.schema.dense_dim;
  const std::size_t p = data.private_dense;
  out.public_x.reserve(full.size() - p);
  out.public_x.insert(out.public_x.end(), full.begin(), full.begin() + static_cast<std::ptrdiff_t>(d - p));
  out.public_x.insert(out.public_x.end(), full.begin() + static_cast<std::ptrdiff_t>(d), full.end());
  out.private_x.assign(full.begin() + static_cast<std::ptrdiff_t>(d - p),
                       full.begin() + static_cast<std::ptrdiff_t>(d));
  return out;
}

enum class FeatureView { kPublic, kPrivate };

inline std::vector<FedClient> to_fed_clients(const Population& users, const PreparedData& data,
                                             FeatureView view) {
  std::vector<FedClient> out;
  out.reserve(users.size());
  for (const auto& u : users) {
    FedClient c{u.user_id, {}};
    c.samples.reserve(u.examples.size());
    for (const auto& ex : u.examples) {
      auto f = split_features(ex, data);
      c.samples.push_back({view == FeatureView::kPublic ? std::move(f.public_x) : std::move(f.private_x),
                           static_cast<double>(ex.label)});
    }
    out.push_back(std::move(c));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Training

// Baseline and leaf c share the seed stream of index c, so a one-cluster
// ensemble reproduces the baseline exactly.
inline std::uint64_t fl_init_seed(std::uint64_t seed, std::size_t index) {
  return derive_seed(seed, "fl-init", index);
}
inline std::uint64_t fl_train_seed(std::uint64_t seed, std::size_t index) {
  return derive_seed(seed, "fl", index);
}

inline MlpModel initial_model(std::size_t width, const ExperimentConfig& cfg, std::uint64_t init_seed) {
  return build_mlp(width, cfg.decay_k, init_seed, cfg.max_hidden_layers);
}

inline FlResult train_baseline(const ExperimentConfig& cfg, const PreparedData& data,
                               std::uint64_t seed, const RoundObserver& observer = {}) {
  const auto clients = to_fed_clients(data.rest, data, FeatureView::kPublic);
  return train_fl(clients, initial_model(data.public_width(), cfg, fl_init_seed(seed, 0)),
                  cfg.rounds, cfg.dp, fl_train_seed(seed, 0), observer);
}

inline ClusterAssignment cluster_users(const ExperimentConfig& cfg, const Population& users,
                                       std::uint64_t seed) {
  switch (cfg.cluster.kind) {
    case ClusterMethodKind::kFeature:
      return cluster_by_feature(users, cfg.cluster.feature, cfg.cluster.edges);
    case ClusterMethodKind::kKMeans: {
      const auto extractor = cfg.cluster.attributes == "mean_dense"
                                 ? mean_dense_extractor()
                                 : static_prefix_extractor(cfg.cluster.attributes);
      return kmeans(users, extractor, cfg.cluster.k, cfg.cluster.max_iter,
                    derive_seed(seed, "kmeans")).assignment;
    }
    case ClusterMethodKind::kHash:
      return random_hash(users, cfg.cluster.k, derive_seed(seed, "hash"));
  }
  throw InvalidConfigError("unknown clustering method");
}

inline bool wants_overarch(const ExperimentConfig& cfg) {
  for (auto m : cfg.methods) {
    if (m == AggregationMethod::kNn) return true;
  }
  return cfg.serve_method == AggregationMethod::kNn;
}

struct FelTraining {
  LeafEnsemble ensemble;
  ClusterAssignment assignment;
  std::vector<std::size_t> empty_clusters;
  // Largest number of rounds any user joined, per trained leaf (cluster order).
  std::map<std::size_t, std::size_t> leaf_participation;
  std::size_t private_participation = 0;
};

// Observer receives the cluster id (or npos for the private leaf).
using LeafRoundObserver = std::function<void(std::size_t, const RoundRecord&)>;
inline constexpr std::size_t kPrivateLeafId = static_cast<std::size_t>(-1);

inline std::vector<EnsembleSample> ensemble_samples(const Population& users, const PreparedData& data) {
  std::vector<EnsembleSample> out;
  for (const auto& u : users) {
    for (const auto& ex : u.examples) {
      auto f = split_features(ex, data);
      out.push_back({std::move(f.public_x), std::move(f.private_x), static_cast<double>(ex.label)});
    }
  }
  return out;
}

inline FelTraining train_fel(const ExperimentConfig& cfg, const PreparedData& data,
                             std::uint64_t seed, const LeafRoundObserver& observer = {}) {
  FelTraining out;
  out.assignment = cluster_users(cfg, data.rest, seed);
  out.empty_clusters = out.assignment.empty_clusters();
  const auto parts = out.assignment.partition(data.rest);
  for (std::size_t c = 0; c < parts.size(); ++c) {
    if (parts[c].empty()) continue;
    const auto clients = to_fed_clients(parts[c], data, FeatureView::kPublic);
    RoundObserver obs;
    if (observer) obs = [&, c](const RoundRecord& r) { observer(c, r); };
    auto fl = train_fl(clients, initial_model(data.public_width(), cfg, fl_init_seed(seed, c)),
                       cfg.rounds, cfg.dp, fl_train_seed(seed, c), obs);
    out.leaf_participation[c] = fl.participation.max_participation();
    out.ensemble.leaves.push_back({c, std::move(fl.model)});
  }
  if (data.private_dense > 0) {
    const auto clients = to_fed_clients(data.rest, data, FeatureView::kPrivate);
    RoundObserver obs;
    if (observer) obs = [&](const RoundRecord& r) { observer(kPrivateLeafId, r); };
    auto fl = train_fl(clients,
                       initial_model(data.private_dense, cfg, derive_seed(seed, "fl-private-init")),
                       cfg.rounds, cfg.dp, derive_seed(seed, "fl-private"), obs);
    out.private_participation = fl.participation.max_participation();
    out.ensemble.private_leaf = std::move(fl.model);
  }
  if (wants_overarch(cfg)) {
    const auto samples = ensemble_samples(data.optin, data);
    if (samples.empty()) throw InvalidConfigError("nn aggregation needs opt-in examples");
    out.ensemble.overarch = train_overarch(out.ensemble, samples, cfg.overarch,
                                           derive_seed(seed, "overarch"));
  }
  out.ensemble.validate();
  return out;
}

// ---------------------------------------------------------------------------
// Evaluation

inline Metrics evaluate_model(const MlpModel& model, const PreparedData& data) {
  std::vector<ScoredLabel> scores;
  scores.reserve(data.test.size());
  for (const auto& ex : data.test) {
    scores.push_back({predict(model, split_features(ex, data).public_x), ex.label});
  }
  return compute_metrics(scores);
}

// One pass over the test set; leaf outputs are shared across methods.
inline std::vector<Metrics> evaluate_ensemble(const LeafEnsemble& ensemble,
                                              std::span<const AggregationMethod> methods,
                                              const PreparedData& data) {
  std::vector<std::vector<ScoredLabel>> scores(methods.size());
  std::vector<double> preds;
  for (const auto& ex : data.test) {
    const auto f = split_features(ex, data);
    const auto outputs = detail::all_outputs(ensemble, f.public_x, f.private_x);
    preds.clear();
    for (const auto& o : outputs) preds.push_back(o.prediction);
    for (std::size_t m = 0; m < methods.size(); ++m) {
      double p = 0.0;
      if (methods[m] == AggregationMethod::kNn) {
        if (!ensemble.overarch) throw InvalidConfigError("nn aggregation requires an over-arch model");
        p = forward(*ensemble.overarch, build_overarch_input(outputs, ensemble.leaves.size())).prediction;
      } else {
        p = aggregate_simple(preds, methods[m]);
      }
      scores[m].push_back({p, ex.label});
    }
  }
  std::vector<Metrics> out;
  for (const auto& s : scores) out.push_back(compute_metrics(s));
  return out;
}

// ---------------------------------------------------------------------------
// Privacy

inline double resolve_delta(const ExperimentConfig& cfg, std::size_t users) {
  if (cfg.dp_delta > 0.0) return cfg.dp_delta;
  return 1.0 / (10.0 * static_cast<double>(std::max<std::size_t>(users, 1)));
}

// A user joining m rounds of a Gaussian mechanism pays m times its curve.
inline RdpCurve participation_curve(double noise_multiplier, std::size_t participations) {
  RdpCurve c = gaussian_curve(noise_multiplier);
  for (double& e : c.epsilons) e *= static_cast<double>(participations);
  return c;
}

struct PrivacySummary {
  bool bounded = false;  // false without DP or with zero noise
  double delta = 0.0;
  DpBudgetReport baseline;
  DpBudgetReport fel;
  RdpCurve baseline_curve;
  RdpCurve fel_curve;
};

inline DpBudgetReport unbounded_budget(double delta) {
  return {std::numeric_limits<double>::infinity(), delta, 0.0};
}

inline PrivacySummary account_privacy(const ExperimentConfig& cfg, std::size_t train_users,
                                      std::size_t baseline_participation,
                                      const FelTraining& fel) {
  PrivacySummary s;
  s.delta = resolve_delta(cfg, train_users);
  s.bounded = cfg.dp.enabled && cfg.dp.noise_multiplier > 0.0;
  if (!s.bounded) {
    s.baseline = unbounded_budget(s.delta);
    s.fel = unbounded_budget(s.delta);
    return s;
  }
  const double sigma = cfg.dp.noise_multiplier;
  s.baseline_curve = participation_curve(sigma, baseline_participation);
  s.baseline = rdp_to_dp(s.baseline_curve, s.delta);
  PrivacyLedger ledger;
  for (const auto& [c, m] : fel.leaf_participation) ledger.leaf_costs[c] = participation_curve(sigma, m);
  ledger.agg_regime = AggRegime::kOptin;  // over-arch sees opt-in data only
  s.fel_curve = total_cost(ledger);
  if (fel.ensemble.private_leaf) {
    const RdpCurve parts[] = {s.fel_curve, participation_curve(sigma, fel.private_participation)};
    s.fel_curve = compose_sequential(parts);
  }
  s.fel = rdp_to_dp(s.fel_curve, s.delta);
  return s;
}

// ---------------------------------------------------------------------------
// Experiment reports

struct VariantResult {
  std::string name;  // "baseline" or "fel_<method>"
  Metrics metrics;
};

struct StageTiming {
  std::string stage;
  double seconds = 0.0;
};

struct SeedResult {
  std::uint64_t seed = 0;
  std::vector<VariantResult> variants;  // baseline first
  std::vector<std::size_t> cluster_sizes;
  std::vector<std::size_t> empty_clusters;
  PrivacySummary privacy;
  std::vector<StageTiming> timings;
};

struct VariantSummary {
  std::string name;
  Metrics mean;
  Metrics stddev;  // sample standard deviation; zero for one seed
};

struct ExperimentReport {
  std::string name;
  std::vector<SeedResult> seeds;
  std::vector<VariantSummary> summary;

  const VariantSummary& variant(const std::string& name) const {
    for (const auto& v : summary) {
      if (v.name == name) return v;
    }
    throw InvalidArgumentError("report has no variant '" + name + "'");
  }
};

inline std::string variant_name(AggregationMethod m) { return "fel_" + to_string(m); }

inline std::vector<VariantSummary> summarize(const std::vector<SeedResult>& seeds) {
  std::vector<VariantSummary> out;
  if (seeds.empty()) return out;
  const double n = static_cast<double>(seeds.size());
  for (std::size_t v = 0; v < seeds.front().variants.size(); ++v) {
    VariantSummary s;
    s.name = seeds.front().variants[v].name;
    auto field = [&](auto member) {
      double mean = 0.0;
      for (const auto& r : seeds) mean += r.variants[v].metrics.*member;
      mean /= n;
      double ss = 0.0;
      for (const auto& r : seeds) {
        const double d = r.variants[v].metrics.*member - mean;
        ss += d * d;
      }
      s.mean.*member = mean;
      s.stddev.*member = seeds.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
    };
    field(&Metrics::auc);
    field(&Metrics::accuracy);
    field(&Metrics::logloss);
    field(&Metrics::ne);
    out.push_back(s);
  }
  return out;
}

using Clock = std::chrono::steady_clock;

inline double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

inline SeedResult run_seed(const ExperimentConfig& cfg, std::uint64_t seed,
                           std::ostream* log = nullptr) {
  SeedResult r;
  r.seed = seed;
  auto t0 = Clock::now();
  const auto data = prepare_data(cfg, seed);
  r.timings.push_back({"prepare", seconds_since(t0)});

  t0 = Clock::now();
  const auto baseline = train_baseline(cfg, data, seed);
  r.timings.push_back({"baseline", seconds_since(t0)});

  t0 = Clock::now();
  const auto fel = train_fel(cfg, data, seed);
  r.timings.push_back({"fel", seconds_since(t0)});
  r.cluster_sizes = fel.assignment.sizes();
  r.empty_clusters = fel.empty_clusters;

  t0 = Clock::now();
  r.variants.push_back({"baseline", evaluate_model(baseline.model, data)});
  const auto ms = evaluate_ensemble(fel.ensemble, cfg.methods, data);
  for (std::size_t i = 0; i < cfg.methods.size(); ++i) {
    r.variants.push_back({variant_name(cfg.methods[i]), ms[i]});
  }
  r.timings.push_back({"evaluate", seconds_since(t0)});

  r.privacy = account_privacy(cfg, data.train_users, baseline.participation.max_participation(), fel);
  if (log) {
    *log << "seed " << seed << ":";
    for (const auto& v : r.variants) {
      *log << ' ' << v.name << "=" << std::fixed << std::setprecision(4) << v.metrics.auc;
    }
    *log << std::defaultfloat << '\n';
  }
  return r;
}

inline ExperimentReport run_experiment(const ExperimentConfig& cfg, std::ostream* log = nullptr) {
  cfg.validate();
  ExperimentReport report;
  report.name = cfg.name;
  for (auto seed : cfg.seeds) {
    try {
      report.seeds.push_back(run_seed(cfg, seed, log));
    } catch (const Error& e) {
      throw Error("seed " + std::to_string(seed) + " failed: " + e.what());
    }
  }
  report.summary = summarize(report.seeds);
  return report;
}

// ---------------------------------------------------------------------------
// Formatting

// (fel - base) / base, in percent.
inline double lift_percent(double fel, double base) {
  if (base == 0.0) throw InvalidArgumentError("lift relative to a zero baseline");
  return (fel - base) / base * 100.0;
}

// Signed with two decimals; a lift that rounds to zero prints as 0.00%.
inline std::string format_lift(double fel, double base) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%+.2f", lift_percent(fel, base));
  std::string s = buf;
  if (s == "+0.00" || s == "-0.00") s = "0.00";
  return s + "%";
}

namespace detail {

inline std::string fmt(double v, int prec = 4) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.*f", prec, v);
  return buf;
}

// Left-aligned first column, right-aligned others.
inline std::string render_table(const std::vector<std::vector<std::string>>& rows) {
  if (rows.empty()) return {};
  std::vector<std::size_t> width(rows.front().size(), 0);
  for (const auto& r : rows) {
    for (std::size_t i = 0; i < r.size(); ++i) width[i] = std::max(width[i], r[i].size());
  }
  std::ostringstream out;
  for (const auto& r : rows) {
    for (std::size_t i = 0; i < r.size(); ++i) {
      if (i == 0) {
        out << std::left << std::setw(static_cast<int>(width[i])) << r[i];
      } else {
        out << "  " << std::right << std::setw(static_cast<int>(width[i])) << r[i];
      }
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace detail

// Baseline first, then one row per ensemble variant with lifts against the
// baseline. The variant with the best mean AUC is flagged with '*'.
// NE lifts are relative changes too; lower NE is better.
inline std::string compare(const ExperimentReport& report) {
  if (report.summary.empty() || report.summary.front().name != "baseline") {
    throw InvalidArgumentError("report lacks a baseline row");
  }
  if (report.summary.size() < 2) throw InvalidArgumentError("report lacks ensemble variants");
  const auto& base = report.summary.front().mean;
  std::size_t best = 1;
  for (std::size_t i = 2; i < report.summary.size(); ++i) {
    if (report.summary[i].mean.auc > report.summary[best].mean.auc) best = i;
  }
  std::vector<std::vector<std::string>> rows;
  rows.push_back({"variant", "auc", "auc_lift", "accuracy", "acc_lift", "ne", "ne_lift", "logloss", "best"});
  rows.push_back({"baseline", detail::fmt(base.auc), "-", detail::fmt(base.accuracy), "-",
                  detail::fmt(base.ne), "-", detail::fmt(base.logloss), ""});
  for (std::size_t i = 1; i < report.summary.size(); ++i) {
    const auto& m = report.summary[i].mean;
    rows.push_back({report.summary[i].name, detail::fmt(m.auc), format_lift(m.auc, base.auc),
                    detail::fmt(m.accuracy), format_lift(m.accuracy, base.accuracy),
                    detail::fmt(m.ne), format_lift(m.ne, base.ne), detail::fmt(m.logloss),
                    i == best ? "*" : ""});
  }
  return detail::render_table(rows);
}

inline std::string format_report(const ExperimentReport& report) {
  std::ostringstream out;
  out << "experiment: " << report.name << '\n';
  out << "seeds:";
  for (const auto& s : report.seeds) out << ' ' << s.seed;
  out << "\n\nmean over seeds\n" << compare(report);

  out << "\nstandard deviation over seeds\n";
  std::vector<std::vector<std::string>> sd{{"variant", "auc", "accuracy", "ne", "logloss"}};
  for (const auto& v : report.summary) {
    sd.push_back({v.name, detail::fmt(v.stddev.auc), detail::fmt(v.stddev.accuracy),
                  detail::fmt(v.stddev.ne), detail::fmt(v.stddev.logloss)});
  }
  out << detail::render_table(sd);

  out << "\nper-seed auc\n";
  std::vector<std::vector<std::string>> ps{{"seed"}};
  for (const auto& v : report.summary) ps.front().push_back(v.name);
  ps.front().push_back("clusters");
  for (const auto& s : report.seeds) {
    std::vector<std::string> row{std::to_string(s.seed)};
    for (const auto& v : s.variants) row.push_back(detail::fmt(v.metrics.auc));
    std::string sizes;
    for (std::size_t i = 0; i < s.cluster_sizes.size(); ++i) {
      sizes += (i ? "/" : "") + std::to_string(s.cluster_sizes[i]);
    }
    row.push_back(sizes);
    ps.push_back(row);
  }
  out << detail::render_table(ps);

  out << "\nprivacy\n";
  std::vector<std::vector<std::string>> pr{{"seed", "baseline_eps", "fel_eps", "delta", "baseline_order", "fel_order"}};
  for (const auto& s : report.seeds) {
    char delta[32];
    std::snprintf(delta, sizeof(delta), "%.3e", s.privacy.delta);
    pr.push_back({std::to_string(s.seed), detail::fmt(s.privacy.baseline.epsilon),
                  detail::fmt(s.privacy.fel.epsilon), delta,
                  detail::fmt(s.privacy.baseline.optimal_order, 2),
                  detail::fmt(s.privacy.fel.optimal_order, 2)});
  }
  out << detail::render_table(pr);
  return out.str();
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc | std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
}

// report.txt, metrics.csv, summary.csv and privacy.csv are deterministic;
// wall-clock numbers go to timings.csv only.
inline void write_report_files(const std::filesystem::path& dir, const ExperimentReport& report) {
  std::filesystem::create_directories(dir);
  write_text(dir / "report.txt", format_report(report));
  char buf[256];
  {
    std::ostringstream out;
    out << "seed,variant,auc,accuracy,logloss,ne\n";
    for (const auto& s : report.seeds) {
      for (const auto& v : s.variants) {
        std::snprintf(buf, sizeof(buf), "%llu,%s,%.17g,%.17g,%.17g,%.17g\n",
                      static_cast<unsigned long long>(s.seed), v.name.c_str(), v.metrics.auc,
                      v.metrics.accuracy, v.metrics.logloss, v.metrics.ne);
        out << buf;
      }
    }
    write_text(dir / "metrics.csv", out.str());
  }
  {
    std::ostringstream out;
    out << "variant,auc_mean,auc_std,accuracy_mean,accuracy_std,logloss_mean,logloss_std,ne_mean,ne_std,"
           "auc_lift_pct,accuracy_lift_pct\n";
    const auto& base = report.summary.front().mean;
    for (const auto& v : report.summary) {
      std::snprintf(buf, sizeof(buf), "%s,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.6f,%.6f\n",
                    v.name.c_str(), v.mean.auc, v.stddev.auc, v.mean.accuracy, v.stddev.accuracy,
                    v.mean.logloss, v.stddev.logloss, v.mean.ne, v.stddev.ne,
                    lift_percent(v.mean.auc, base.auc), lift_percent(v.mean.accuracy, base.accuracy));
      out << buf;
    }
    write_text(dir / "summary.csv", out.str());
  }
  {
    std::ostringstream out;
    out << "seed,model,epsilon,delta,optimal_order\n";
    for (const auto& s : report.seeds) {
      for (const auto& [name, b] : {std::pair{"baseline", s.privacy.baseline}, std::pair{"fel", s.privacy.fel}}) {
        std::snprintf(buf, sizeof(buf), "%llu,%s,%.17g,%.17g,%g\n",
                      static_cast<unsigned long long>(s.seed), name, b.epsilon, b.delta, b.optimal_order);
        out << buf;
      }
    }
    write_text(dir / "privacy.csv", out.str());
  }
  {
    std::ostringstream out;
    out << "seed,stage,seconds\n";
    for (const auto& s : report.seeds) {
      for (const auto& t : s.timings) {
        std::snprintf(buf, sizeof(buf), "%llu,%s,%.3f\n",
                      static_cast<unsigned long long>(s.seed), t.stage.c_str(), t.seconds);
        out << buf;
      }
    }
    write_text(dir / "timings.csv", out.str());
  }
}

// ---------------------------------------------------------------------------
// Sweeps

enum class SweepKind { kClusters, kNoise, kClusterMethods };

inline std::string to_string(SweepKind k) {
  switch (k) {
    case SweepKind::kClusters: return "clusters";
    case SweepKind::kNoise: return "noise_multiplier";
    case SweepKind::kClusterMethods: return "cluster_method";
  }
  return "?";
}

inline SweepKind parse_sweep_kind(const std::string& s) {
  if (s == "clusters") return SweepKind::kClusters;
  if (s == "noise" || s == "sigma" || s == "noise_multiplier") return SweepKind::kNoise;
  if (s == "methods" || s == "cluster_methods") return SweepKind::kClusterMethods;
  throw InvalidConfigError("unknown sweep '" + s + "' (expected clusters, noise or methods)");
}

struct SweepPoint {
  std::string value;
  ExperimentReport report;
};

struct SweepReport {
  SweepKind kind = SweepKind::kClusters;
  std::vector<SweepPoint> points;
};

inline SweepReport run_sweep(const ExperimentConfig& base, SweepKind kind,
                             std::ostream* log = nullptr) {
  SweepReport sweep;
  sweep.kind = kind;
  auto run_point = [&](ExperimentConfig cfg, std::string value) {
    if (log) *log << to_string(kind) << "=" << value << '\n';
    sweep.points.push_back({std::move(value), run_experiment(cfg, log)});
  };
  switch (kind) {
    case SweepKind::kClusters: {
      if (base.cluster.kind == ClusterMethodKind::kFeature) {
        throw InvalidConfigError("cluster-count sweeps need kmeans or hash clustering");
      }
      if (base.sweep_clusters.empty()) throw InvalidConfigError("sweep.clusters is empty");
      for (auto k : base.sweep_clusters) {
        ExperimentConfig cfg = base;
        cfg.cluster.k = k;
        run_point(cfg, std::to_string(k));
      }
      break;
    }
    case SweepKind::kNoise: {
      if (base.sweep_noise.empty()) throw InvalidConfigError("sweep.noise_multipliers is empty");
      for (double sigma : base.sweep_noise) {
        ExperimentConfig cfg = base;
        cfg.dp.enabled = true;
        cfg.dp.noise_multiplier = sigma;
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%g", sigma);
        run_point(cfg, buf);
      }
      break;
    }
    case SweepKind::kClusterMethods: {
      const std::pair<ClusterMethodKind, const char*> kinds[] = {
          {ClusterMethodKind::kFeature, "feature"},
          {ClusterMethodKind::kKMeans, "kmeans"},
          {ClusterMethodKind::kHash, "hash"}};
      for (const auto& [k, name] : kinds) {
        ExperimentConfig cfg = base;
        cfg.cluster.kind = k;
        run_point(cfg, name);
      }
      break;
    }
  }
  return sweep;
}

inline std::string format_sweep(const SweepReport& sweep) {
  std::vector<std::vector<std::string>> rows{{to_string(sweep.kind)}};
  if (sweep.points.empty()) return {};
  for (const auto& v : sweep.points.front().report.summary) rows.front().push_back(v.name + "_auc");
  rows.front().push_back("fel_eps");
  for (const auto& p : sweep.points) {
    std::vector<std::string> row{p.value};
    for (const auto& v : p.report.summary) {
      row.push_back(detail::fmt(v.mean.auc) + " +- " + detail::fmt(v.stddev.auc));
    }
    row.push_back(detail::fmt(p.report.seeds.front().privacy.fel.epsilon, 3));
    rows.push_back(row);
  }
  return "mean auc over seeds\n" + detail::render_table(rows);
}

inline void write_sweep_files(const std::filesystem::path& dir, const SweepReport& sweep) {
  std::filesystem::create_directories(dir);
  write_text(dir / "sweep.txt", format_sweep(sweep));
  std::ostringstream out;
  out << to_string(sweep.kind) << ",variant,auc_mean,auc_std,accuracy_mean,ne_mean,logloss_mean,fel_epsilon\n";
  char buf[256];
  for (const auto& p : sweep.points) {
    for (const auto& v : p.report.summary) {
      std::snprintf(buf, sizeof(buf), "%s,%s,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", p.value.c_str(),
                    v.name.c_str(), v.mean.auc, v.stddev.auc, v.mean.accuracy, v.mean.ne,
                    v.mean.logloss, p.report.seeds.front().privacy.fel.epsilon);
      out << buf;
    }
  }
  write_text(dir / "sweep.csv", out.str());
}

}  // namespace fedens
