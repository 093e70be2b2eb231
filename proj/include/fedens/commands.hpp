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

// Bodies of the fedens CLI subcommands. Each writes into an output directory
// and returns a short human-readable summary.

#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>

#include "fedens/checkpoint.hpp"
#include "fedens/clustering.hpp"
#include "fedens/config.hpp"
#include "fedens/data.hpp"
#include "fedens/experiment.hpp"
#include "fedens/privacy.hpp"

namespace fedens {

namespace detail {

inline std::string metrics_table(const std::vector<VariantResult>& variants) {
  std::vector<std::vector<std::string>> rows{{"model", "auc", "accuracy", "ne", "logloss"}};
  for (const auto& v : variants) {
    rows.push_back({v.name, fmt(v.metrics.auc), fmt(v.metrics.accuracy), fmt(v.metrics.ne),
                    fmt(v.metrics.logloss)});
  }
  return render_table(rows);
}

inline std::string metrics_csv(const std::vector<VariantResult>& variants) {
  std::ostringstream out;
  out << "model,auc,accuracy,logloss,ne\n";
  char buf[256];
  for (const auto& v : variants) {
    std::snprintf(buf, sizeof(buf), "%s,%.17g,%.17g,%.17g,%.17g\n", v.name.c_str(), v.metrics.auc,
                  v.metrics.accuracy, v.metrics.logloss, v.metrics.ne);
    out << buf;
  }
  return out.str();
}

inline std::string budget_line(const std::string& name, const DpBudgetReport& b) {
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%s: epsilon=%s delta=%.3e order=%g\n", name.c_str(),
                fmt(b.epsilon).c_str(), b.delta, b.optimal_order);
  return buf;
}

}  // namespace detail

// Writes population.csv, user_attributes.csv and segments.csv.
inline std::string generate_data_command(const ExperimentConfig& cfg, std::uint64_t seed,
                                         const std::filesystem::path& out) {
  if (cfg.source != DataSource::kSynthetic) {
    throw InvalidConfigError("generate-data needs data.source = synthetic");
  }
  cfg.synthetic.validate();
  std::filesystem::create_directories(out);
  std::map<std::string, std::size_t> segments;
  const auto users = load_population(cfg, seed, &segments);
  write_csv(out / "population.csv", users, cfg.synthetic.schema());
  write_user_attributes(out / "user_attributes.csv", users);
  std::ostringstream seg;
  seg << "user_id,segment\n";
  std::size_t examples = 0;
  for (const auto& u : users) {
    seg << u.user_id << ',' << segments.at(u.user_id) << '\n';
    examples += u.examples.size();
  }
  write_text(out / "segments.csv", seg.str());
  return "wrote " + std::to_string(users.size()) + " users, " + std::to_string(examples) +
         " examples to " + out.string() + "\n";
}

inline std::string train_baseline_command(const ExperimentConfig& cfg, std::uint64_t seed,
                                          const std::filesystem::path& out) {
  cfg.validate();
  std::filesystem::create_directories(out);
  const auto data = prepare_data(cfg, seed);
  std::ofstream rounds(out / "rounds_baseline.log", std::ios::trunc);
  const auto fl = train_baseline(cfg, data, seed, [&](const RoundRecord& r) { write_round_record(rounds, r); });
  save_checkpoint(fl.model, out / "baseline.felm");
  const std::vector<VariantResult> variants{{"baseline", evaluate_model(fl.model, data)}};
  const auto delta = resolve_delta(cfg, data.train_users);
  const auto budget = cfg.dp.enabled && cfg.dp.noise_multiplier > 0.0
                          ? rdp_to_dp(participation_curve(cfg.dp.noise_multiplier,
                                                          fl.participation.max_participation()),
                                      delta)
                          : unbounded_budget(delta);
  const std::string text = "model: baseline\nseed: " + std::to_string(seed) + "\nrounds: " +
                           std::to_string(fl.rounds.size()) + "\n\n" +
                           detail::metrics_table(variants) + "\n" +
                           detail::budget_line("baseline", budget);
  write_text(out / "baseline_report.txt", text);
  write_text(out / "baseline_metrics.csv", detail::metrics_csv(variants));
  return text;
}

// Writes ensemble/ (checkpoints and manifest), clusters.csv, per-leaf round
// logs, fel_report.txt, fel_metrics.csv and fel_rdp.csv.
inline std::string train_fel_command(const ExperimentConfig& cfg, std::uint64_t seed,
                                     const std::filesystem::path& out) {
  cfg.validate();
  std::filesystem::create_directories(out);
  const auto data = prepare_data(cfg, seed);
  std::map<std::size_t, std::ostringstream> logs;
  const auto fel = train_fel(cfg, data, seed, [&](std::size_t c, const RoundRecord& r) {
    write_round_record(logs[c], r);
  });
  for (const auto& [c, text] : logs) {
    const std::string name = c == kPrivateLeafId ? "rounds_private.log"
                                                 : "rounds_leaf_" + std::to_string(c) + ".log";
    write_text(out / name, text.str());
  }
  save_ensemble(out / "ensemble", fel.ensemble, cfg.serve_method);
  write_assignment_csv(out / "clusters.csv", fel.assignment);

  std::vector<VariantResult> variants;
  const auto ms = evaluate_ensemble(fel.ensemble, cfg.methods, data);
  for (std::size_t i = 0; i < cfg.methods.size(); ++i) {
    variants.push_back({variant_name(cfg.methods[i]), ms[i]});
  }
  // Baseline participation is one round per global epoch.
  const auto privacy = account_privacy(cfg, data.train_users, cfg.rounds.global_epochs, fel);
  std::ostringstream text;
  text << "model: fel\nseed: " << seed << "\nleaves: " << fel.ensemble.leaves.size()
       << "\nempty clusters: " << fel.empty_clusters.size()
       << "\nserve method: " << to_string(cfg.serve_method) << "\ncluster sizes:";
  for (auto s : fel.assignment.sizes()) text << ' ' << s;
  text << "\n\n" << detail::metrics_table(variants) << '\n'
       << detail::budget_line("fel", privacy.fel);
  write_text(out / "fel_report.txt", text.str());
  write_text(out / "fel_metrics.csv", detail::metrics_csv(variants));
  if (privacy.bounded) {
    std::ostringstream curve;
    write_curve_csv(curve, privacy.fel_curve);
    write_text(out / "fel_rdp.csv", curve.str());
  }
  return text.str();
}

// Evaluates a checkpoint file or an ensemble directory on the held-out split
// the config produces for `seed`.
inline std::string evaluate_command(const ExperimentConfig& cfg, std::uint64_t seed,
                                    const std::filesystem::path& model_path,
                                    std::optional<AggregationMethod> method,
                                    const std::filesystem::path& out) {
  cfg.validate();
  const auto data = prepare_data(cfg, seed);
  std::vector<VariantResult> variants;
  if (std::filesystem::is_directory(model_path)) {
    const auto loaded = load_ensemble(model_path);
    const AggregationMethod m = method.value_or(loaded.method);
    const AggregationMethod ms[] = {m};
    variants.push_back({variant_name(m), evaluate_ensemble(loaded.ensemble, ms, data).front()});
  } else {
    const auto model = load_checkpoint(model_path);
    if (model.input_dim() != data.public_width()) {
      throw ShapeError("checkpoint expects width " + std::to_string(model.input_dim()) +
                       ", data has " + std::to_string(data.public_width()));
    }
    variants.push_back({model_path.stem().string(), evaluate_model(model, data)});
  }
  const std::string text = detail::metrics_table(variants);
  std::filesystem::create_directories(out);
  write_text(out / "evaluation.txt", text);
  write_text(out / "evaluation.csv", detail::metrics_csv(variants));
  return text;
}

inline std::string run_command(const ExperimentConfig& cfg, const std::filesystem::path& out,
                               std::ostream* log = nullptr) {
  const auto report = run_experiment(cfg, log);
  write_report_files(out, report);
  return format_report(report);
}

inline std::string sweep_command(const ExperimentConfig& cfg, SweepKind kind,
                                 const std::filesystem::path& out, std::ostream* log = nullptr) {
  cfg.validate();
  const auto sweep = run_sweep(cfg, kind, log);
  write_sweep_files(out, sweep);
  for (const auto& p : sweep.points) {
    write_report_files(out / (to_string(kind) + "_" + p.value), p.report);
  }
  return format_sweep(sweep);
}

// Budgets from the config alone, without training: every user joins one
// round per global epoch. Shows the baseline next to each aggregation regime.
inline std::string privacy_report_command(const ExperimentConfig& cfg, std::uint64_t seed,
                                          const std::filesystem::path& out) {
  cfg.validate();
  if (!(cfg.dp.enabled && cfg.dp.noise_multiplier > 0.0)) {
    throw InvalidConfigError("privacy-report needs dp.enabled = true and dp.noise_multiplier > 0");
  }
  const auto population = load_population(cfg, seed);
  const auto split = split_train_test(population, cfg.split, cfg.test_fraction, derive_seed(seed, "split"));
  const double delta = resolve_delta(cfg, split.train.size());
  const std::size_t leaves = cfg.cluster.kind == ClusterMethodKind::kFeature
                                 ? cfg.cluster.edges.size() + 1
                                 : cfg.cluster.k;
  const auto leaf_curve = participation_curve(cfg.dp.noise_multiplier, cfg.rounds.global_epochs);

  PrivacyLedger ledger;
  for (std::size_t c = 0; c < leaves; ++c) ledger.leaf_costs[c] = leaf_curve;
  struct Row {
    std::string name;
    std::optional<RdpCurve> curve;
  };
  std::vector<Row> rows;
  rows.push_back({"baseline", leaf_curve});
  rows.push_back({"fel optin", total_cost(ledger)});
  const bool agg_bounded = cfg.overarch_noise_multiplier > 0.0;
  for (auto regime : {AggRegime::kSameUsers, AggRegime::kDisjointUsers}) {
    if (!agg_bounded) {
      rows.push_back({"fel " + to_string(regime), std::nullopt});
      continue;
    }
    PrivacyLedger l = ledger;
    l.agg_regime = regime;
    l.agg_cost = gaussian_curve(cfg.overarch_noise_multiplier);
    rows.push_back({"fel " + to_string(regime), total_cost(l)});
  }

  std::vector<std::vector<std::string>> table{{"model", "epsilon", "delta", "order"}};
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.3e", delta);
  for (const auto& r : rows) {
    if (!r.curve) {
      table.push_back({r.name, "inf", buf, "-"});
      continue;
    }
    const auto b = rdp_to_dp(*r.curve, delta);
    table.push_back({r.name, detail::fmt(b.epsilon), buf, detail::fmt(b.optimal_order, 2)});
  }
  std::ostringstream text;
  text << "noise multiplier: " << cfg.dp.noise_multiplier << "\nclip norm: " << cfg.dp.clip_norm
       << "\nleaves: " << leaves << "\nparticipations per user: " << cfg.rounds.global_epochs
       << "\ntrain users: " << split.train.size() << "\n\n"
       << detail::render_table(table);

  std::ostringstream csv;
  csv << "alpha";
  for (const auto& r : rows) {
    if (r.curve) csv << ',' << r.name;
  }
  csv << '\n';
  const auto& orders = default_rdp_orders();
  for (std::size_t i = 0; i < orders.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%g", orders[i]);
    csv << buf;
    for (const auto& r : rows) {
      if (!r.curve) continue;
      std::snprintf(buf, sizeof(buf), ",%.10g", r.curve->epsilons[i]);
      csv << buf;
    }
    csv << '\n';
  }
  std::filesystem::create_directories(out);
  write_text(out / "privacy_report.txt", text.str());
  write_text(out / "rdp_curves.csv", csv.str());
  return text.str();
}

}  // namespace fedens
