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

// fedens: command-line front end.

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "fedens/fedens.hpp"

namespace {

struct GlobalOptions {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out = "out";
  std::vector<std::string> overrides;
};

fedens::ExperimentConfig resolve_config(const GlobalOptions& g) {
  fedens::ExperimentConfig cfg = g.config.empty() ? fedens::ExperimentConfig{} : fedens::load_config(g.config);
  for (const auto& kv : g.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw fedens::InvalidConfigError("--set expects key=value, got '" + kv + "'");
    fedens::apply_setting(cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (g.seed) cfg.seeds = {*g.seed};
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Federated ensemble learning simulator"};
  app.require_subcommand(1);
  app.fallthrough();
  GlobalOptions g;
  app.add_option("--config", g.config, "Experiment config file")->check(CLI::ExistingFile);
  app.add_option("--seed", g.seed, "Root seed; replaces experiment.seeds");
  app.add_option("--out", g.out, "Output directory");
  app.add_option("--set", g.overrides, "Override a config key (key=value), repeatable");

  auto* gen = app.add_subcommand("generate-data", "Write a synthetic population as CSV");
  auto* base = app.add_subcommand("train-baseline", "Train the FL baseline and checkpoint it");
  auto* fel = app.add_subcommand("train-fel", "Train leaves and over-arch, save the ensemble");
  auto* eval = app.add_subcommand("evaluate", "Evaluate a checkpoint or ensemble directory");
  std::string model_path;
  std::string method;
  eval->add_option("--model", model_path, "Checkpoint file or ensemble directory")->required();
  eval->add_option("--method", method, "Aggregation override for ensembles (mean|median|max|nn)");
  auto* run = app.add_subcommand("run", "Full baseline versus ensemble comparison over all seeds");
  auto* sweep = app.add_subcommand("sweep", "Repeat the comparison over a grid");
  std::string sweep_kind = "clusters";
  sweep->add_option("--over", sweep_kind, "clusters | noise | methods");
  auto* priv = app.add_subcommand("privacy-report", "Privacy budgets implied by the config");

  CLI11_PARSE(app, argc, argv);

  try {
    const auto cfg = resolve_config(g);
    const std::uint64_t seed = cfg.seeds.front();
    std::string text;
    if (*gen) {
      text = fedens::generate_data_command(cfg, seed, g.out);
    } else if (*base) {
      text = fedens::train_baseline_command(cfg, seed, g.out);
    } else if (*fel) {
      text = fedens::train_fel_command(cfg, seed, g.out);
    } else if (*eval) {
      std::optional<fedens::AggregationMethod> m;
      if (!method.empty()) m = fedens::parse_aggregation(method);
      text = fedens::evaluate_command(cfg, seed, model_path, m, g.out);
    } else if (*run) {
      text = fedens::run_command(cfg, g.out, &std::cerr);
    } else if (*sweep) {
      text = fedens::sweep_command(cfg, fedens::parse_sweep_kind(sweep_kind), g.out, &std::cerr);
    } else if (*priv) {
      text = fedens::privacy_report_command(cfg, seed, g.out);
    }
    std::cout << text;
  } catch (const fedens::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
