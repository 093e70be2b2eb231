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

// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits nonzero if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <limits>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "fedens/fedens.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
using namespace fedens;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string f4(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

ExperimentConfig config(const char* name) {
  return load_config(fs::path(FEDENS_CONFIG_DIR) / name);
}

// 1 ------------------------------------------------------------------------

Outcome fel_lift() {
  const auto cfg = config("fel_synthetic.conf");
  const auto t0 = std::chrono::steady_clock::now();
  const auto report = run_experiment(cfg, &std::cerr);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const double base = report.variant("baseline").mean.auc;
  const double mean = report.variant("fel_mean").mean.auc;
  const double median = report.variant("fel_median").mean.auc;
  const double nn = report.variant("fel_nn").mean.auc;
  std::cerr << compare(report);
  Outcome o;
  o.pass = report.seeds.size() >= 5 && nn - base >= 0.01 && nn >= mean && mean >= median && secs <= 600.0;
  o.detail = "baseline " + f4(base) + ", nn " + f4(nn) + " (" + format_lift(nn, base) + "), mean " +
             f4(mean) + ", median " + f4(median) + ", " + std::to_string(static_cast<int>(secs)) + " s";
  return o;
}

// 2 ------------------------------------------------------------------------

Outcome cluster_curve() {
  auto cfg = config("cluster_sweep.conf");
  cfg.methods = {AggregationMethod::kNn};
  const auto sweep = run_sweep(cfg, SweepKind::kClusters, &std::cerr);
  std::vector<double> auc;
  std::string detail;
  for (const auto& p : sweep.points) {
    auc.push_back(p.report.variant("fel_nn").mean.auc);
    detail += (detail.empty() ? "" : ", ") + ("k=" + p.value + " " + f4(auc.back()));
  }
  // points follow sweep.clusters = 1, 2, 4, 8, 32
  Outcome o;
  if (auc.size() != 5) return {false, "expected 5 sweep points, got " + std::to_string(auc.size())};
  const double best_interior = *std::max_element(auc.begin() + 1, auc.begin() + 4);
  o.pass = auc[4] < best_interior && best_interior > auc[0];
  o.detail = detail;
  return o;
}

// 3 ------------------------------------------------------------------------

Outcome gradients() {
  std::mt19937_64 rng(20260101);
  std::normal_distribution<double> n01(0.0, 1.0);
  std::uniform_int_distribution<int> width(1, 14);
  std::uniform_int_distribution<int> kdist(2, 4);
  std::uniform_int_distribution<int> bdist(1, 8);
  int models = 0;
  double worst = 0.0;
  while (models < 30) {
    const auto in = static_cast<std::size_t>(width(rng));
    auto m = build_mlp(in, kdist(rng), rng());
    if (m.parameter_count() > 200) continue;
    for (double& p : m.parameters()) p += 0.1 * n01(rng);
    std::vector<Sample> batch(static_cast<std::size_t>(bdist(rng)));
    std::vector<std::vector<double>> xs;
    std::vector<double> ys;
    for (auto& s : batch) {
      s.x.resize(in);
      for (double& v : s.x) v = n01(rng);
      s.label = static_cast<double>(rng() % 2);
      xs.push_back(s.x);
      ys.push_back(s.label);
    }
    const auto g = gradient(m, batch);
    const std::vector<double> params(m.parameters().begin(), m.parameters().end());
    const auto fd = oracle::fd_gradient(m.layer_dims(), params, xs, ys, 1e-6);
    for (std::size_t i = 0; i < g.size(); ++i) {
      worst = std::max(worst, std::abs(g[i] - fd[i]) / std::max(1e-8, std::abs(g[i])));
    }
    ++models;
  }
  char buf[96];
  std::snprintf(buf, sizeof(buf), "%d models, worst relative error %.2e", models, worst);
  return {worst <= 1e-5, buf};
}

// 4 ------------------------------------------------------------------------

Outcome fedavg_equivalence() {
  Rng rng(404);
  std::normal_distribution<double> n01(0.0, 1.0);
  double worst = 0.0;
  for (int t = 0; t < 10; ++t) {
    const std::size_t in = 3 + t % 5;
    FedClient client{"u0000000", {}};
    for (int i = 0; i < 17; ++i) {
      Sample s;
      s.x.resize(in);
      for (double& v : s.x) v = n01(rng);
      s.label = static_cast<double>(rng() % 2);
      client.samples.push_back(std::move(s));
    }
    const auto init = build_mlp(in, 2, rng());
    RoundConfig rc;
    rc.clients_per_round = 1;
    rc.local_epochs = 1;
    rc.batch_size = client.samples.size();
    rc.learning_rate = 0.3;
    rc.global_epochs = 1;
    const auto fl = train_fl({client}, init, rc, {}, rng());
    auto central = init;
    const auto g = gradient(init, client.samples);
    for (std::size_t i = 0; i < g.size(); ++i) central.parameters()[i] -= rc.learning_rate * g[i];
    for (std::size_t i = 0; i < g.size(); ++i) {
      worst = std::max(worst, std::abs(fl.model.parameters()[i] - central.parameters()[i]));
    }
  }
  char buf[64];
  std::snprintf(buf, sizeof(buf), "worst parameter difference %.2e", worst);
  return {worst <= 1e-12, buf};
}

// 5 ------------------------------------------------------------------------

Outcome rdp_oracle() {
  double worst = 0.0;
  for (double sigma : {0.5, 1.0, 2.0, 4.0}) {
    for (double alpha : default_rdp_orders()) {
      worst = std::max(worst, std::abs(gaussian_rdp(sigma, alpha) - oracle::renyi_gaussian_integral(sigma, alpha)));
    }
  }
  char buf[64];
  std::snprintf(buf, sizeof(buf), "worst absolute error %.2e", worst);
  return {worst <= 1e-6, buf};
}

// 6 ------------------------------------------------------------------------

Outcome composition() {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(0.0, 5.0);
  bool exact = true;
  for (int t = 0; t < 200; ++t) {
    std::vector<RdpCurve> curves(1 + t % 4);
    for (auto& c : curves) {
      std::vector<double> e(default_rdp_orders().size());
      for (double& v : e) v = u(rng);
      c = make_curve(default_rdp_orders(), e);
    }
    const auto seq = compose_sequential(curves);
    const auto par = compose_parallel(curves);
    for (std::size_t i = 0; i < seq.orders.size(); ++i) {
      double sum = 0.0;
      double mx = 0.0;
      for (const auto& c : curves) {
        sum += c.epsilons[i];
        mx = std::max(mx, c.epsilons[i]);
      }
      exact = exact && seq.epsilons[i] == sum && par.epsilons[i] == mx;
    }
  }
  auto at_two = [](double e) { return make_curve(std::vector<double>{2.0}, std::vector<double>{e}); };
  PrivacyLedger l;
  l.leaf_costs = {{0, at_two(1.0)}, {1, at_two(2.0)}, {2, at_two(0.5)}};
  l.agg_regime = AggRegime::kOptin;
  l.agg_cost = at_two(0.0);
  const double optin = total_cost(l).at(2.0);
  l.agg_regime = AggRegime::kSameUsers;
  l.agg_cost = at_two(0.4);
  const double same = total_cost(l).at(2.0);
  l.agg_regime = AggRegime::kDisjointUsers;
  l.agg_cost = at_two(3.0);
  const double disjoint = total_cost(l).at(2.0);
  const bool regimes = optin == 2.0 && std::abs(same - 2.4) <= 1e-15 && disjoint == 3.0;
  std::ostringstream d;
  d << "sum/max " << (exact ? "exact" : "mismatch") << ", regimes " << optin << " / " << same << " / "
    << disjoint;
  return {exact && regimes, d.str()};
}

// 7 ------------------------------------------------------------------------

Outcome dp_sanity() {
  auto cfg = config("dp_sweep.conf");
  cfg.methods = {AggregationMethod::kNn};

  // (a) every clipped update stays within C, on leaves and baseline
  double max_norm = 0.0;
  for (double sigma : cfg.sweep_noise) {
    auto c = cfg;
    c.dp.noise_multiplier = sigma;
    const auto seed = c.seeds.front();
    const auto data = prepare_data(c, seed);
    train_baseline(c, data, seed, [&](const RoundRecord& r) { max_norm = std::max(max_norm, r.max_clipped_norm); });
    train_fel(c, data, seed, [&](std::size_t, const RoundRecord& r) {
      max_norm = std::max(max_norm, r.max_clipped_norm);
    });
  }
  const bool clipped = max_norm <= cfg.dp.clip_norm;

  // (b) utility over seeds is nonincreasing in sigma
  const auto sweep = run_sweep(cfg, SweepKind::kNoise, &std::cerr);
  std::vector<double> auc;
  std::string curve;
  for (const auto& p : sweep.points) {
    auc.push_back(p.report.variant("fel_nn").mean.auc);
    curve += (curve.empty() ? "" : ", ") + ("sigma=" + p.value + " " + f4(auc.back()));
  }
  bool monotone = auc.size() == 3;
  for (std::size_t i = 1; i < auc.size(); ++i) monotone = monotone && auc[i] <= auc[i - 1] + 0.005;

  // (c) sigma = 0 with C = inf is the uniform-weight path, bit for bit
  auto c = cfg;
  c.rounds.uniform_weights = false;
  const auto data = prepare_data(c, 1);
  const auto clients = to_fed_clients(data.rest, data, FeatureView::kPublic);
  const auto init = initial_model(data.public_width(), c, 11);
  DpConfig open;
  open.enabled = true;
  open.clip_norm = std::numeric_limits<double>::infinity();
  open.noise_multiplier = 0.0;
  const auto dp_path = train_fl(clients, init, c.rounds, open, 12);
  RoundConfig uniform = c.rounds;
  uniform.uniform_weights = true;
  const auto plain = train_fl(clients, init, uniform, {}, 12);
  const bool bit_exact = std::equal(dp_path.model.parameters().begin(), dp_path.model.parameters().end(),
                                    plain.model.parameters().begin(), plain.model.parameters().end());

  char buf[64];
  std::snprintf(buf, sizeof(buf), "max clipped norm %.6f", max_norm);
  Outcome o;
  o.pass = clipped && monotone && bit_exact;
  o.detail = std::string(buf) + "; " + curve + "; sigma=0 C=inf " + (bit_exact ? "bit-exact" : "differs");
  return o;
}

// 8 ------------------------------------------------------------------------

Outcome simple_aggregation() {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<int> ndist(1, 12);
  int failures = 0;
  const AggregationMethod methods[] = {AggregationMethod::kMean, AggregationMethod::kMedian,
                                       AggregationMethod::kMax};
  for (int t = 0; t < 1000; ++t) {
    std::vector<double> p(static_cast<std::size_t>(ndist(rng)));
    for (double& v : p) v = u(rng);
    auto shuffled = p;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    const auto [lo, hi] = std::minmax_element(p.begin(), p.end());
    for (auto m : methods) {
      const double a = aggregate_simple(p, m);
      if (a < *lo || a > *hi) ++failures;
      if (aggregate_simple(shuffled, m) != a) ++failures;
      const std::vector<double> one{p.front()};
      if (aggregate_simple(one, m) != p.front()) ++failures;
    }
  }
  return {failures == 0, "1000 cases, " + std::to_string(failures) + " violations"};
}

// 9 ------------------------------------------------------------------------

Outcome determinism() {
  const auto cfg = config("fel_synthetic.conf");
  const auto root = fs::temp_directory_path() / "fedens_acceptance_determinism";
  fs::remove_all(root);
  train_fel_command(cfg, 1, root / "a");
  train_fel_command(cfg, 1, root / "b");
  std::size_t files = 0;
  std::size_t differing = 0;
  for (const auto& e : fs::recursive_directory_iterator(root / "a")) {
    if (!e.is_regular_file()) continue;
    const auto other = root / "b" / fs::relative(e.path(), root / "a");
    if (!fs::exists(other) || slurp(e.path()) != slurp(other)) ++differing;
    ++files;
  }
  fs::remove_all(root);
  return {files > 0 && differing == 0,
          std::to_string(files) + " files compared, " + std::to_string(differing) + " differ"};
}

// 10 -----------------------------------------------------------------------

Outcome privacy_parity() {
  auto cfg = config("fel_synthetic.conf");
  cfg.rounds.global_epochs = 1;  // each user joins exactly one round
  cfg.dp.enabled = true;
  cfg.dp.clip_norm = 1.0;
  cfg.dp.noise_multiplier = 1.1;
  const std::uint64_t seed = 1;
  const auto data = prepare_data(cfg, seed);
  const auto base = train_baseline(cfg, data, seed);
  const auto fel = train_fel(cfg, data, seed);
  const auto s = account_privacy(cfg, data.train_users, base.participation.max_participation(), fel);
  bool single = base.participation.max_participation() == 1;
  for (const auto& [c, m] : fel.leaf_participation) single = single && m == 1;
  std::ostringstream d;
  d << std::setprecision(17) << "baseline eps " << s.baseline.epsilon << ", fel eps " << s.fel.epsilon
    << ", delta " << s.delta;
  return {single && s.bounded && s.fel.epsilon == s.baseline.epsilon && s.fel.delta == s.baseline.delta &&
              s.fel.optimal_order == s.baseline.optimal_order,
          d.str()};
}

}  // namespace

int main() {
  const std::vector<std::pair<int, std::function<Outcome()>>> criteria{
      {1, fel_lift},           {2, cluster_curve}, {3, gradients},          {4, fedavg_equivalence},
      {5, rdp_oracle},         {6, composition},   {7, dp_sanity},          {8, simple_aggregation},
      {9, determinism},        {10, privacy_parity}};
  int failed = 0;
  for (const auto& [id, run] : criteria) {
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    if (!o.pass) ++failed;
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << id << ": " << o.detail << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
