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

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "fedens/nn.hpp"
#include "oracles.hpp"

namespace fedens {
namespace {

using Dims = std::vector<std::size_t>;

TEST(BuildMlp, DecayK4From512) {
  EXPECT_EQ(build_mlp(512, 4, 1).layer_dims(), (Dims{512, 128, 32, 8, 1}));
}

TEST(BuildMlp, DecayK2From8) {
  EXPECT_EQ(build_mlp(8, 2, 1).layer_dims(), (Dims{8, 4, 2, 1}));
}

TEST(BuildMlp, DegenerateInputHasNoHiddenLayer) {
  const auto m = build_mlp(1, 4, 1);
  EXPECT_EQ(m.layer_dims(), (Dims{1, 1}));
  EXPECT_EQ(m.last_hidden_dim(), 1u);
}

TEST(BuildMlp, HiddenLayerCapIsConfigurable) {
  EXPECT_EQ(build_mlp(64, 2, 1, 1).layer_dims(), (Dims{64, 32, 1}));
  EXPECT_EQ(build_mlp(64, 2, 1, 0).layer_dims(), (Dims{64, 1}));
}

TEST(BuildMlp, RejectsBadArguments) {
  EXPECT_THROW(build_mlp(8, 1, 1), InvalidConfigError);
  EXPECT_THROW(build_mlp(0, 2, 1), InvalidConfigError);
}

TEST(BuildMlp, SameSeedIsBitReproducible) {
  EXPECT_EQ(build_mlp(40, 2, 7), build_mlp(40, 2, 7));
  EXPECT_FALSE(build_mlp(40, 2, 7) == build_mlp(40, 2, 8));
}

TEST(BuildMlp, GlorotRangeAndZeroBiases) {
  const auto m = build_mlp(30, 3, 11);
  const auto& d = m.layer_dims();
  for (std::size_t l = 0; l < m.num_layers(); ++l) {
    const double limit = std::sqrt(6.0 / static_cast<double>(d[l] + d[l + 1]));
    for (double w : m.weights(l)) EXPECT_LE(std::abs(w), limit);
    for (double b : m.biases(l)) EXPECT_EQ(b, 0.0);
  }
}

TEST(MlpModel, ParameterCountIdentity) {
  for (std::size_t in : {1, 3, 8, 17, 64, 200}) {
    for (int k : {2, 3, 4}) {
      const auto m = build_mlp(in, k, 3);
      const auto& d = m.layer_dims();
      std::size_t expected = 0;
      for (std::size_t l = 0; l + 1 < d.size(); ++l) expected += d[l + 1] * d[l] + d[l + 1];
      EXPECT_EQ(m.parameter_count(), expected);
    }
  }
}

TEST(MlpModel, RejectsInvalidDims) {
  EXPECT_THROW(MlpModel(Dims{3}), InvalidConfigError);
  EXPECT_THROW(MlpModel(Dims{3, 2}), InvalidConfigError);
  EXPECT_THROW(MlpModel(Dims{3, 0, 1}), InvalidConfigError);
}

TEST(Forward, ZeroModelPredictsHalf) {
  MlpModel m(Dims{3, 2, 1});
  const std::vector<double> x{1.5, -2.0, 7.0};
  EXPECT_EQ(forward(m, x).prediction, 0.5);
}

TEST(Forward, IdentityUnitModel) {
  MlpModel m(Dims{1, 1});
  m.weight(0, 0, 0) = 1.0;
  const std::vector<double> x{0.0};
  const auto t = forward(m, x);
  EXPECT_EQ(t.prediction, 0.5);
  ASSERT_EQ(t.last_hidden.size(), 1u);
  EXPECT_EQ(t.last_hidden[0], 0.0);
}

TEST(Forward, HandComputedTwoLayerNetwork) {
  MlpModel m(Dims{2, 2, 1});
  // h1 = relu(0.5*1 + 0.25*(-1) + 0.1) = 0.35
  // h2 = relu(-1*1 + 2*(-1) + 0) = 0
  // z  = 2*0.35 - 3*0 - 0.2 = 0.5
  m.weight(0, 0, 0) = 0.5;
  m.weight(0, 0, 1) = 0.25;
  m.biases(0)[0] = 0.1;
  m.weight(0, 1, 0) = -1.0;
  m.weight(0, 1, 1) = 2.0;
  m.weight(1, 0, 0) = 2.0;
  m.weight(1, 0, 1) = -3.0;
  m.biases(1)[0] = -0.2;
  const std::vector<double> x{1.0, -1.0};
  const auto t = forward(m, x);
  EXPECT_NEAR(t.last_hidden[0], 0.35, 1e-15);
  EXPECT_EQ(t.last_hidden[1], 0.0);
  EXPECT_NEAR(t.logit, 0.5, 1e-15);
  EXPECT_NEAR(t.prediction, 1.0 / (1.0 + std::exp(-0.5)), 1e-15);
}

TEST(Forward, TraceShapesAndSigmoidIdentity) {
  const auto m = build_mlp(16, 2, 5);
  std::vector<double> x(16, 0.3);
  const auto t = forward(m, x);
  EXPECT_EQ(t.last_hidden.size(), m.layer_dims()[m.layer_dims().size() - 2]);
  EXPECT_EQ(t.prediction, sigmoid(t.logit));
  EXPECT_GT(t.prediction, 0.0);
  EXPECT_LT(t.prediction, 1.0);
}

TEST(Forward, ShapeAndNumericErrors) {
  const auto m = build_mlp(4, 2, 1);
  EXPECT_THROW(forward(m, std::vector<double>{1.0, 2.0}), ShapeError);
  EXPECT_THROW(forward(m, std::vector<double>{1.0, std::nan(""), 0.0, 0.0}), NumericError);
  EXPECT_THROW(forward(m, std::vector<double>{1.0, std::numeric_limits<double>::infinity(), 0.0, 0.0}),
               NumericError);
}

TEST(Forward, DeterministicTraces) {
  const auto m = build_mlp(12, 2, 9);
  std::vector<double> x(12);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = std::sin(static_cast<double>(i));
  const auto a = forward(m, x);
  const auto b = forward(m, x);
  EXPECT_EQ(a.activations, b.activations);
  EXPECT_EQ(a.prediction, b.prediction);
}

TEST(BceLoss, Examples) {
  EXPECT_NEAR(bce_loss(0.5, 1), std::log(2.0), 1e-12);
  EXPECT_NEAR(bce_loss(1.0 - 1e-15, 1), 0.0, 1e-11);
  EXPECT_NEAR(bce_loss(0.9, 0), -std::log(0.1), 1e-12);
}

TEST(BceLoss, ClampKeepsLossFinite) {
  EXPECT_TRUE(std::isfinite(bce_loss(0.0, 1)));
  EXPECT_TRUE(std::isfinite(bce_loss(1.0, 0)));
  EXPECT_NEAR(bce_loss(0.0, 1), -std::log(1e-12), 1e-9);
}

TEST(Gradient, RepeatedExampleEqualsSingle) {
  const auto m = build_mlp(6, 2, 4);
  const Sample s{{0.1, -0.4, 0.9, 1.2, -0.3, 0.0}, 1.0};
  const std::vector<Sample> one{s};
  const std::vector<Sample> two{s, s};
  const auto g1 = gradient(m, one);
  const auto g2 = gradient(m, two);
  ASSERT_EQ(g1.size(), g2.size());
  for (std::size_t i = 0; i < g1.size(); ++i) EXPECT_NEAR(g1[i], g2[i], 1e-15);
}

TEST(Gradient, OutputBiasOnZeroModel) {
  MlpModel m(Dims{3, 1});
  const std::vector<Sample> batch{{{0.7, -0.2, 1.0}, 1.0}};
  const auto g = gradient(m, batch);
  // Last parameter is the output bias; p = 0.5, y = 1.
  EXPECT_EQ(g.back(), -0.5);
}

TEST(Gradient, EmptyBatchThrows) {
  const auto m = build_mlp(3, 2, 1);
  EXPECT_THROW(gradient(m, std::vector<Sample>{}), InvalidArgumentError);
}

TEST(Gradient, MatchesCentralFiniteDifferences) {
  std::mt19937_64 rng(2024);
  std::normal_distribution<double> n01(0.0, 1.0);
  std::uniform_int_distribution<int> width(1, 12);
  std::uniform_int_distribution<int> kdist(2, 3);
  std::uniform_int_distribution<int> bdist(1, 6);
  int models = 0;
  while (models < 25) {
    const auto in = static_cast<std::size_t>(width(rng));
    auto m = build_mlp(in, kdist(rng), rng());
    if (m.parameter_count() > 200) continue;
    // Nonzero biases so every parameter's gradient is exercised.
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
    const auto analytic = gradient(m, batch);
    const std::vector<double> params(m.parameters().begin(), m.parameters().end());
    const auto numeric = oracle::fd_gradient(m.layer_dims(), params, xs, ys, 1e-6);
    for (std::size_t i = 0; i < analytic.size(); ++i) {
      const double rel = std::abs(analytic[i] - numeric[i]) / std::max(1e-8, std::abs(analytic[i]));
      EXPECT_LE(rel, 1e-5) << "model " << models << " coordinate " << i;
    }
    ++models;
  }
}

TEST(Optimizer, SgdStep) {
  std::vector<double> theta{1.0};
  const std::vector<double> g{2.0};
  auto st = OptimizerState::sgd(0.1);
  apply_update(theta, g, st);
  EXPECT_NEAR(theta[0], 0.8, 1e-15);
}

TEST(Optimizer, AdagradFirstStep) {
  std::vector<double> theta{0.0};
  const std::vector<double> g{3.0};
  auto st = OptimizerState::adagrad(0.01, 1);
  apply_update(theta, g, st);
  EXPECT_NEAR(theta[0], -0.01 * 3.0 / (3.0 + 1e-10), 1e-16);
  EXPECT_EQ(st.accumulators[0], 9.0);
}

TEST(Optimizer, ZeroGradientLeavesEverythingUnchanged) {
  auto m = build_mlp(5, 2, 3);
  const auto before = m;
  const std::vector<double> zero(m.parameter_count(), 0.0);
  auto sgd = OptimizerState::sgd(0.5);
  apply_step(m, zero, sgd);
  EXPECT_EQ(m, before);
  auto ada = OptimizerState::adagrad(0.5, m.parameter_count());
  ada.accumulators.assign(m.parameter_count(), 0.25);
  const auto acc = ada.accumulators;
  apply_step(m, zero, ada);
  EXPECT_EQ(m, before);
  EXPECT_EQ(ada.accumulators, acc);
}

TEST(Optimizer, AdagradAccumulatorsNondecreasing) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n01(0.0, 1.0);
  std::vector<double> theta(10, 0.0);
  auto st = OptimizerState::adagrad(0.01, theta.size());
  auto prev = st.accumulators;
  for (int step = 0; step < 50; ++step) {
    std::vector<double> g(theta.size());
    for (double& v : g) v = n01(rng);
    apply_update(theta, g, st);
    for (std::size_t i = 0; i < theta.size(); ++i) EXPECT_GE(st.accumulators[i], prev[i]);
    prev = st.accumulators;
  }
}

TEST(Optimizer, LengthMismatchThrows) {
  auto m = build_mlp(5, 2, 3);
  auto st = OptimizerState::sgd(0.1);
  EXPECT_THROW(apply_step(m, std::vector<double>(3, 0.0), st), ShapeError);
}

TEST(Backprop, InputGradientMatchesFiniteDifferences) {
  auto m = build_mlp(5, 2, 21);
  for (double& p : m.parameters()) p += 0.05;
  const std::vector<double> x{0.3, -1.1, 0.8, 0.2, -0.5};
  std::vector<double> grad(m.parameter_count(), 0.0);
  std::vector<double> gx(5, 0.0);
  Backprop bp(m);
  bp.accumulate(x, 1.0, grad, 1.0, gx);
  for (std::size_t i = 0; i < x.size(); ++i) {
    auto xp = x;
    auto xm = x;
    xp[i] += 1e-6;
    xm[i] -= 1e-6;
    const double fd = (bce_loss(predict(m, xp), 1.0) - bce_loss(predict(m, xm), 1.0)) / 2e-6;
    EXPECT_NEAR(gx[i], fd, 1e-6);
  }
}

}  // namespace
}  // namespace fedens
