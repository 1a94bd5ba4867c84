// Copyright 2026 The GPC Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <cmath>
#include <numbers>
#include <random>

#include "gpc/checkpoint.hpp"
#include "gpc/error.hpp"
#include "gpc/network.hpp"
#include "oracles.hpp"

namespace gpc {
namespace {

const double kHalfLog2Pi = 0.5 * std::log(2.0 * std::numbers::pi);

ModelConfig scalar_config(int orders = 2) {
  ModelConfig c;
  c.orders = orders;
  c.widths = {1};
  return c;
}

Sequence sine(double period, std::size_t length, double phase = 0.0) {
  SequenceConfig c;
  c.period = period;
  c.length = length;
  c.phase = phase;
  return generate(c);
}

Eigen::MatrixXd eig(const Tensor& t) {
  Eigen::MatrixXd m(t.rows(), t.cols());
  for (std::size_t r = 0; r < t.rows(); ++r)
    for (std::size_t c = 0; c < t.cols(); ++c) m(r, c) = t(r, c);
  return m;
}

TEST(Build, SingleScalarLayer) {
  ModelConfig c = scalar_config(0);
  const Model m = build(c);
  ASSERT_EQ(m.levels.size(), 1u);
  ASSERT_EQ(m.levels[0].replicas.size(), 1u);
  EXPECT_EQ(m.levels[0].replicas[0].transitions.size(), 1u);
  EXPECT_TRUE(m.levels[0].replicas[0].derivative_predictors.empty());
  EXPECT_TRUE(m.hierarchical.empty());
}

TEST(Build, ShapeBookkeeping) {
  ModelConfig c;
  c.levels = 2;
  c.orders = 2;
  c.widths = {1, 4};
  const Model m = build(c);
  EXPECT_EQ(m.hierarchical[0].weight.shape(), (Shape{1, 4}));
  for (const auto& t : m.levels[0].replicas[0].transitions) EXPECT_EQ(t.weight.shape(), (Shape{1, 1}));
  for (const auto& t : m.levels[1].replicas[0].transitions) EXPECT_EQ(t.weight.shape(), (Shape{4, 4}));
  EXPECT_EQ(m.levels[1].replicas[0].derivative_predictors.size(), 2u);
  EXPECT_EQ(m.hierarchical_precisions[0].size(), 3u);
  for (const auto& t : m.levels[1].replicas[0].transitions) EXPECT_LE(t.weight.max_abs(), 0.1);
}

TEST(Build, DeterministicGivenSeed) {
  ModelConfig c;
  c.levels = 2;
  c.widths = {2, 3};
  c.replicas = 2;
  c.stride_candidates = {{1, 2, 3}, {1, 2, 3}};
  c.seed = 42;
  EXPECT_EQ(checkpoint_text(build(c)), checkpoint_text(build(c)));
  const std::string first = checkpoint_text(build(c));
  c.seed = 43;
  EXPECT_NE(checkpoint_text(build(c)), first);
}

TEST(Build, RejectsInconsistentConfig) {
  ModelConfig c;
  c.levels = 2;
  c.widths = {1};
  EXPECT_THROW(build(c), ConfigError);
  c.widths = {1, 0};
  EXPECT_THROW(build(c), ConfigError);
  c = {};
  c.settle_iterations = 0;
  EXPECT_THROW(build(c), ConfigError);
  c = {};
  c.replicas = 2;
  c.initial_strides = {{3, 3}};
  EXPECT_THROW(build(c), ConfigError);
}

TEST(Step, ClampsTheObservation) {
  ModelConfig c;
  c.levels = 2;
  c.widths = {2, 3};
  Model m = build(c);
  std::mt19937_64 rng(1);
  for (int t = 0; t < 10; ++t) {
    const Tensor obs = oracle::random_matrix(rng, 2, 1);
    step(m, obs);
    EXPECT_EQ(m.levels[0].replicas[0].state.orders[0].mu.values(), obs.values());
  }
  EXPECT_EQ(m.step_count, 10u);
  EXPECT_THROW(step(m, Tensor(3, 1)), ShapeError);
}

TEST(Step, PerfectPredictionChangesNothing) {
  Model m = build(scalar_config(1));
  auto& r = m.levels[0].replicas[0];
  r.transitions[0].weight = Tensor::identity(1);
  r.transitions[1].weight = Tensor::identity(1);
  const Tensor obs = Tensor::column({0.75});
  step(m, obs);
  const std::string weights_before = checkpoint_to_json(m)["weights"].dump();
  const Tensor x1 = r.state.orders[1].mu;
  const auto report = step(m, obs);
  for (const auto& ch : report.channels) EXPECT_EQ(ch.error_norm, 0.0);
  EXPECT_EQ(checkpoint_to_json(m)["weights"].dump(), weights_before);
  EXPECT_EQ(r.state.orders[1].mu.values(), x1.values());
}

TEST(Settle, EnergyNeverIncreases) {
  for (int seed = 0; seed < 5; ++seed) {
    ModelConfig c;
    c.levels = 2;
    c.orders = 2;
    c.widths = {3, 2};
    c.activation = seed % 2 ? Activation::relu : Activation::linear;
    c.init_scale = 0.8;
    c.seed = static_cast<std::uint64_t>(seed);
    Model m = build(c);
    std::mt19937_64 rng(static_cast<unsigned>(seed));
    step(m, oracle::random_matrix(rng, 3, 1));
    clamp(m, oracle::random_matrix(rng, 3, 1));
    const auto e = settle(m, 200);
    for (std::size_t i = 1; i < e.size(); ++i) EXPECT_LE(e[i], e[i - 1] + 1e-9);
    EXPECT_NEAR(e.back(), total_free_energy(m), 1e-9);
  }
}

TEST(Settle, ReachesTheLeastSquaresMinimizer) {
  ModelConfig c = scalar_config(1);
  c.widths = {3};
  c.settle_iterations = 1;
  c.eta_mu = 0.2;
  Model m = build(c);
  std::mt19937_64 rng(5);
  auto& r = m.levels[0].replicas[0];
  for (auto& t : r.transitions) {
    t.weight = oracle::random_matrix(rng, 3, 3, -0.3, 0.3);
    for (std::size_t i = 0; i < 3; ++i) t.weight(i, i) += 1.0;
  }
  r.derivative_predictors[0].weight = oracle::random_matrix(rng, 3, 3, -0.3, 0.3);
  for (std::size_t i = 0; i < 3; ++i) r.derivative_predictors[0].weight(i, i) += 1.0;
  r.transition_precisions[1] = Precision::from_covariance(oracle::random_spd(rng, 3, 1.0));
  r.derivative_precisions[0] = Precision::from_covariance(oracle::random_spd(rng, 3, 1.0));
  step(m, oracle::random_matrix(rng, 3, 1), {false, false});
  r.state.orders[1].mu = oracle::random_matrix(rng, 3, 1);
  clamp(m, oracle::random_matrix(rng, 3, 1));
  settle(m, 20000);

  // Energy in x1: transition error of order 1 plus the derivative error of order 0.
  const Eigen::MatrixXd pt = eig(r.transition_precisions[1].pi());
  const Eigen::MatrixXd pd = eig(r.derivative_precisions[0].pi());
  const Eigen::MatrixXd v = eig(r.derivative_predictors[0].weight);
  const Eigen::MatrixXd w0 = eig(r.transitions[0].weight);
  const Eigen::VectorXd x0 = eig(r.state.orders[0].mu);
  const Eigen::VectorXd target = (w0 * x0 - x0) / r.stride.dt();
  const Eigen::VectorXd prior = eig(r.transitions[1].weight) * eig(r.previous.orders[1].mu);
  const Eigen::VectorXd x1 =
      (pt + v.transpose() * pd * v).ldlt().solve(pt * prior + v.transpose() * pd * target);
  const Eigen::VectorXd settled = eig(r.state.orders[1].mu);
  EXPECT_LT((settled - x1).norm(), 1e-6);
  const Eigen::VectorXd grad = pt * (settled - prior) - v.transpose() * pd * (target - v * settled);
  EXPECT_LT(grad.norm(), 1e-6);
}

TEST(Learn, HierarchicalStepFollowsTheEnergyGradient) {
  ModelConfig c;
  c.levels = 2;
  c.orders = 1;
  c.widths = {2, 3};
  c.init_scale = 0.5;
  c.eta_theta = 1e-3;
  Model m = build(c);
  std::mt19937_64 rng(7);
  step(m, oracle::random_matrix(rng, 2, 1));
  clamp(m, oracle::random_matrix(rng, 2, 1));
  settle(m, 20);
  const Tensor w0 = m.hierarchical[0].weight;
  const auto energy = [&](const Tensor& w) {
    Model probe = m;
    probe.hierarchical[0].weight = w;
    return total_free_energy(probe);
  };
  const Tensor fd = oracle::numeric_gradient(energy, w0);
  // Analytic form: -sum_k Pi_k e_k mu_k^T with e_k = mu_{0,k} - W mu_{1,k}.
  Tensor analytic(2, 3);
  for (std::size_t k = 0; k < 2; ++k) {
    const Tensor& below = m.levels[0].replicas[0].state.orders[k].mu;
    const Tensor& above = m.levels[1].replicas[0].state.orders[k].mu;
    const Tensor pred = oracle::naive_matmul(w0, above);
    Tensor e = below;
    for (std::size_t i = 0; i < 2; ++i) e[i] -= pred[i];
    const Tensor xi = oracle::naive_matmul(m.hierarchical_precisions[0][k].pi(), e);
    for (std::size_t i = 0; i < 2; ++i)
      for (std::size_t j = 0; j < 3; ++j) analytic(i, j) -= xi[i] * above[j];
  }
  EXPECT_LT(oracle::max_abs_diff(fd, analytic), 1e-7);
  update_parameters(m, channel_errors(m), {true, false});
  for (std::size_t i = 0; i < 6; ++i) {
    EXPECT_NEAR(m.hierarchical[0].weight[i], w0[i] - c.eta_theta * analytic[i], 1e-12);
  }
}

TEST(Learn, WeightUpdatesAreLocal) {
  ModelConfig c;
  c.levels = 3;
  c.orders = 1;
  c.widths = {2, 2, 2};
  Model m = build(c);
  std::mt19937_64 rng(8);
  step(m, oracle::random_matrix(rng, 2, 1));
  clamp(m, oracle::random_matrix(rng, 2, 1));
  settle(m, 10);
  Model far = m;
  far.levels[2].replicas[0].state.orders[0].mu = oracle::random_matrix(rng, 2, 1);
  update_parameters(m, channel_errors(m), {true, false});
  update_parameters(far, channel_errors(far), {true, false});
  const auto& a = m.levels[0].replicas[0];
  const auto& b = far.levels[0].replicas[0];
  for (std::size_t k = 0; k < a.transitions.size(); ++k) {
    EXPECT_EQ(a.transitions[k].weight.values(), b.transitions[k].weight.values());
  }
  EXPECT_EQ(a.derivative_predictors[0].weight.values(), b.derivative_predictors[0].weight.values());
  EXPECT_EQ(m.hierarchical[0].weight.values(), far.hierarchical[0].weight.values());
  EXPECT_NE(m.hierarchical[1].weight.values(), far.hierarchical[1].weight.values());
}

TEST(Train, ConstantSignalIsLearnedExactly) {
  ModelConfig c = scalar_config(2);
  c.eta_theta = 0.05;
  Model m = build(c);
  Sequence s;
  for (int t = 0; t < 300; ++t) s.samples.push_back(Tensor::column({0.8}));
  const auto trace = train(m, s, 1);
  double last = 1.0;
  for (const auto& ch : trace.steps.back().channels) {
    if (ch.key.order == 0 && ch.key.channel == Channel::transition) last = ch.error_norm;
  }
  EXPECT_LT(last, 1e-3);
  for (const auto& y : predict_rollout(m, 5)) EXPECT_NEAR(y[0], 0.8, 1e-3);
}

TEST(Train, StrideFiveSineLearnsTheSignFlip) {
  ModelConfig c = scalar_config(2);
  c.initial_strides = {{5}};
  c.stride_candidates = {{5}};
  c.eta_theta = 0.02;
  Model m = build(c);
  train(m, sine(10, 1000, std::numbers::pi / 4), 1);
  EXPECT_NEAR(m.levels[0].replicas[0].transitions[0].weight[0], -1.0, 0.05);
  const double a = m.levels[0].replicas[0].state.orders[0].mu[0];
  const auto roll = predict_rollout(m, 4);
  for (std::size_t i = 0; i < roll.size(); ++i) {
    EXPECT_NEAR(roll[i][0], (i % 2 == 0 ? -a : a), 0.05 * std::abs(a) + 1e-9);
  }
}

TEST(Train, ZeroEpochsLeavesTheModel) {
  Model m = build(scalar_config());
  const std::string before = checkpoint_text(m);
  train(m, sine(10, 50), 0);
  EXPECT_EQ(checkpoint_text(m), before);
  EXPECT_THROW(train(m, Sequence{}, 1), ConfigError);
}

TEST(Train, InactiveReplicasHoldTheirState) {
  ModelConfig c = scalar_config(1);
  c.replicas = 2;
  c.initial_strides = {{1, 3}};
  c.stride_candidates = {{1, 3}};
  Model m = build(c);
  const Sequence s = sine(10, 9);
  for (std::size_t t = 0; t < s.size(); ++t) {
    const GeneralizedState held = m.levels[0].replicas[1].state;
    step(m, s.samples[t]);
    const auto& r = m.levels[0].replicas[1];
    EXPECT_EQ(r.active, t % 3 == 0);
    if (t % 3 != 0) {
      for (std::size_t k = 0; k < held.orders.size(); ++k) EXPECT_EQ(r.state.orders[k].mu.values(), held.orders[k].mu.values());
    }
  }
}

TEST(Train, DeterministicAndSerialMatchesParallel) {
  ModelConfig c;
  c.levels = 2;
  c.widths = {1, 3};
  c.replicas = 2;
  c.stride_candidates = {{1, 2, 5}, {1, 2, 5}};
  c.replica_window = 20;
  c.activation = Activation::relu;
  const Sequence s = sine(10, 150);
  Model a = build(c), b = build(c);
  c.execution = Execution::serial;
  Model d = build(c);
  const auto ta = train(a, s, 2), tb = train(b, s, 2), td = train(d, s, 2);
  ASSERT_EQ(ta.steps.size(), td.steps.size());
  for (std::size_t i = 0; i < ta.steps.size(); ++i) {
    EXPECT_EQ(ta.steps[i].total_free_energy, tb.steps[i].total_free_energy);
    EXPECT_EQ(ta.steps[i].total_free_energy, td.steps[i].total_free_energy);
  }
  d.config.execution = Execution::parallel;
  EXPECT_EQ(checkpoint_text(a), checkpoint_text(d));
}

TEST(Rollout, Examples) {
  Model m = build(scalar_config());
  EXPECT_THROW(predict_rollout(m, 0), ConfigError);
  m.levels[0].replicas[0].transitions[0].weight = Tensor::from_rows({{-1.0}});
  m.levels[0].replicas[0].state.orders[0].mu = Tensor::column({0.6});
  const auto r = predict_rollout(m, 3);
  EXPECT_EQ(r[0][0], -0.6);
  EXPECT_EQ(r[1][0], 0.6);
  EXPECT_EQ(r[2][0], -0.6);
}

TEST(Rollout, TwoLevelMatchesMatrixProducts) {
  ModelConfig c;
  c.levels = 2;
  c.orders = 0;
  c.widths = {2, 3};
  c.init_scale = 0.9;
  Model m = build(c);
  std::mt19937_64 rng(3);
  m.levels[1].replicas[0].state.orders[0].mu = oracle::random_matrix(rng, 3, 1);
  const Tensor& d = m.levels[1].replicas[0].transitions[0].weight;
  const Tensor& h = m.hierarchical[0].weight;
  Tensor s = m.levels[1].replicas[0].state.orders[0].mu;
  const auto roll = predict_rollout(m, 4);
  for (const auto& y : roll) {
    s = oracle::naive_matmul(d, s);
    EXPECT_LT(oracle::max_abs_diff(y, oracle::naive_matmul(h, s)), 1e-14);
  }
}

TEST(ConsistencyGap, Examples) {
  ModelConfig c;
  c.levels = 2;
  c.orders = 0;
  c.widths = {2, 2};
  Model m = build(c);
  std::mt19937_64 rng(4);
  m.levels[1].replicas[0].state.orders[0].mu = oracle::random_matrix(rng, 2, 1);
  m.hierarchical[0].weight = Tensor::identity(2);
  m.levels[0].replicas[0].transitions[0].weight = Tensor::identity(2);
  m.levels[1].replicas[0].transitions[0].weight = Tensor::identity(2);
  EXPECT_EQ(consistency_gap(m, 0), 0.0);
  const Tensor d = oracle::random_matrix(rng, 2, 2);
  m.levels[0].replicas[0].transitions[0].weight = d;
  m.levels[1].replicas[0].transitions[0].weight = d;
  EXPECT_EQ(consistency_gap(m, 0), 0.0);

  const Tensor dl = oracle::random_matrix(rng, 2, 2), du = oracle::random_matrix(rng, 2, 2);
  const Tensor h = oracle::random_matrix(rng, 2, 2);
  m.levels[0].replicas[0].transitions[0].weight = dl;
  m.levels[1].replicas[0].transitions[0].weight = du;
  m.hierarchical[0].weight = h;
  const Tensor& x = m.levels[1].replicas[0].state.orders[0].mu;
  const Tensor a = oracle::naive_matmul(oracle::naive_matmul(dl, h), x);
  const Tensor b = oracle::naive_matmul(oracle::naive_matmul(h, du), x);
  EXPECT_NEAR(consistency_gap(m, 0), std::hypot(a[0] - b[0], a[1] - b[1]), 1e-14);
  EXPECT_THROW(consistency_gap(m, 1), std::out_of_range);
}

TEST(TotalFreeEnergy, Examples) {
  ModelConfig c;
  c.levels = 2;
  c.orders = 1;
  c.widths = {2, 3};
  Model m = build(c);
  // Fresh model: one derivative channel per level and two hierarchical channels, all zero.
  const double base = (2 + 3 + 2 * 2) * kHalfLog2Pi;
  EXPECT_NEAR(total_free_energy(m), base, 1e-12);
  m.levels[0].replicas[0].state.orders[1].mu = Tensor::column({0.0, 0.0});
  m.hierarchical[0].weight = Tensor(2, 3);
  m.levels[1].replicas[0].state.orders[0].mu = Tensor::column({0, 0, 0});
  m.levels[0].replicas[0].state.orders[0].mu = Tensor::column({1.0, 2.0});
  // Only H(0, 0) and D(0, 0) see the nonzero state.
  const Tensor& w = m.levels[0].replicas[0].transitions[0].weight;
  const Tensor x = Tensor::column({1.0, 2.0});
  Tensor dd = oracle::naive_matmul(w, x);
  for (std::size_t i = 0; i < 2; ++i) dd[i] -= x[i];
  EXPECT_NEAR(total_free_energy(m), base + 0.5 * 5.0 + 0.5 * oracle::quad(dd, Tensor::identity(2)), 1e-12);
}

TEST(TotalFreeEnergy, EqualsTheStepReportSum) {
  ModelConfig c;
  c.levels = 2;
  c.widths = {1, 2};
  Model m = build(c);
  const Sequence s = sine(12, 20);
  for (const auto& obs : s.samples) {
    const auto r = step(m, obs, {false, false});
    double sum = 0.0;
    for (const auto& ch : r.channels) sum += ch.energy;
    EXPECT_NEAR(r.total_free_energy, sum, 1e-9);
    EXPECT_NEAR(total_free_energy(m), r.total_free_energy, 1e-9);
  }
}

TEST(Train, PrecisionInvariantsHoldAfterTraining) {
  ModelConfig c;
  c.levels = 2;
  c.widths = {1, 2};
  c.eta_pi = 0.05;
  Model m = build(c);
  train(m, sine(10, 400), 1);
  const std::string text = checkpoint_text(m);
  EXPECT_NO_THROW(checkpoint_from_json(Json::parse(text)));
}

TEST(NormalizedMse, UsesTheLastQuarter) {
  TrainTrace trace;
  for (int i = 0; i < 8; ++i) {
    StepReport r;
    if (i != 3) r.prediction_error_sq = i < 5 ? 100.0 : 0.5;
    trace.steps.push_back(r);
  }
  Sequence s;
  for (double v : {1.0, -1.0}) s.samples.push_back(Tensor::column({v}));
  EXPECT_DOUBLE_EQ(normalized_mse(trace, s), 0.5);
}

}  // namespace
}  // namespace gpc
