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

#include "gpc/error.hpp"
#include "gpc/layer.hpp"
#include "oracles.hpp"

namespace gpc {
namespace {

const double kHalfLog2Pi = 0.5 * std::log(2.0 * std::numbers::pi);

void expect_invariants(const Precision& p) {
  const std::size_t n = p.dim();
  Eigen::MatrixXd pi(n, n), sigma(n, n);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < n; ++c) {
      pi(r, c) = p.pi()(r, c);
      sigma(r, c) = p.sigma()(r, c);
      EXPECT_LE(std::abs(p.pi()(r, c) - p.pi()(c, r)), 1e-9);
    }
  }
  EXPECT_LE((pi * sigma - Eigen::MatrixXd::Identity(n, n)).cwiseAbs().maxCoeff(), 1e-6);
  const Eigen::VectorXd lambda = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(pi).eigenvalues();
  EXPECT_GE(lambda.minCoeff(), Precision::kMinEigenvalue * (1 - 1e-9));
  EXPECT_LE(lambda.maxCoeff(), Precision::kMaxEigenvalue * (1 + 1e-9));
  EXPECT_NEAR(p.log_det(), std::log(pi.determinant()), 1e-8 * std::max(1.0, std::abs(p.log_det())));
}

TEST(Predict, Examples) {
  EXPECT_EQ(predict({Tensor::identity(2), Activation::linear}, Tensor::column({0.3, -0.2})).values(),
            (std::vector<double>{0.3, -0.2}));
  EXPECT_EQ(predict({Tensor::from_rows({{1, 1}}), Activation::relu}, Tensor::column({-2, 1})).values(),
            (std::vector<double>{0.0}));
  const Tensor w = Tensor::from_rows({{0.5, 0.0}});
  const Tensor x = Tensor::column({1, 0});
  EXPECT_EQ(predict({w, Activation::linear}, x)[0], oracle::naive_matmul(w, x)[0]);
  EXPECT_THROW(predict({Tensor(2, 3), Activation::linear}, Tensor(2, 1)), ShapeError);
}

TEST(LayerEnergy, Examples) {
  EXPECT_NEAR(layer_energy({Channel::hierarchical, Tensor::column({0})}, Precision::identity(1)), kHalfLog2Pi,
              1e-15);
  EXPECT_NEAR(layer_energy({Channel::hierarchical, Tensor::column({2})}, Precision::identity(1)),
              2.0 + kHalfLog2Pi, 1e-15);
  const Precision p = Precision::from_covariance(Tensor::from_rows({{0.5, 0}, {0, 0.5}}));
  const double expected = 0.5 * (4 - 2 * std::log(2.0) + 2 * std::log(2 * std::numbers::pi));
  EXPECT_NEAR(layer_energy({Channel::transition, Tensor::column({1, 1})}, p), expected, 1e-14);
}

TEST(LayerEnergy, MatchesNegativeGaussianLogDensity) {
  std::mt19937_64 rng(2);
  const Tensor sigma = oracle::random_spd(rng, 3);
  const Precision p = Precision::from_covariance(sigma);
  const Tensor e = oracle::random_matrix(rng, 3, 1);
  Eigen::Matrix3d s;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) s(r, c) = sigma(r, c);
  const Eigen::Vector3d v(e[0], e[1], e[2]);
  const double log_density =
      -0.5 * v.dot(s.ldlt().solve(v)) - 0.5 * std::log(s.determinant()) - 1.5 * std::log(2 * std::numbers::pi);
  EXPECT_NEAR(layer_energy({Channel::hierarchical, e}, p), -log_density, 1e-12);
}

TEST(ErrorChannel, XiIsPiTimesEpsilon) {
  const Precision p = Precision::from_covariance(Tensor::from_rows({{2, 1}, {1, 2}}));
  const ErrorChannel e{Channel::derivative, Tensor::column({1, -1})};
  EXPECT_LT(oracle::max_abs_diff(e.xi(p), oracle::naive_matmul(p.pi(), e.epsilon)), 1e-15);
}

TEST(UpdateWeights, ScalarExample) {
  PredictionWeights w{Tensor::from_rows({{0.5}}), Activation::linear};
  const auto r = update_weights(w, Tensor::column({1.0}), Tensor::column({1.0}), Precision::identity(1), 0.1);
  EXPECT_NEAR(w.weight[0], 0.55, 1e-15);
  EXPECT_NEAR(r.gradient[0], -0.5, 1e-15);
  const Tensor fd = oracle::numeric_gradient(
      [](const Tensor& x) { return 0.5 * std::pow(1.0 - x[0], 2); }, Tensor::from_rows({{0.5}}));
  EXPECT_NEAR(r.gradient[0], fd[0], 1e-9);
}

TEST(UpdateWeights, ZeroErrorLeavesWeights) {
  PredictionWeights w{Tensor::from_rows({{0.5, -0.25}}), Activation::linear};
  const Tensor mu = Tensor::column({2, 4});
  const Tensor before = w.weight;
  update_weights(w, Tensor::column({0.0}), mu, Precision::identity(1), 0.3);
  EXPECT_EQ(w.weight.values(), before.values());
}

TEST(UpdateWeights, ReluBlocksNegativePreActivation) {
  PredictionWeights w{Tensor::from_rows({{-1.0, 0.5}}), Activation::relu};
  const Tensor before = w.weight;
  update_weights(w, Tensor::column({1.0}), Tensor::column({1.0, 0.2}), Precision::identity(1), 0.3);
  EXPECT_EQ(w.weight.values(), before.values());
}

TEST(UpdateWeights, DirectionMatchesAnalyticForm) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n_below = 1 + trial % 5, n = 1 + (trial * 3) % 6;
    PredictionWeights w{oracle::random_matrix(rng, n_below, n), Activation::linear};
    const Tensor mu = oracle::random_matrix(rng, n, 1);
    const Tensor target = oracle::random_matrix(rng, n_below, 1);
    const Precision p = Precision::from_covariance(oracle::random_spd(rng, n_below));
    Tensor eps = target;
    const Tensor pred = oracle::naive_matmul(w.weight, mu);
    for (std::size_t i = 0; i < n_below; ++i) eps[i] -= pred[i];
    const Tensor xi = oracle::naive_matmul(p.pi(), eps);
    const auto r = update_weights(w, target, mu, p, 1e-3);
    for (std::size_t i = 0; i < n_below; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        const double analytic = -xi[i] * mu[j];
        EXPECT_LE(std::abs(r.gradient(i, j) - analytic), 1e-10 * std::max(1.0, std::abs(analytic)));
      }
    }
  }
}

TEST(UpdateWeights, SummedTermsMatchFiniteDifferences) {
  std::mt19937_64 rng(10);
  PredictionWeights w{oracle::random_matrix(rng, 2, 3), Activation::relu};
  const Tensor t1 = oracle::random_matrix(rng, 2, 1), t2 = oracle::random_matrix(rng, 2, 1);
  const Tensor x1 = oracle::random_matrix(rng, 3, 1), x2 = oracle::random_matrix(rng, 3, 1);
  const Precision p1 = Precision::from_covariance(oracle::random_spd(rng, 2));
  const Precision p2 = Precision::identity(2);
  const std::vector<PredictionTerm> terms = {{&t1, &x1, &p1}, {&t2, &x2, &p2}};
  const Tensor w0 = w.weight;
  const auto energy = [&](const Tensor& m) {
    double e = 0.0;
    for (const auto& term : terms) {
      Tensor pre = oracle::naive_matmul(m, *term.input);
      Tensor eps = *term.target;
      for (std::size_t i = 0; i < 2; ++i) eps[i] -= std::max(0.0, pre[i]);
      e += 0.5 * oracle::quad(eps, term.precision->pi());
    }
    return e;
  };
  const auto r = update_weights(w, terms, 0.05);
  EXPECT_LT(oracle::max_abs_diff(r.gradient, oracle::numeric_gradient(energy, w0)), 1e-7);
  EXPECT_LE(energy(w.weight), energy(w0));
}

TEST(UpdateState, BothErrorsZeroLeavesState) {
  Tensor mu = Tensor::column({0.4, -0.1});
  const PredictionWeights down{Tensor::from_rows({{1.0, 2.0}}), Activation::linear};
  const Tensor below = predict(down, mu);
  const Tensor prediction = mu;
  const Precision p1 = Precision::identity(1), p2 = Precision::identity(2);
  const Tensor before = mu;
  update_state(mu, OwnError{&prediction, &p2}, BelowError{&down, &below, &p1}, 0.1);
  EXPECT_EQ(mu.values(), before.values());
}

TEST(UpdateState, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 10; ++trial) {
    const PredictionWeights down{oracle::random_matrix(rng, 3, 2), trial % 2 ? Activation::relu : Activation::linear};
    const Tensor below = oracle::random_matrix(rng, 3, 1);
    const Tensor prediction = oracle::random_matrix(rng, 2, 1);
    const Precision p_below = Precision::from_covariance(oracle::random_spd(rng, 3));
    const Precision p_own = Precision::from_covariance(oracle::random_spd(rng, 2));
    const Tensor mu0 = oracle::random_matrix(rng, 2, 1);
    const auto energy = [&](const Tensor& x) {
      Tensor own = x;
      for (std::size_t i = 0; i < 2; ++i) own[i] -= prediction[i];
      Tensor pre = oracle::naive_matmul(down.weight, x);
      Tensor eps = below;
      for (std::size_t i = 0; i < 3; ++i) {
        eps[i] -= down.activation == Activation::relu ? std::max(0.0, pre[i]) : pre[i];
      }
      return 0.5 * oracle::quad(own, p_own.pi()) + 0.5 * oracle::quad(eps, p_below.pi());
    };
    Tensor mu = mu0;
    const auto r = update_state(mu, OwnError{&prediction, &p_own}, BelowError{&down, &below, &p_below}, 0.05);
    EXPECT_LT(oracle::max_abs_diff(r.gradient, oracle::numeric_gradient(energy, mu0)), 1e-7);
    EXPECT_LE(energy(mu), energy(mu0) + 1e-9);
    for (std::size_t i = 0; i < 2; ++i) EXPECT_DOUBLE_EQ(mu[i], mu0[i] - r.step * r.gradient[i]);
  }
}

TEST(UpdateState, DeepestLayerUsesOwnErrorOnly) {
  Tensor mu = Tensor::column({1.0});
  const Tensor prediction = Tensor::column({0.0});
  const Precision p = Precision::identity(1);
  const auto r = update_state(mu, OwnError{&prediction, &p}, std::nullopt, 0.1);
  EXPECT_DOUBLE_EQ(r.gradient[0], 1.0);
  EXPECT_DOUBLE_EQ(mu[0], 0.9);
}

TEST(UpdateState, HalvingGuardPreventsIncrease) {
  std::mt19937_64 rng(14);
  for (int trial = 0; trial < 20; ++trial) {
    const Tensor prediction = oracle::random_matrix(rng, 3, 1);
    const Precision p = Precision::from_covariance(oracle::random_spd(rng, 3, 1e-3));
    Tensor mu = oracle::random_matrix(rng, 3, 1);
    const auto r = update_state(mu, OwnError{&prediction, &p}, std::nullopt, 10.0);
    EXPECT_LE(r.energy_after, r.energy_before + 1e-9);
  }
}

TEST(UpdateCovariance, Examples) {
  Precision p = Precision::identity(1);
  update_covariance(p, Tensor::column({2.0}), 0.5);
  EXPECT_DOUBLE_EQ(p.sigma()[0], 2.5);
  EXPECT_DOUBLE_EQ(p.pi()[0], 0.4);

  Precision q = Precision::from_covariance(Tensor::from_rows({{4.0}}), 50);
  update_covariance(q, Tensor::column({2.0}), 0.1);
  EXPECT_DOUBLE_EQ(q.sigma()[0], 4.0);
}

TEST(UpdateCovariance, WarmUpRateAveragesEarlyErrors) {
  Precision p = Precision::identity(1);
  EXPECT_DOUBLE_EQ(covariance_rate(p, 0.001), 0.5);
  update_covariance(p, Tensor::column({3.0}), 0.001);
  EXPECT_DOUBLE_EQ(p.sigma()[0], 5.0);  // mean of the prior 1 and 9
  EXPECT_NEAR(covariance_rate(p, 0.001), 1.0 / 3.0, 1e-15);
  EXPECT_DOUBLE_EQ(covariance_rate(Precision::from_covariance(Tensor::identity(1), 5000), 0.001), 0.001);
}

TEST(UpdateCovariance, InvariantsHoldAndClipping) {
  std::mt19937_64 rng(20);
  Precision p = Precision::identity(3);
  for (int i = 0; i < 300; ++i) {
    update_covariance(p, oracle::random_matrix(rng, 3, 1, -1e-5, 1e-5), 0.2);
    if (i % 30 == 0) expect_invariants(p);
  }
  expect_invariants(p);
  Precision big = Precision::identity(2);
  for (int i = 0; i < 50; ++i) update_covariance(big, Tensor::column({1e4, -1e4}), 0.5);
  expect_invariants(big);
  const Precision flat = Precision::from_covariance(Tensor::zeros(2, 2));
  EXPECT_NEAR(flat.pi()(0, 0), Precision::kMaxEigenvalue, 1e-6);
}

TEST(UpdateCovariance, ConvergesToSampleSecondMoment) {
  std::mt19937_64 rng(21);
  std::normal_distribution<double> n(0.0, 1.0);
  Precision p = Precision::identity(2);
  Tensor moment(2, 2);
  const int steps = 10000;
  for (int i = 0; i < steps; ++i) {
    const double a = n(rng), b = n(rng);
    const Tensor e = Tensor::column({1.5 * a, 0.5 * a + 0.3 * b});
    for (std::size_t r = 0; r < 2; ++r)
      for (std::size_t c = 0; c < 2; ++c) moment(r, c) += e[r] * e[c] / steps;
    update_covariance(p, e, 1e-4);
  }
  double diff = 0.0, norm = 0.0;
  for (std::size_t i = 0; i < 4; ++i) {
    diff += std::pow(p.sigma()[i] - moment[i], 2);
    norm += moment[i] * moment[i];
  }
  EXPECT_LT(std::sqrt(diff / norm), 0.01);
  expect_invariants(p);
}

TEST(Precision, RestoreValidates) {
  const Precision p = Precision::from_covariance(Tensor::from_rows({{2, 0.5}, {0.5, 1}}), 7);
  const Precision q = Precision::restore(p.pi(), p.sigma(), p.updates());
  EXPECT_EQ(q.pi().values(), p.pi().values());
  EXPECT_EQ(q.updates(), 7u);
  EXPECT_NEAR(q.log_det(), p.log_det(), 1e-12);
  EXPECT_THROW(Precision::restore(Tensor::identity(2), Tensor::from_rows({{2, 0}, {0, 1}}), 0), ConfigError);
  EXPECT_THROW(Precision::restore(Tensor::from_rows({{1, 0.1}, {0, 1}}), Tensor::identity(2), 0), ConfigError);
  EXPECT_THROW(Precision::restore(Tensor::from_rows({{1e7}}), Tensor::from_rows({{1e-7}}), 0), ConfigError);
}

TEST(Precision, FromPrecisionClipsAndInverts) {
  const Precision p = Precision::from_precision(Tensor::from_rows({{4.0, 0.0}, {0.0, 1e9}}));
  EXPECT_NEAR(p.pi()(0, 0), 4.0, 1e-12);
  EXPECT_NEAR(p.pi()(1, 1), Precision::kMaxEigenvalue, 1e-3);
  EXPECT_NEAR(p.sigma()(0, 0), 0.25, 1e-15);
}

}  // namespace
}  // namespace gpc
