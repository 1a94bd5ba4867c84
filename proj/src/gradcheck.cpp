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

#include "gpc/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <random>

#include "gpc/autodiff.hpp"
#include "gpc/layer.hpp"

namespace gpc {

bool GradCheckSummary::passed() const { return failures() == 0 && !cases.empty(); }

std::size_t GradCheckSummary::failures() const {
  return static_cast<std::size_t>(
      std::count_if(cases.begin(), cases.end(), [](const GradCheckCase& c) { return !c.passed(); }));
}

namespace {

class Sampler {
 public:
  explicit Sampler(std::uint64_t seed) : rng_(seed) {}

  std::size_t dim() { return std::uniform_int_distribution<std::size_t>(1, 8)(rng_); }
  double value() { return std::uniform_real_distribution<double>(-1.0, 1.0)(rng_); }

  Tensor matrix(std::size_t r, std::size_t c) {
    Tensor t(r, c);
    for (double& v : t.data()) v = value();
    return t;
  }

  // Entries bounded away from the relu kink.
  Tensor away_from_zero(std::size_t r, std::size_t c) {
    Tensor t = matrix(r, c);
    for (double& v : t.data()) {
      while (std::abs(v) < 1e-3) v = value();
    }
    return t;
  }

  Tensor spd(std::size_t n) {
    const Tensor a = matrix(n, n);
    Tensor p = matmul(a, transpose(a));
    for (std::size_t i = 0; i < n; ++i) p(i, i) += 0.5;
    return p;
  }

 private:
  std::mt19937_64 rng_;
};

double relative_error(const Tensor& a, const Tensor& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double denom = std::max({1.0, std::abs(a[i]), std::abs(b[i])});
    worst = std::max(worst, std::abs(a[i] - b[i]) / denom);
  }
  return worst;
}

Tensor corrupt(const Tensor& root, std::span<const Tensor> leaves, bool fault) {
  if (!fault || !leaves.front().is_taped()) return root;
  return add(root, scale(sum_of_squares(leaves.front()), 1e-2));
}

// Scalar reduction with fixed random weights so every output entry matters.
Tensor reduce(const Tensor& out, const Tensor& weights) {
  return sum_of_squares(hadamard(out, weights));
}

void op_cases(Sampler& s, const GradCheckOptions& o, GradCheckSummary& summary) {
  const OpKind ops[] = {OpKind::matmul,    OpKind::add,  OpKind::sub,
                        OpKind::hadamard,  OpKind::scale, OpKind::transpose,
                        OpKind::relu,      OpKind::sum_of_squares, OpKind::quadratic_form};
  for (OpKind op : ops) {
    for (int c = 0; c < o.graphs_per_op; ++c) {
      const std::size_t m = s.dim(), k = s.dim(), n = s.dim();
      std::vector<Tensor> leaves;
      double factor = 1.0;
      switch (op) {
        case OpKind::matmul: leaves = {s.matrix(m, k), s.matrix(k, n)}; break;
        case OpKind::add:
        case OpKind::sub:
        case OpKind::hadamard: leaves = {s.matrix(m, n), s.matrix(m, n)}; break;
        case OpKind::scale:
          leaves = {s.matrix(m, n)};
          factor = 3.0 * s.value();
          break;
        case OpKind::transpose:
        case OpKind::sum_of_squares: leaves = {s.matrix(m, n)}; break;
        case OpKind::relu: leaves = {s.away_from_zero(m, n)}; break;
        case OpKind::quadratic_form: leaves = {s.matrix(m, 1), s.matrix(m, m)}; break;
        case OpKind::leaf: break;
      }
      const Shape out = forward_eval(op, leaves, factor).shape();
      const Tensor weights = s.matrix(out.rows, out.cols);
      const GraphBuilder build = [&](std::span<const Tensor> x) {
        return corrupt(reduce(forward_eval(op, x, factor), weights), x, o.inject_fault);
      };
      const auto report = finite_diff_check(leaves, build, kGraphTolerance);
      summary.cases.push_back({fmt::format("{}#{}", to_string(op), c), report.max_error(), kGraphTolerance});
    }
  }
}

void composite_cases(Sampler& s, const GradCheckOptions& o, GradCheckSummary& summary) {
  for (int c = 0; c < o.composite_graphs; ++c) {
    const std::size_t n_below = s.dim(), n = s.dim();
    const bool relu_layer = c % 2 == 1;
    // Energy of a two-layer chain: hierarchical error below plus the
    // transition error on the state itself.
    Tensor w = s.matrix(n_below, n);
    const Tensor mu = s.matrix(n, 1);
    if (relu_layer) {
      // Keep every pre-activation clear of the kink.
      Tensor pre = matmul(w, mu);
      for (std::size_t i = 0; i < pre.size(); ++i) {
        if (std::abs(pre[i]) < 1e-3) {
          for (std::size_t j = 0; j < n; ++j) w(i, j) += (mu[j] >= 0 ? 1e-2 : -1e-2);
        }
      }
    }
    const std::vector<Tensor> leaves = {w, mu, s.matrix(n, n)};
    const Tensor below = s.matrix(n_below, 1);
    const Tensor prev = s.matrix(n, 1);
    const Tensor p_below = s.spd(n_below);
    const Tensor p_own = s.spd(n);
    const GraphBuilder build = [&](std::span<const Tensor> x) {
      Tensor pred = matmul(x[0], x[1]);
      if (relu_layer) pred = relu(pred);
      const Tensor e_below = sub(below, pred);
      const Tensor e_own = sub(x[1], matmul(x[2], prev));
      const Tensor deriv = sub(matmul(x[2], x[1]), x[1]);
      const Tensor energy = add(add(scale(quadratic_form(e_below, p_below), 0.5),
                                    scale(quadratic_form(e_own, p_own), 0.5)),
                                scale(sum_of_squares(transpose(deriv)), 0.25));
      return corrupt(energy, x, o.inject_fault);
    };
    const auto report = finite_diff_check(leaves, build, kGraphTolerance);
    summary.cases.push_back({fmt::format("composite{}#{}", relu_layer ? "_relu" : "", c), report.max_error(),
                             kGraphTolerance});
  }
}

Tensor taped_gradient(const Tensor& at, const std::function<Tensor(const Tensor&)>& energy, bool fault) {
  Tape tape;
  const Tensor leaf = tape.leaf(at);
  Tensor root = energy(leaf);
  if (fault) root = add(root, scale(sum_of_squares(leaf), 1e-2));
  return tape.backward(root).at(*leaf.node());
}

void layer_cases(Sampler& s, const GradCheckOptions& o, GradCheckSummary& summary) {
  for (int c = 0; c < o.layer_cases; ++c) {
    const std::size_t n_below = s.dim(), n = s.dim();
    const Tensor w = s.matrix(n_below, n);
    const Tensor mu = s.matrix(n, 1);
    const Tensor target = s.matrix(n_below, 1);
    const Precision p = Precision::from_covariance(s.spd(n_below));

    // Weight gradient of 0.5 e^T Pi e with e = target - W mu: -Pi e mu^T.
    const Tensor eps = sub(target, matmul(w, mu));
    const Tensor analytic_w = scale(matmul(matmul(p.pi(), eps), transpose(mu)), -1.0);
    const Tensor taped_w = taped_gradient(
        w, [&](const Tensor& x) { return quadratic_energy(sub(target, matmul(x, mu)), p); }, o.inject_fault);
    summary.cases.push_back({fmt::format("weight_update#{}", c), relative_error(taped_w, analytic_w),
                             kAnalyticTolerance});

    // State gradient of own + below energies:
    // Pi_own (mu - prediction) - W^T Pi_below (below - W mu).
    const Tensor prediction = s.matrix(n, 1);
    const Precision p_own = Precision::from_covariance(s.spd(n));
    const Tensor analytic_mu =
        sub(matmul(p_own.pi(), sub(mu, prediction)), matmul(transpose(w), matmul(p.pi(), eps)));
    const PredictionWeights weights{w, Activation::linear};
    const Tensor taped_mu = taped_gradient(
        mu,
        [&](const Tensor& x) {
          return add(quadratic_energy(sub(x, prediction), p_own),
                     quadratic_energy(sub(target, predict(weights, x)), p));
        },
        o.inject_fault);
    summary.cases.push_back({fmt::format("state_update#{}", c), relative_error(taped_mu, analytic_mu),
                             kAnalyticTolerance});

    // Covariance step: sigma + r (e e^T - sigma), away from the clipping bounds.
    const Tensor e = scale(s.matrix(n_below, 1), 0.5);
    Precision q = Precision::from_covariance(s.spd(n_below), 100);
    const Tensor sigma0 = q.sigma();
    const double rate = 0.05;
    update_covariance(q, e, rate);
    Tensor expected = sigma0;
    for (std::size_t i = 0; i < n_below; ++i) {
      for (std::size_t j = 0; j < n_below; ++j) expected(i, j) += rate * (e[i] * e[j] - sigma0(i, j));
    }
    double err = relative_error(q.sigma(), expected);
    if (o.inject_fault) err += 1.0;
    summary.cases.push_back({fmt::format("covariance_update#{}", c), err, kAnalyticTolerance});
  }
}

}  // namespace

GradCheckSummary run_gradcheck(const GradCheckOptions& options) {
  GradCheckSummary summary;
  Sampler sampler(options.seed);
  op_cases(sampler, options, summary);
  composite_cases(sampler, options, summary);
  layer_cases(sampler, options, summary);
  return summary;
}

}  // namespace gpc
