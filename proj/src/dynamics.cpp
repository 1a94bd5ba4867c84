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

#include "gpc/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <numeric>

#include "gpc/error.hpp"

namespace gpc {

Stride::Stride(int dt) : dt_(dt) {
  if (dt < 1) throw ConfigError(fmt::format("stride must be >= 1, got {}", dt));
}

StridePrior StridePrior::uniform(std::vector<int> candidates, double noise_scale) {
  StridePrior prior;
  const auto n = candidates.size();
  prior.candidates = std::move(candidates);
  prior.probabilities.assign(n, n == 0 ? 0.0 : 1.0 / static_cast<double>(n));
  prior.noise_scale = noise_scale;
  return prior;
}

void StridePrior::validate() const {
  if (candidates.empty()) throw ConfigError("stride prior: empty candidate set");
  if (probabilities.size() != candidates.size()) {
    throw ConfigError(fmt::format("stride prior: {} candidates but {} probabilities",
                                  candidates.size(), probabilities.size()));
  }
  std::vector<int> sorted = candidates;
  std::sort(sorted.begin(), sorted.end());
  if (sorted.front() < 1) throw ConfigError("stride prior: strides must be >= 1");
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
    throw ConfigError("stride prior: repeated stride");
  }
  double total = 0.0;
  for (double p : probabilities) {
    if (!(p >= 0.0)) throw ConfigError("stride prior: negative probability");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-12) {
    throw ConfigError(fmt::format("stride prior: probabilities sum to {:.17g}", total));
  }
  if (!(noise_scale >= 0.0 && noise_scale <= 1.0)) {
    throw ConfigError("stride prior: noise_scale must be in [0, 1]");
  }
}

StridePrior StridePrior::exclude(std::span<const int> used) const {
  StridePrior out;
  out.noise_scale = noise_scale;
  double kept = 0.0;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (std::find(used.begin(), used.end(), candidates[i]) != used.end()) continue;
    out.candidates.push_back(candidates[i]);
    out.probabilities.push_back(probabilities[i]);
    kept += probabilities[i];
  }
  if (out.candidates.empty()) return out;
  if (kept > 0.0) {
    for (double& p : out.probabilities) p /= kept;
  } else {
    out.probabilities.assign(out.candidates.size(), 1.0 / static_cast<double>(out.candidates.size()));
  }
  return out;
}

GeneralizedState GeneralizedState::zeros(std::size_t width, std::size_t order_count, int level) {
  GeneralizedState s;
  for (std::size_t k = 0; k < order_count; ++k) {
    s.orders.push_back({Tensor::zeros(width, 1), level, static_cast<int>(k)});
  }
  return s;
}

std::optional<double> Replica::windowed_error(std::size_t window) const {
  if (window == 0 || errors.size() < window) return std::nullopt;
  double sum = 0.0;
  for (auto it = errors.end() - static_cast<std::ptrdiff_t>(window); it != errors.end(); ++it) sum += *it;
  return sum / static_cast<double>(window);
}

void Replica::record_error(double score, std::size_t window) {
  errors.push_back(score);
  while (errors.size() > std::max<std::size_t>(window, 1)) errors.pop_front();
}

std::vector<int> ReplicaSet::strides() const {
  std::vector<int> out;
  for (const auto& r : replicas) out.push_back(r.stride.dt());
  return out;
}

Tensor transition(const TransitionWeights& w, const Tensor& x, Stride) {
  return matmul(w.weight, x);
}

Tensor discrete_derivative(const TransitionWeights& w, const Tensor& x, Stride dt) {
  return scale(sub(matmul(w.weight, x), x), 1.0 / static_cast<double>(dt.dt()));
}

DynamicalErrors dynamical_errors(const Tensor& x, const Tensor& x_prev, const Tensor& pred_hier,
                                 const Tensor& pred_deriv, const TransitionWeights& w, Stride dt) {
  return {sub(x, pred_hier), sub(x, transition(w, x_prev, dt)),
          sub(discrete_derivative(w, x, dt), pred_deriv)};
}

Stride sample_stride(const StridePrior& prior, std::mt19937_64& rng) {
  prior.validate();
  std::vector<double> p = prior.probabilities;
  const double uniform = 1.0 / static_cast<double>(p.size());
  for (double& v : p) v = (1.0 - prior.noise_scale) * v + prior.noise_scale * uniform;
  std::discrete_distribution<std::size_t> pick(p.begin(), p.end());
  return Stride(prior.candidates[pick(rng)]);
}

Stride sample_stride(const StridePrior& prior, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return sample_stride(prior, rng);
}

Replica make_replica(std::size_t width, std::size_t order_count, Stride stride, Activation activation,
                     double init_scale, std::mt19937_64& rng) {
  if (width == 0 || order_count == 0) throw ConfigError("replica needs width >= 1 and >= 1 order");
  std::uniform_real_distribution<double> init(-init_scale, init_scale);
  auto random_square = [&] {
    Tensor w(width, width);
    for (double& v : w.data()) v = init(rng);
    return w;
  };
  Replica r;
  r.stride = stride;
  r.state = GeneralizedState::zeros(width, order_count, 0);
  r.previous = r.state;
  for (std::size_t k = 0; k < order_count; ++k) {
    r.transitions.push_back({random_square()});
    r.transition_precisions.push_back(Precision::identity(width));
  }
  for (std::size_t k = 0; k + 1 < order_count; ++k) {
    r.derivative_predictors.push_back({random_square(), activation});
    r.derivative_precisions.push_back(Precision::identity(width));
  }
  return r;
}

ReplicaDecision manage_replicas(ReplicaSet& set, std::size_t window, double ratio,
                                const StridePrior& prior, std::mt19937_64& rng,
                                const ReplicaFactory& fresh) {
  if (set.replicas.empty()) throw std::logic_error("manage_replicas: empty replica set");
  ReplicaDecision decision{set.best, std::nullopt, std::nullopt};
  if (set.replicas.size() == 1) {
    set.best = 0;
    decision.best = 0;
    return decision;
  }
  std::vector<double> score(set.replicas.size());
  for (std::size_t i = 0; i < set.replicas.size(); ++i) {
    const auto s = set.replicas[i].windowed_error(window);
    if (!s) return decision;
    score[i] = *s;
  }
  std::vector<std::size_t> order(set.replicas.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (score[a] != score[b]) return score[a] < score[b];
    if (set.replicas[a].stride != set.replicas[b].stride) {
      return set.replicas[a].stride < set.replicas[b].stride;
    }
    return a < b;
  });
  const std::size_t best = order.front();
  const std::size_t worst = order.back();
  set.best = best;
  decision.best = best;
  if (worst == best || !(score[worst] > ratio * score[best])) return decision;

  const std::vector<int> used = set.strides();
  const StridePrior remaining = prior.exclude(used);
  if (remaining.candidates.empty()) return decision;
  const Stride stride = sample_stride(remaining, rng);
  set.replicas[worst] = fresh(stride);
  decision.resampled = worst;
  decision.new_stride = stride;
  return decision;
}

}  // namespace gpc
