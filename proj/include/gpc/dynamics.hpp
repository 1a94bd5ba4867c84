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

#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "gpc/autodiff.hpp"
#include "gpc/layer.hpp"

namespace gpc {

/// Sampling interval in base samples.
class Stride {
 public:
  explicit Stride(int dt);
  int dt() const { return dt_; }
  auto operator<=>(const Stride&) const = default;

 private:
  int dt_ = 1;
};

/// Linear state transition, one stride ahead.
struct TransitionWeights {
  Tensor weight;
};

/// Categorical prior over admissible strides. noise_scale in [0, 1] blends
/// the probabilities toward uniform before each draw.
struct StridePrior {
  std::vector<int> candidates;
  std::vector<double> probabilities;
  double noise_scale = 0.0;

  static StridePrior uniform(std::vector<int> candidates, double noise_scale = 0.0);

  /// Throws ConfigError on an empty set, non-positive or repeated strides,
  /// or probabilities that do not sum to 1 within 1e-12.
  void validate() const;

  /// Prior restricted to the strides not in `used`, renormalized. The
  /// candidate list of the result is empty if nothing is left.
  StridePrior exclude(std::span<const int> used) const;
};

/// Orders k = 0..K of one layer, all of the same width.
struct GeneralizedState {
  std::vector<LayerState> orders;

  static GeneralizedState zeros(std::size_t width, std::size_t order_count, int level);
  std::size_t order_count() const { return orders.size(); }
  std::size_t width() const { return orders.empty() ? 0 : orders.front().mu.rows(); }
};

/// One instance of a dynamical layer with its own stride.
struct Replica {
  Stride stride{1};
  GeneralizedState state;
  GeneralizedState previous;  // state held from the previous activation
  bool sampled = false;       // activated at least once in this pass
  bool has_previous = false;  // previous is valid
  bool active = true;         // sampled at the current clock tick
  std::vector<TransitionWeights> transitions;            // one per order
  std::vector<PredictionWeights> derivative_predictors;  // order k+1 -> derivative of order k
  std::vector<Precision> transition_precisions;
  std::vector<Precision> derivative_precisions;
  std::deque<double> errors;  // most recent error scores, oldest first

  /// Mean of the last `window` recorded scores; nullopt if fewer exist.
  std::optional<double> windowed_error(std::size_t window) const;
  void record_error(double score, std::size_t window);
};

struct ReplicaSet {
  std::vector<Replica> replicas;
  std::size_t best = 0;

  const Replica& best_replica() const { return replicas.at(best); }
  Replica& best_replica() { return replicas.at(best); }
  std::vector<int> strides() const;
};

/// w * x, the state predicted one stride ahead.
Tensor transition(const TransitionWeights& w, const Tensor& x, Stride dt);

/// (w * x - x) / dt.
Tensor discrete_derivative(const TransitionWeights& w, const Tensor& x, Stride dt);

struct DynamicalErrors {
  Tensor e_h;        // x - pred_hier
  Tensor e_d;        // x - w * x_prev
  Tensor e_d_prime;  // discrete_derivative(w, x, dt) - pred_deriv
};

DynamicalErrors dynamical_errors(const Tensor& x, const Tensor& x_prev, const Tensor& pred_hier,
                                 const Tensor& pred_deriv, const TransitionWeights& w, Stride dt);

Stride sample_stride(const StridePrior& prior, std::uint64_t seed);
Stride sample_stride(const StridePrior& prior, std::mt19937_64& rng);

/// Fresh replica: weights i.i.d. U(-init_scale, init_scale), zero states,
/// identity covariances.
Replica make_replica(std::size_t width, std::size_t order_count, Stride stride, Activation activation,
                     double init_scale, std::mt19937_64& rng);

/// Builds a replacement replica with the given stride.
using ReplicaFactory = std::function<Replica(Stride)>;

struct ReplicaDecision {
  std::size_t best = 0;
  std::optional<std::size_t> resampled;  // index of the reinitialized replica
  std::optional<Stride> new_stride;
};

/// Picks the replica with the lowest windowed error (ties: smaller stride,
/// then lower index) and reinitializes the worst one if its error exceeds
/// ratio times the best's. The replacement stride is drawn from the prior
/// without any stride already in use; if none is left nothing is replaced.
/// Does nothing unless every replica has at least `window` records.
ReplicaDecision manage_replicas(ReplicaSet& set, std::size_t window, double ratio,
                                const StridePrior& prior, std::mt19937_64& rng,
                                const ReplicaFactory& fresh);

}  // namespace gpc
