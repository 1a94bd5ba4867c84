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

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "gpc/autodiff.hpp"
#include "gpc/dynamics.hpp"
#include "gpc/layer.hpp"
#include "gpc/parallel.hpp"
#include "gpc/signal.hpp"

namespace gpc {

struct ModelConfig {
  int levels = 1;                                // L
  int orders = 2;                                // K; orders 0..K exist
  std::vector<std::size_t> widths{1};            // per level, widths[0] = observation dimension
  int replicas = 1;                              // R per level
  std::vector<std::vector<int>> stride_candidates;  // per level; empty means {1..R}
  std::vector<std::vector<int>> initial_strides;    // per level; empty means drawn from the prior
  double stride_noise = 0.0;
  Activation activation = Activation::linear;
  double eta_mu = 0.1;
  double eta_theta = 0.005;
  double eta_pi = 0.001;
  int settle_iterations = 20;  // M
  int epochs = 1;
  std::uint64_t seed = 0;
  std::size_t replica_window = 100;
  double resample_ratio = 2.0;
  double init_scale = 0.1;
  Execution execution = Execution::parallel;

  /// Throws ConfigError naming the offending field.
  void validate() const;
  std::size_t order_count() const { return static_cast<std::size_t>(orders) + 1; }
  /// Stride prior of a level after applying the defaults.
  StridePrior prior(int level) const;
};

struct Model {
  ModelConfig config;
  std::vector<ReplicaSet> levels;
  std::vector<PredictionWeights> hierarchical;  // [l] predicts level l from level l + 1
  std::vector<std::vector<Precision>> hierarchical_precisions;  // [l][k]
  std::uint64_t step_count = 0;
  std::uint64_t clock = 0;  // base-sample index within the current pass
};

struct ChannelKey {
  int level = 0;
  int replica = 0;  // best replica of `level` for hierarchical channels
  int order = 0;
  Channel channel = Channel::transition;

  auto operator<=>(const ChannelKey&) const = default;
};

struct ChannelReport {
  ChannelKey key;
  int stride = 1;
  double error_norm = 0.0;
  double xi_norm = 0.0;
  double energy = 0.0;
  Tensor epsilon;
};

struct LevelReport {
  int active_stride = 1;  // stride of the best replica
  double error_sum = 0.0;  // plain sum of the best replica's channel error norms
};

struct StepReport {
  std::uint64_t step = 0;
  std::uint64_t clock = 0;
  std::vector<ChannelReport> channels;
  std::vector<LevelReport> levels;
  double total_free_energy = 0.0;
  /// Squared one-step error of the best level-0 replica, when it predicted.
  std::optional<double> prediction_error_sq;
  std::vector<double> settle_energies;  // total energy before and after each settle iteration
  std::vector<Tensor> best_states;      // level-0 best replica, orders 0..K, after settling
};

struct StepOptions {
  bool learn_weights = true;
  bool learn_precisions = true;
};

/// Deterministic given config.seed.
Model build(const ModelConfig& config);

/// Clamp, settle, learn, record. See StepOptions for freezing parameters.
StepReport step(Model& model, const Tensor& observation, StepOptions options = {});

/// Clamps the observation and marks the replicas sampled at the current clock
/// tick; the first phase of step.
void clamp(Model& model, const Tensor& observation);
/// Settling phase only; returns the total energy after each iteration,
/// starting with the energy before the first.
std::vector<double> settle(Model& model, int iterations);

/// Learning phase: one guarded step per weight matrix from the current
/// states, then one covariance update per channel from `channels` (the
/// errors reported after settling).
void update_parameters(Model& model, const std::vector<ChannelReport>& channels, StepOptions options = {});

struct TrainTrace {
  std::vector<StepReport> steps;
  std::vector<ReplicaDecision> decisions;
};

/// epochs passes over the sequence; each pass restarts the clock.
TrainTrace train(Model& model, const Sequence& sequence, int epochs);
TrainTrace train(Model& model, const Sequence& sequence);

/// Mean squared one-step error over the last `fraction` of the steps that
/// carried a prediction, divided by the sequence variance.
double normalized_mse(const TrainTrace& trace, const Sequence& sequence, double fraction = 0.25);

/// Closed-loop predictions for `horizon` strides of the top level.
std::vector<Tensor> predict_rollout(const Model& model, int horizon);

/// Rollout shared with the planner: action i (zero vector for none) is added
/// to the top-level state before its transition; lower levels are read out
/// through the hierarchical predictions.
std::vector<Tensor> closed_loop_rollout(const Model& model, int horizon,
                                        const std::vector<Tensor>& actions);

/// |d_l(h_l(x_{l+1})) - h_l(d_{l+1}(x_{l+1}))| for the order-0 states of the
/// best replicas.
double consistency_gap(const Model& model, int level);

/// Sum of channel energies at the current states and parameters.
double total_free_energy(const Model& model);

/// Current channel errors, keyed as in StepReport.
std::vector<ChannelReport> channel_errors(const Model& model);

}  // namespace gpc
