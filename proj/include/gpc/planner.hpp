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
#include <vector>

#include "gpc/autodiff.hpp"
#include "gpc/layer.hpp"
#include "gpc/network.hpp"
#include "gpc/parallel.hpp"

namespace gpc {

/// Bias added to the top-level state before a rollout step.
struct Action {
  Tensor delta;
};

struct Policy {
  std::vector<std::size_t> indices;  // into the action set
  std::vector<Action> actions;       // a_1..a_n
  int horizon = 1;                   // rollout steps, >= n
};

/// Goal trajectory, or a single terminal goal broadcast over the horizon.
/// Steps past the end of a trajectory reuse its last entry.
struct Preference {
  std::vector<Tensor> goal;
  Precision goal_precision;
};

struct EfeScore {
  double value = 0.0;
  std::vector<double> per_step;  // sums to value
};

inline constexpr std::size_t kMaxPolicies = 1'000'000;

/// Every action sequence of each length, each paired with every horizon that
/// is at least its length. Sorted lexicographically by action indices, then
/// by horizon. Throws ConfigError on an empty action set or lengths, or if
/// |A|^max_length exceeds kMaxPolicies.
std::vector<Policy> enumerate_policies(const std::vector<Action>& actions, const std::vector<int>& lengths,
                                       const std::vector<int>& horizons);

/// Predicted observations for steps 1..horizon; step i uses action
/// a_min(i, n). The model is not modified. Throws std::domain_error if the
/// top-level transition is all zeros (nothing has been learned).
std::vector<Tensor> rollout_policy(const Model& model, const Policy& policy);

/// Risk term only: sum_i 0.5 (y_i - g_i)^T Pi (y_i - g_i), divided by the
/// trajectory length.
EfeScore efe_score(const std::vector<Tensor>& trajectory, const Preference& preference);

struct PolicySelection {
  std::size_t best = 0;  // first policy attaining the minimum
  std::vector<EfeScore> scores;
};

PolicySelection select_policy(const Model& model, const std::vector<Policy>& policies,
                              const Preference& preference, Execution execution = Execution::parallel);

}  // namespace gpc
