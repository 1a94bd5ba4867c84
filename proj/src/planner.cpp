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

#include "gpc/planner.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>

#include "gpc/error.hpp"

namespace gpc {

std::vector<Policy> enumerate_policies(const std::vector<Action>& actions, const std::vector<int>& lengths,
                                       const std::vector<int>& horizons) {
  if (actions.empty()) throw ConfigError("actions: empty action set");
  if (lengths.empty()) throw ConfigError("lengths: empty");
  if (horizons.empty()) throw ConfigError("horizons: empty");
  const int max_length = *std::max_element(lengths.begin(), lengths.end());
  if (*std::min_element(lengths.begin(), lengths.end()) < 1) throw ConfigError("lengths: must be >= 1");
  if (*std::min_element(horizons.begin(), horizons.end()) < 1) throw ConfigError("horizons: must be >= 1");
  if (static_cast<double>(max_length) * std::log(static_cast<double>(actions.size())) >
      std::log(static_cast<double>(kMaxPolicies)) + 1e-12) {
    throw ConfigError(fmt::format("policies: {}^{} exceeds the limit of {}", actions.size(), max_length,
                                  kMaxPolicies));
  }
  std::vector<int> lens = lengths;
  std::sort(lens.begin(), lens.end());
  lens.erase(std::unique(lens.begin(), lens.end()), lens.end());
  std::vector<int> hors = horizons;
  std::sort(hors.begin(), hors.end());
  hors.erase(std::unique(hors.begin(), hors.end()), hors.end());

  std::vector<Policy> out;
  for (int n : lens) {
    std::vector<std::size_t> idx(static_cast<std::size_t>(n), 0);
    while (true) {
      for (int h : hors) {
        if (h < n) continue;
        Policy p;
        p.indices = idx;
        for (std::size_t i : idx) p.actions.push_back(actions[i]);
        p.horizon = h;
        out.push_back(std::move(p));
      }
      std::size_t pos = idx.size();
      while (pos > 0 && ++idx[pos - 1] == actions.size()) idx[--pos] = 0;
      if (pos == 0) break;
    }
  }
  if (out.size() > kMaxPolicies) throw ConfigError("policies: enumeration exceeds the limit");
  std::stable_sort(out.begin(), out.end(), [](const Policy& a, const Policy& b) {
    if (a.indices != b.indices) return a.indices < b.indices;
    return a.horizon < b.horizon;
  });
  return out;
}

std::vector<Tensor> rollout_policy(const Model& model, const Policy& policy) {
  if (policy.actions.empty()) throw ConfigError("policy: no actions");
  if (policy.horizon < static_cast<int>(policy.actions.size())) {
    throw ConfigError("policy: horizon shorter than its action list");
  }
  const Replica& top = model.levels.back().best_replica();
  if (top.transitions[0].weight.max_abs() == 0.0) {
    throw std::domain_error("rollout_policy: top-level transition is zero (untrained model)");
  }
  std::vector<Tensor> steps;
  for (int i = 0; i < policy.horizon; ++i) {
    const std::size_t a = std::min(static_cast<std::size_t>(i), policy.actions.size() - 1);
    steps.push_back(policy.actions[a].delta);
  }
  return closed_loop_rollout(model, policy.horizon, steps);
}

EfeScore efe_score(const std::vector<Tensor>& trajectory, const Preference& preference) {
  if (trajectory.empty()) throw ConfigError("efe_score: empty trajectory");
  if (preference.goal.empty()) throw ConfigError("preference: empty goal");
  const std::size_t n = preference.goal_precision.dim();
  EfeScore score;
  const double norm = 1.0 / static_cast<double>(trajectory.size());
  for (std::size_t i = 0; i < trajectory.size(); ++i) {
    const Tensor& goal = preference.goal[std::min(i, preference.goal.size() - 1)];
    if (trajectory[i].shape() != Shape{n, 1} || goal.shape() != Shape{n, 1}) {
      throw ShapeError(fmt::format("efe_score: step {} has prediction {} and goal {}, precision is {}x{}", i,
                                   to_string(trajectory[i].shape()), to_string(goal.shape()), n, n));
    }
    const Tensor d = sub(trajectory[i], goal);
    score.per_step.push_back(0.5 * quadratic_form(d, preference.goal_precision.pi()).item() * norm);
    score.value += score.per_step.back();
  }
  return score;
}

PolicySelection select_policy(const Model& model, const std::vector<Policy>& policies,
                              const Preference& preference, Execution execution) {
  if (policies.empty()) throw ConfigError("select_policy: no policies");
  PolicySelection sel;
  sel.scores.resize(policies.size());
  for_each_index(execution, policies.size(), [&](std::size_t i) {
    sel.scores[i] = efe_score(rollout_policy(model, policies[i]), preference);
  });
  for (std::size_t i = 1; i < policies.size(); ++i) {
    if (sel.scores[i].value < sel.scores[sel.best].value) sel.best = i;
  }
  return sel;
}

}  // namespace gpc
