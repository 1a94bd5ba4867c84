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
#include <string>
#include <vector>

namespace gpc {

struct GradCheckCase {
  std::string name;
  double max_error = 0.0;
  double tolerance = 0.0;
  bool passed() const { return max_error <= tolerance; }
};

struct GradCheckSummary {
  std::vector<GradCheckCase> cases;

  bool passed() const;
  std::size_t failures() const;
};

struct GradCheckOptions {
  std::uint64_t seed = 0;
  int graphs_per_op = 17;
  int composite_graphs = 20;
  int layer_cases = 10;
  /// Negative control: adds a term to every taped graph that the finite
  /// differences never see, so reverse-mode gradients come out wrong.
  bool inject_fault = false;
};

inline constexpr double kGraphTolerance = 1e-6;
inline constexpr double kAnalyticTolerance = 1e-10;

/// Random-graph finite-difference checks for every operation and for
/// composite graphs, then analytic-vs-autodiff checks of the weight and state
/// gradients and of the covariance update.
GradCheckSummary run_gradcheck(const GradCheckOptions& options = {});

}  // namespace gpc
