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

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "gpc/kernels.hpp"
#include "gpc/network.hpp"
#include "gpc/planner.hpp"

namespace {

gpc::ModelConfig wide_config(gpc::Execution exec) {
  gpc::ModelConfig c;
  c.levels = 3;
  c.orders = 2;
  c.widths = {8, 8, 8};
  c.replicas = 2;
  c.settle_iterations = 20;
  c.execution = exec;
  return c;
}

void BM_Settle(benchmark::State& state) {
  const auto exec = state.range(0) ? gpc::Execution::parallel : gpc::Execution::serial;
  gpc::Model model = gpc::build(wide_config(exec));
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n(0.0, 1.0);
  gpc::Tensor obs(8, 1);
  for (double& v : obs.data()) v = n(rng);
  gpc::clamp(model, obs);
  for (auto _ : state) {
    gpc::Model m = model;
    benchmark::DoNotOptimize(gpc::settle(m, 20));
  }
}
BENCHMARK(BM_Settle)->Arg(0)->Arg(1)->ArgNames({"parallel"});

void BM_PlanScoring(benchmark::State& state) {
  const auto exec = state.range(0) ? gpc::Execution::parallel : gpc::Execution::serial;
  gpc::Model model = gpc::build(wide_config(exec));
  std::vector<gpc::Action> actions;
  for (int a = 0; a < 4; ++a) {
    gpc::Tensor d(8, 1, 0.1 * (a - 1.5));
    actions.push_back({d});
  }
  const auto policies = gpc::enumerate_policies(actions, {4}, {6, 8});
  gpc::Preference pref{{gpc::Tensor(8, 1, 0.5)}, gpc::Precision::identity(8)};
  for (auto _ : state) benchmark::DoNotOptimize(gpc::select_policy(model, policies, pref, exec));
}
BENCHMARK(BM_PlanScoring)->Arg(0)->Arg(1)->ArgNames({"parallel"});

void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(1));
  std::vector<double> a(n * n, 0.5), b(n * n, 0.25), c(n * n);
  for (auto _ : state) {
    if (state.range(0)) {
      gpc::kernels::parallel::matmul(a, b, c, n, n, n);
    } else {
      gpc::kernels::serial::matmul(a, b, c, n, n, n);
    }
    benchmark::DoNotOptimize(c.data());
  }
}
BENCHMARK(BM_Matmul)->ArgsProduct({{0, 1}, {64, 256}})->ArgNames({"parallel", "n"});

}  // namespace

BENCHMARK_MAIN();
