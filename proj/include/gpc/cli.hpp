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

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "gpc/config.hpp"
#include "gpc/network.hpp"
#include "gpc/signal.hpp"

namespace gpc::cli {

enum ExitCode : int { kOk = 0, kCheckFailure = 1, kConfigError = 2, kIoError = 3 };

inline constexpr const char* kMetricsHeader =
    "step,level,order,channel,stride,error_norm,xi_norm,energy,total_free_energy";
inline constexpr const char* kRolloutHeader = "step,time,dim,predicted,actual";
inline constexpr const char* kSweepHeader = "stride,mean_abs_e_d,mean_abs_e_h,order2_state_variance";
inline constexpr const char* kPlanHeader = "policy,actions,horizon,score,selected";

/// Union of every command's settings. Fields a command does not use are
/// accepted and ignored; unknown fields are rejected.
struct RunConfig {
  std::optional<SequenceConfig> sequence;
  ModelConfig model;
  int horizon = 10;
  std::optional<int> context;  // eval: samples used for inference before the rollout
  std::vector<int> strides;
  std::string checkpoint;
  std::vector<std::vector<double>> actions;
  std::vector<int> lengths{1};
  std::vector<int> horizons;
  std::vector<std::vector<double>> goal_trajectory;
  std::vector<double> goal;
  std::optional<Tensor> goal_precision;  // defaults to the identity
  std::uint64_t seed = 0;
  bool inject_fault = false;
};

RunConfig parse_run_config(const Json& j);
RunConfig load_run_config(const std::filesystem::path& path);

struct Options {
  std::string command;
  std::optional<std::filesystem::path> config;
  std::filesystem::path out = ".";
  bool svg = false;
};

/// Runs one command and maps failures to exit codes; messages go to err.
int run(const Options& options, std::ostream& out, std::ostream& err);

// Individual commands; they throw ConfigError / IoError / std::domain_error.
int cmd_generate(const RunConfig& config, const Options& options, std::ostream& out);
int cmd_train(const RunConfig& config, const Options& options, std::ostream& out);
int cmd_eval(const RunConfig& config, const Options& options, std::ostream& out);
int cmd_stride_sweep(const RunConfig& config, const Options& options, std::ostream& out);
int cmd_plan(const RunConfig& config, const Options& options, std::ostream& out);
int cmd_gradcheck(const RunConfig& config, const Options& options, std::ostream& out);

/// One row per (step, channel).
std::string metrics_csv(const TrainTrace& trace);

struct SweepRow {
  int stride = 1;
  double mean_abs_e_d = 0.0;
  double mean_abs_e_h = 0.0;
  double order2_state_variance = 0.0;
};

/// Trains one single-replica model per stride on the same sequence and
/// summarizes the last quarter of the steps.
std::vector<SweepRow> stride_sweep(const ModelConfig& base, const Sequence& sequence,
                                   const std::vector<int>& strides);

}  // namespace gpc::cli
