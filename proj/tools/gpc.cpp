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

#include <CLI11.hpp>
#include <iostream>

#include "gpc/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Generalized predictive coding engine"};
  gpc::cli::Options options;
  std::string config;
  std::string out = ".";
  app.add_option("command", options.command, "generate | train | eval | stride-sweep | plan | gradcheck")
      ->required()
      ->check(CLI::IsMember({"generate", "train", "eval", "stride-sweep", "plan", "gradcheck"}));
  app.add_option("--config", config, "JSON run configuration");
  app.add_option("--out", out, "output directory");
  app.add_flag("--svg", options.svg, "also write SVG plots");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : gpc::cli::kConfigError;
  }
  if (!config.empty()) options.config = config;
  options.out = out;
  return gpc::cli::run(options, std::cout, std::cerr);
}
