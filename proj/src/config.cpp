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

#include "gpc/config.hpp"

#include <fmt/format.h>
#include <fstream>
#include <sstream>

#include "gpc/error.hpp"

namespace gpc {

FieldReader::FieldReader(const Json& object, std::string path)
    : object_(object), path_(std::move(path)) {
  if (!object_.is_object()) throw ConfigError(fmt::format("{}: expected an object", path_));
}

bool FieldReader::has(const std::string& key) const { return object_.contains(key); }

const Json& FieldReader::raw(const std::string& key) {
  seen_.insert(key);
  return object_.at(key);
}

std::string FieldReader::path(const std::string& key) const {
  return path_.empty() ? key : path_ + "." + key;
}

void FieldReader::throw_type(const std::string& key) const {
  throw ConfigError(fmt::format("{}: wrong type ({})", path(key), object_.at(key).type_name()));
}

void FieldReader::finish() const {
  for (const auto& item : object_.items()) {
    if (!seen_.contains(item.key())) throw ConfigError(fmt::format("{}: unknown field", path(item.key())));
  }
}

ModelConfig model_config_from_json(const Json& j, const std::string& path) {
  ModelConfig c;
  FieldReader r(j, path);
  r.get("levels", c.levels);
  r.get("orders", c.orders);
  if (r.has("widths")) {
    r.get("widths", c.widths);
  } else {
    c.widths.assign(static_cast<std::size_t>(std::max(c.levels, 1)), 1);
  }
  r.get("replicas", c.replicas);
  r.get("stride_candidates", c.stride_candidates);
  r.get("initial_strides", c.initial_strides);
  r.get("stride_noise", c.stride_noise);
  std::string activation = to_string(c.activation);
  r.get("activation", activation);
  try {
    c.activation = parse_activation(activation);
  } catch (const ConfigError& e) {
    throw ConfigError(fmt::format("{}.{}", path, e.what()));
  }
  r.get("eta_mu", c.eta_mu);
  r.get("eta_theta", c.eta_theta);
  r.get("eta_pi", c.eta_pi);
  r.get("settle_iterations", c.settle_iterations);
  r.get("epochs", c.epochs);
  r.get("seed", c.seed);
  r.get("replica_window", c.replica_window);
  r.get("resample_ratio", c.resample_ratio);
  r.get("init_scale", c.init_scale);
  std::string execution = c.execution == Execution::serial ? "serial" : "parallel";
  r.get("execution", execution);
  if (execution == "serial") {
    c.execution = Execution::serial;
  } else if (execution == "parallel") {
    c.execution = Execution::parallel;
  } else {
    throw ConfigError(fmt::format("{}: unknown value '{}'", r.path("execution"), execution));
  }
  r.finish();
  try {
    c.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(fmt::format("{}.{}", path, e.what()));
  }
  return c;
}

Json to_json(const ModelConfig& c) {
  return Json{{"levels", c.levels},
              {"orders", c.orders},
              {"widths", c.widths},
              {"replicas", c.replicas},
              {"stride_candidates", c.stride_candidates},
              {"initial_strides", c.initial_strides},
              {"stride_noise", c.stride_noise},
              {"activation", to_string(c.activation)},
              {"eta_mu", c.eta_mu},
              {"eta_theta", c.eta_theta},
              {"eta_pi", c.eta_pi},
              {"settle_iterations", c.settle_iterations},
              {"epochs", c.epochs},
              {"seed", c.seed},
              {"replica_window", c.replica_window},
              {"resample_ratio", c.resample_ratio},
              {"init_scale", c.init_scale},
              {"execution", c.execution == Execution::serial ? "serial" : "parallel"}};
}

SequenceConfig sequence_config_from_json(const Json& j, const std::string& path) {
  SequenceConfig c;
  FieldReader r(j, path);
  std::string kind = to_string(c.kind);
  r.get("kind", kind);
  try {
    c.kind = parse_signal_kind(kind);
  } catch (const ConfigError& e) {
    throw ConfigError(fmt::format("{}.{}", path, e.what()));
  }
  r.get("amplitude", c.amplitude);
  r.get("period", c.period);
  r.get("phase", c.phase);
  r.get("envelope_period", c.envelope_period);
  r.get("noise_std", c.noise_std);
  r.get("length", c.length);
  r.get("seed", c.seed);
  r.get("csv_path", c.csv_path);
  r.get("dimension", c.dimension);
  r.finish();
  try {
    c.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(fmt::format("{}.{}", path, e.what()));
  }
  return c;
}

Json to_json(const SequenceConfig& c) {
  return Json{{"kind", to_string(c.kind)}, {"amplitude", c.amplitude},
              {"period", c.period},        {"phase", c.phase},
              {"envelope_period", c.envelope_period}, {"noise_std", c.noise_std},
              {"length", c.length},        {"seed", c.seed},
              {"csv_path", c.csv_path},    {"dimension", c.dimension}};
}

Json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(fmt::format("cannot open {}", path.string()));
  std::stringstream buffer;
  buffer << in.rdbuf();
  try {
    return Json::parse(buffer.str());
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(fmt::format("{}: invalid JSON: {}", path.string(), e.what()));
  }
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(fmt::format("cannot write {}", path.string()));
  out << text;
  if (!out) throw IoError(fmt::format("write failed for {}", path.string()));
}

}  // namespace gpc
