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

#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "gpc/network.hpp"
#include "gpc/signal.hpp"

namespace gpc {

using Json = nlohmann::json;

/// Reads fields of one JSON object, converting type errors into ConfigError
/// with the dotted field path. finish() rejects any field never asked for.
class FieldReader {
 public:
  FieldReader(const Json& object, std::string path);

  bool has(const std::string& key) const;
  const Json& raw(const std::string& key);
  std::string path(const std::string& key) const;

  template <class T>
  void get(const std::string& key, T& out) {
    if (!has(key)) {
      seen_.insert(key);
      return;
    }
    try {
      out = raw(key).template get<T>();
    } catch (const nlohmann::json::exception&) {
      throw_type(key);
    }
  }

  void finish() const;

 private:
  [[noreturn]] void throw_type(const std::string& key) const;

  const Json& object_;
  std::string path_;
  std::set<std::string> seen_;
};

ModelConfig model_config_from_json(const Json& j, const std::string& path = "model");
Json to_json(const ModelConfig& config);

SequenceConfig sequence_config_from_json(const Json& j, const std::string& path = "sequence");
Json to_json(const SequenceConfig& config);

/// IoError if unreadable, ConfigError if not valid JSON.
Json read_json_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace gpc
