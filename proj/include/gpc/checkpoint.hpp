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

#include "gpc/config.hpp"
#include "gpc/network.hpp"

namespace gpc {

inline constexpr int kCheckpointFormatVersion = 1;

/// Everything needed to resume or evaluate a model: config, weights,
/// precisions, states, replica bookkeeping, step and clock.
Json checkpoint_to_json(const Model& model);
/// Throws IoError if the document is not a well-formed checkpoint.
Model checkpoint_from_json(const Json& j);

std::string checkpoint_text(const Model& model);
void save_checkpoint(const Model& model, const std::filesystem::path& path);
Model load_checkpoint(const std::filesystem::path& path);

}  // namespace gpc
