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

#include "gpc/checkpoint.hpp"

#include <fmt/format.h>

#include "gpc/error.hpp"

namespace gpc {

namespace {

Json tensor_json(const Tensor& t) {
  return Json{{"shape", {t.rows(), t.cols()}}, {"data", t.values()}};
}

Tensor tensor_from(const Json& j, Shape expected, const std::string& name) {
  const auto shape = j.at("shape").get<std::vector<std::size_t>>();
  auto data = j.at("data").get<std::vector<double>>();
  if (shape.size() != 2 || shape[0] != expected.rows || shape[1] != expected.cols ||
      data.size() != expected.size()) {
    throw IoError(fmt::format("checkpoint: {} has shape/size mismatch, expected {}", name,
                              to_string(expected)));
  }
  Tensor t(expected, std::move(data));
  if (!t.all_finite()) throw IoError(fmt::format("checkpoint: {} has non-finite entries", name));
  return t;
}

Json precision_json(const Precision& p) {
  return Json{{"pi", tensor_json(p.pi())}, {"sigma", tensor_json(p.sigma())}, {"updates", p.updates()}};
}

Precision precision_from(const Json& j, std::size_t n, const std::string& name) {
  try {
    return Precision::restore(tensor_from(j.at("pi"), {n, n}, name + ".pi"),
                              tensor_from(j.at("sigma"), {n, n}, name + ".sigma"),
                              j.at("updates").get<std::size_t>());
  } catch (const ConfigError& e) {
    throw IoError(fmt::format("checkpoint: {}: {}", name, e.what()));
  }
}

Json states_json(const GeneralizedState& s) {
  Json out = Json::array();
  for (const auto& o : s.orders) out.push_back(tensor_json(o.mu));
  return out;
}

GeneralizedState states_from(const Json& j, std::size_t width, std::size_t orders, int level,
                             const std::string& name) {
  if (!j.is_array() || j.size() != orders) {
    throw IoError(fmt::format("checkpoint: {} must list {} orders", name, orders));
  }
  GeneralizedState s;
  for (std::size_t k = 0; k < orders; ++k) {
    s.orders.push_back({tensor_from(j[k], {width, 1}, fmt::format("{}[{}]", name, k)), level,
                        static_cast<int>(k)});
  }
  return s;
}

std::string replica_name(std::size_t l, std::size_t r) { return fmt::format("level{}.replica{}", l, r); }

}  // namespace

Json checkpoint_to_json(const Model& model) {
  Json weights = Json::object();
  Json precisions = Json::object();
  Json replicas = Json::array();
  for (std::size_t l = 0; l < model.levels.size(); ++l) {
    const auto& set = model.levels[l];
    Json level = Json{{"best", set.best}, {"replicas", Json::array()}};
    for (std::size_t r = 0; r < set.replicas.size(); ++r) {
      const Replica& rep = set.replicas[r];
      const std::string name = replica_name(l, r);
      for (std::size_t k = 0; k < rep.transitions.size(); ++k) {
        weights[fmt::format("{}.transition{}", name, k)] = tensor_json(rep.transitions[k].weight);
        precisions[fmt::format("{}.transition{}", name, k)] = precision_json(rep.transition_precisions[k]);
      }
      for (std::size_t k = 0; k < rep.derivative_predictors.size(); ++k) {
        weights[fmt::format("{}.derivative{}", name, k)] = tensor_json(rep.derivative_predictors[k].weight);
        precisions[fmt::format("{}.derivative{}", name, k)] = precision_json(rep.derivative_precisions[k]);
      }
      level["replicas"].push_back(Json{{"stride", rep.stride.dt()},
                                       {"sampled", rep.sampled},
                                       {"has_previous", rep.has_previous},
                                       {"active", rep.active},
                                       {"errors", std::vector<double>(rep.errors.begin(), rep.errors.end())},
                                       {"state", states_json(rep.state)},
                                       {"previous", states_json(rep.previous)}});
    }
    replicas.push_back(std::move(level));
  }
  for (std::size_t l = 0; l < model.hierarchical.size(); ++l) {
    weights[fmt::format("hierarchical{}", l)] = tensor_json(model.hierarchical[l].weight);
    for (std::size_t k = 0; k < model.hierarchical_precisions[l].size(); ++k) {
      precisions[fmt::format("hierarchical{}.order{}", l, k)] = precision_json(model.hierarchical_precisions[l][k]);
    }
  }
  return Json{{"format_version", kCheckpointFormatVersion},
              {"config", to_json(model.config)},
              {"weights", std::move(weights)},
              {"precisions", std::move(precisions)},
              {"levels", std::move(replicas)},
              {"step", model.step_count},
              {"clock", model.clock}};
}

Model checkpoint_from_json(const Json& j) {
  try {
    if (!j.is_object()) throw IoError("checkpoint: expected a JSON object");
    const int version = j.at("format_version").get<int>();
    if (version != kCheckpointFormatVersion) {
      throw IoError(fmt::format("checkpoint: unsupported format_version {}", version));
    }
    ModelConfig config;
    try {
      config = model_config_from_json(j.at("config"), "config");
    } catch (const ConfigError& e) {
      throw IoError(fmt::format("checkpoint: {}", e.what()));
    }
    Model model = build(config);
    const Json& weights = j.at("weights");
    const Json& precisions = j.at("precisions");
    const Json& levels = j.at("levels");
    if (!levels.is_array() || levels.size() != model.levels.size()) {
      throw IoError("checkpoint: level count does not match config");
    }
    const std::size_t orders = config.order_count();
    for (std::size_t l = 0; l < model.levels.size(); ++l) {
      auto& set = model.levels[l];
      const std::size_t n = config.widths[l];
      const Json& level = levels[l];
      const Json& reps = level.at("replicas");
      if (!reps.is_array() || reps.size() != set.replicas.size()) {
        throw IoError(fmt::format("checkpoint: level {} replica count does not match config", l));
      }
      set.best = level.at("best").get<std::size_t>();
      if (set.best >= set.replicas.size()) throw IoError("checkpoint: best replica out of range");
      for (std::size_t r = 0; r < set.replicas.size(); ++r) {
        Replica& rep = set.replicas[r];
        const Json& meta = reps[r];
        const std::string name = replica_name(l, r);
        try {
          rep.stride = Stride(meta.at("stride").get<int>());
        } catch (const ConfigError& e) {
          throw IoError(fmt::format("checkpoint: {}: {}", name, e.what()));
        }
        rep.sampled = meta.at("sampled").get<bool>();
        rep.has_previous = meta.at("has_previous").get<bool>();
        rep.active = meta.at("active").get<bool>();
        const auto errors = meta.at("errors").get<std::vector<double>>();
        rep.errors.assign(errors.begin(), errors.end());
        rep.state = states_from(meta.at("state"), n, orders, static_cast<int>(l), name + ".state");
        rep.previous = states_from(meta.at("previous"), n, orders, static_cast<int>(l), name + ".previous");
        for (std::size_t k = 0; k < rep.transitions.size(); ++k) {
          const std::string key = fmt::format("{}.transition{}", name, k);
          rep.transitions[k].weight = tensor_from(weights.at(key), {n, n}, key);
          rep.transition_precisions[k] = precision_from(precisions.at(key), n, key);
        }
        for (std::size_t k = 0; k < rep.derivative_predictors.size(); ++k) {
          const std::string key = fmt::format("{}.derivative{}", name, k);
          rep.derivative_predictors[k].weight = tensor_from(weights.at(key), {n, n}, key);
          rep.derivative_precisions[k] = precision_from(precisions.at(key), n, key);
        }
      }
    }
    for (std::size_t l = 0; l < model.hierarchical.size(); ++l) {
      const std::string key = fmt::format("hierarchical{}", l);
      model.hierarchical[l].weight = tensor_from(weights.at(key), {config.widths[l], config.widths[l + 1]}, key);
      for (std::size_t k = 0; k < orders; ++k) {
        const std::string pkey = fmt::format("{}.order{}", key, k);
        model.hierarchical_precisions[l][k] = precision_from(precisions.at(pkey), config.widths[l], pkey);
      }
    }
    model.step_count = j.at("step").get<std::uint64_t>();
    model.clock = j.at("clock").get<std::uint64_t>();
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw IoError(fmt::format("checkpoint: malformed document: {}", e.what()));
  }
}

std::string checkpoint_text(const Model& model) { return checkpoint_to_json(model).dump(2) + "\n"; }

void save_checkpoint(const Model& model, const std::filesystem::path& path) {
  write_text_file(path, checkpoint_text(model));
}

Model load_checkpoint(const std::filesystem::path& path) {
  Json j;
  try {
    j = read_json_file(path);
  } catch (const ConfigError& e) {
    throw IoError(e.what());
  }
  return checkpoint_from_json(j);
}

}  // namespace gpc
