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

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "gpc/checkpoint.hpp"
#include "gpc/error.hpp"

namespace gpc {
namespace {

Model trained_model() {
  ModelConfig c;
  c.levels = 2;
  c.widths = {1, 3};
  c.replicas = 2;
  c.stride_candidates = {{1, 2, 5}, {1, 2, 5}};
  c.replica_window = 10;
  c.eta_pi = 0.05;
  Model m = build(c);
  SequenceConfig s;
  s.period = 10;
  s.length = 60;
  train(m, generate(s), 1);
  return m;
}

std::filesystem::path temp_file(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("gpc_checkpoint_" + name);
}

TEST(Checkpoint, RoundTripIsExact) {
  const Model m = trained_model();
  const Json j = checkpoint_to_json(m);
  EXPECT_EQ(j["format_version"], kCheckpointFormatVersion);
  const Model back = checkpoint_from_json(j);
  EXPECT_EQ(checkpoint_text(back), checkpoint_text(m));
  const auto& a = m.levels[1].replicas[0];
  const auto& b = back.levels[1].replicas[0];
  EXPECT_EQ(a.transitions[0].weight.values(), b.transitions[0].weight.values());
  EXPECT_EQ(a.transition_precisions[0].pi().values(), b.transition_precisions[0].pi().values());
  EXPECT_EQ(a.transition_precisions[0].updates(), b.transition_precisions[0].updates());
  EXPECT_EQ(back.step_count, m.step_count);
}

TEST(Checkpoint, RestoredModelContinuesIdentically) {
  Model a = trained_model();
  Model b = checkpoint_from_json(checkpoint_to_json(a));
  const Tensor obs = Tensor::column({0.3});
  EXPECT_EQ(step(a, obs).total_free_energy, step(b, obs).total_free_energy);
  EXPECT_EQ(checkpoint_text(a), checkpoint_text(b));
}

TEST(Checkpoint, FileRoundTrip) {
  const Model m = trained_model();
  const auto path = temp_file("ok.json");
  save_checkpoint(m, path);
  EXPECT_EQ(checkpoint_text(load_checkpoint(path)), checkpoint_text(m));
  std::filesystem::remove(path);
}

TEST(Checkpoint, MalformedInputIsAnIoError) {
  const auto path = temp_file("bad.json");
  {
    std::ofstream f(path);
    f << "{ not json";
  }
  EXPECT_THROW(load_checkpoint(path), IoError);
  EXPECT_THROW(load_checkpoint(temp_file("missing.json")), IoError);
  std::filesystem::remove(path);

  Json j = checkpoint_to_json(trained_model());
  Json wrong_version = j;
  wrong_version["format_version"] = kCheckpointFormatVersion + 1;
  EXPECT_THROW(checkpoint_from_json(wrong_version), IoError);
  Json missing = j;
  missing.erase("weights");
  EXPECT_THROW(checkpoint_from_json(missing), IoError);
  Json bad_shape = j;
  bad_shape["weights"]["hierarchical0"]["shape"] = Json::array({2, 2});
  EXPECT_THROW(checkpoint_from_json(bad_shape), IoError);
  Json bad_precision = j;
  bad_precision["precisions"]["hierarchical0.order0"]["pi"]["data"] = Json::array({5.0});
  EXPECT_THROW(checkpoint_from_json(bad_precision), IoError);
}

}  // namespace
}  // namespace gpc
