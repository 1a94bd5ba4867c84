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
#include <filesystem>
#include <string>
#include <vector>

#include "gpc/autodiff.hpp"

namespace gpc {

enum class SignalKind { sine, modulated_sine, csv };

std::string to_string(SignalKind kind);
SignalKind parse_signal_kind(const std::string& name);

/// Test-sequence description. Time is the integer sample index t.
///   sine:            amplitude * sin(2 pi t / period + phase)
///   modulated_sine:  the sine above times sin(2 pi t / envelope_period)
/// Both get additive Gaussian noise of std noise_std drawn from seed.
/// csv reads csv_path instead (one observation of `dimension` fields per row).
struct SequenceConfig {
  SignalKind kind = SignalKind::sine;
  double amplitude = 1.0;
  double period = 10.0;
  double phase = 0.0;
  double envelope_period = 40.0;
  double noise_std = 0.0;
  std::size_t length = 100;
  std::uint64_t seed = 0;
  std::string csv_path;
  std::size_t dimension = 1;

  /// Throws ConfigError naming the first invalid field.
  void validate() const;
};

struct Sequence {
  std::vector<Tensor> samples;  // column vectors of equal length

  std::size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }
  std::size_t dimension() const { return samples.empty() ? 0 : samples.front().rows(); }
  /// Mean over dimensions of the per-dimension population variance.
  double variance() const;
};

/// Noise-free generator value at a possibly fractional time t.
double clean_value(const SequenceConfig& config, double t);

Sequence generate(const SequenceConfig& config);

/// Reads one observation per row, comma-separated, no header.
/// Throws IoError for a missing file and ConfigError for content problems
/// (empty file, non-numeric cell with row/column, ragged rows).
Sequence load_csv(const std::filesystem::path& path, std::size_t dimension);

/// Generates or loads according to config.kind.
Sequence load_sequence(const SequenceConfig& config);

/// CSV text with 17 significant digits per value, so reloading is lossless.
std::string to_csv(const Sequence& sequence);
void write_csv(const Sequence& sequence, const std::filesystem::path& path);

}  // namespace gpc
