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

#include "gpc/signal.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>
#include <string_view>

#include <fmt/format.h>

#include "gpc/error.hpp"

namespace gpc {

std::string to_string(SignalKind kind) {
  switch (kind) {
    case SignalKind::sine: return "sine";
    case SignalKind::modulated_sine: return "modulated_sine";
    case SignalKind::csv: return "csv";
  }
  return "unknown";
}

SignalKind parse_signal_kind(const std::string& name) {
  if (name == "sine") return SignalKind::sine;
  if (name == "modulated_sine") return SignalKind::modulated_sine;
  if (name == "csv") return SignalKind::csv;
  throw ConfigError(fmt::format("kind: unknown signal kind '{}'", name));
}

void SequenceConfig::validate() const {
  if (kind == SignalKind::csv) {
    if (csv_path.empty()) throw ConfigError("csv_path: required when kind is csv");
    if (dimension == 0) throw ConfigError("dimension: must be >= 1");
    return;
  }
  if (!(period > 0.0) || !std::isfinite(period)) throw ConfigError("period: must be > 0");
  if (length == 0) throw ConfigError("length: must be > 0");
  if (!(noise_std >= 0.0) || !std::isfinite(noise_std)) throw ConfigError("noise_std: must be >= 0");
  if (!std::isfinite(amplitude)) throw ConfigError("amplitude: must be finite");
  if (!std::isfinite(phase)) throw ConfigError("phase: must be finite");
  if (kind == SignalKind::modulated_sine && (!(envelope_period > 0.0) || !std::isfinite(envelope_period))) {
    throw ConfigError("envelope_period: must be > 0 for modulated_sine");
  }
  if (dimension != 1) throw ConfigError("dimension: generated signals are scalar");
}

double Sequence::variance() const {
  if (samples.empty()) return 0.0;
  const std::size_t d = dimension();
  double total = 0.0;
  for (std::size_t j = 0; j < d; ++j) {
    double mean = 0.0;
    for (const auto& s : samples) mean += s[j];
    mean /= static_cast<double>(samples.size());
    double var = 0.0;
    for (const auto& s : samples) var += (s[j] - mean) * (s[j] - mean);
    total += var / static_cast<double>(samples.size());
  }
  return total / static_cast<double>(d);
}

double clean_value(const SequenceConfig& config, double t) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  double value = config.amplitude * std::sin(two_pi * t / config.period + config.phase);
  if (config.kind == SignalKind::modulated_sine) value *= std::sin(two_pi * t / config.envelope_period);
  return value;
}

Sequence generate(const SequenceConfig& config) {
  config.validate();
  if (config.kind == SignalKind::csv) {
    throw ConfigError("kind: csv sequences are loaded, not generated");
  }
  std::mt19937_64 rng(config.seed);
  std::normal_distribution<double> noise(0.0, 1.0);

  Sequence seq;
  seq.samples.reserve(config.length);
  for (std::size_t i = 0; i < config.length; ++i) {
    double value = clean_value(config, static_cast<double>(i));
    if (config.noise_std > 0.0) value += config.noise_std * noise(rng);
    seq.samples.push_back(Tensor::column({value}));
  }
  return seq;
}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

}  // namespace

Sequence load_csv(const std::filesystem::path& path, std::size_t dimension) {
  std::ifstream in(path);
  if (!in) throw IoError(fmt::format("cannot open '{}'", path.string()));

  Sequence seq;
  std::string line;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    const std::string_view text = trim(line);
    if (text.empty()) continue;
    std::vector<double> values;
    std::size_t column = 0;
    std::size_t start = 0;
    while (start <= text.size()) {
      const std::size_t comma = text.find(',', start);
      const std::string_view cell =
          trim(text.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
      ++column;
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (cell.empty() || ec != std::errc() || ptr != cell.data() + cell.size() || !std::isfinite(v)) {
        throw ConfigError(fmt::format("{}: non-numeric cell '{}' at row {}, column {}", path.string(),
                                      std::string(cell), row, column));
      }
      values.push_back(v);
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    if (values.size() != dimension) {
      throw ConfigError(fmt::format("{}: ragged row {} has {} fields, expected {}", path.string(), row,
                                    values.size(), dimension));
    }
    seq.samples.push_back(Tensor::column(std::move(values)));
  }
  if (seq.empty()) throw ConfigError(fmt::format("{}: empty sequence", path.string()));
  return seq;
}

Sequence load_sequence(const SequenceConfig& config) {
  config.validate();
  if (config.kind == SignalKind::csv) return load_csv(config.csv_path, config.dimension);
  return generate(config);
}

std::string to_csv(const Sequence& sequence) {
  std::string out;
  for (const auto& s : sequence.samples) {
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (j > 0) out += ',';
      out += fmt::format("{:.17g}", s[j]);
    }
    out += '\n';
  }
  return out;
}

void write_csv(const Sequence& sequence, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(fmt::format("cannot write '{}'", path.string()));
  out << to_csv(sequence);
  if (!out) throw IoError(fmt::format("write failed for '{}'", path.string()));
}

}  // namespace gpc
