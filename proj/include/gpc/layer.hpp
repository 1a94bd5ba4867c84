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
#include <functional>
#include <optional>
#include <span>
#include <string>

#include "gpc/autodiff.hpp"

namespace gpc {

enum class Activation { linear, relu };
enum class Channel { hierarchical, transition, derivative };

std::string to_string(Activation activation);
std::string to_string(Channel channel);
Activation parse_activation(const std::string& name);

struct LayerState {
  Tensor mu;  // column vector
  int level = 0;
  int order = 0;
};

/// Top-down map mu_above -> activation(weight * mu_above).
struct PredictionWeights {
  Tensor weight;
  Activation activation = Activation::linear;
};

/// Precision (inverse covariance) of one error channel, kept together with
/// its covariance. Eigenvalues of pi are held inside
/// [kMinEigenvalue, kMaxEigenvalue] and both matrices are exactly symmetric.
class Precision {
 public:
  static constexpr double kMinEigenvalue = 1e-3;
  static constexpr double kMaxEigenvalue = 1e6;

  Precision() = default;

  static Precision identity(std::size_t n);
  /// Symmetrizes sigma, clips its spectrum and inverts it.
  static Precision from_covariance(const Tensor& sigma, std::size_t updates = 0);
  /// Same from a precision matrix: eigenvalues clipped, then inverted.
  static Precision from_precision(const Tensor& pi, std::size_t updates = 0);
  /// Takes checkpointed matrices as they are. Throws ConfigError if they are
  /// not square, symmetric, mutually inverse or within the eigenvalue bounds.
  static Precision restore(Tensor pi, Tensor sigma, std::size_t updates);

  const Tensor& pi() const { return pi_; }
  const Tensor& sigma() const { return sigma_; }
  std::size_t dim() const { return pi_.rows(); }
  /// Number of covariance updates applied so far.
  std::size_t updates() const { return updates_; }
  /// ln det pi.
  double log_det() const { return log_det_; }

 private:
  Tensor pi_;
  Tensor sigma_;
  double log_det_ = 0.0;
  std::size_t updates_ = 0;
};

struct ErrorChannel {
  Channel channel = Channel::hierarchical;
  Tensor epsilon;

  /// Precision-weighted error pi * epsilon, always recomputed.
  Tensor xi(const Precision& precision) const;
};

Tensor activate(Activation activation, const Tensor& x);

/// activation(weights.weight * mu_above); records on the tape of any taped input.
Tensor predict(const PredictionWeights& weights, const Tensor& mu_above);

/// Laplace energy 0.5 * (e^T pi e - ln det pi + n ln 2 pi).
double layer_energy(const ErrorChannel& eps, const Precision& precision);
/// Taped quadratic part 0.5 * e^T pi e; the constant term carries no gradient.
Tensor quadratic_energy(const Tensor& epsilon, const Precision& precision);
/// 0.5 * (n ln 2 pi - ln det pi).
double energy_offset(const Precision& precision);

inline constexpr int kMaxHalvings = 20;
/// Sufficient-decrease constant for the step-halving guard.
inline constexpr double kArmijo = 0.5;

struct UpdateResult {
  Tensor gradient;
  double step = 0.0;  // rate actually applied (0 if every halving failed)
  int halvings = 0;
  double energy_before = 0.0;
  double energy_after = 0.0;
};

/// Energy as a function of one tensor; must work on taped and untaped input.
using EnergyFn = std::function<Tensor(const Tensor& x)>;

/// x <- x - step * dE/dx with step = rate halved until
/// E(x - step g) <= E(x) - kArmijo * step * |g|^2, at most kMaxHalvings times.
/// If no step qualifies, x is left unchanged.
UpdateResult guarded_descent(Tensor& x, const EnergyFn& energy, double rate);

/// One prediction made by a weight matrix: error = target - f(W input).
struct PredictionTerm {
  const Tensor* target = nullptr;
  const Tensor* input = nullptr;
  const Precision* precision = nullptr;
};

/// Gradient step on the weights against the summed quadratic energy of the
/// given terms. Nothing but weights.weight changes.
UpdateResult update_weights(PredictionWeights& weights, std::span<const PredictionTerm> terms,
                            double rate);
UpdateResult update_weights(PredictionWeights& weights, const Tensor& target, const Tensor& mu_above,
                            const Precision& precision, double rate);

/// Error on the state itself against a top-down prediction: mu - prediction.
struct OwnError {
  const Tensor* prediction = nullptr;
  const Precision* precision = nullptr;
};

/// Error the state generates in the layer below: mu_below - f(W mu).
struct BelowError {
  const PredictionWeights* weights = nullptr;
  const Tensor* mu_below = nullptr;
  const Precision* precision = nullptr;
};

/// mu <- mu - rate * d(E_own + E_below)/dmu with the same halving guard.
/// Either term may be absent (top of the hierarchy, or no layer below).
UpdateResult update_state(Tensor& mu, std::optional<OwnError> own, std::optional<BelowError> below,
                          double rate);

/// Rate used by update_covariance: max(rate, 1 / (updates + 2)). The initial
/// covariance counts as one pseudo-observation, so early updates average
/// the errors seen so far instead of forgetting them at a fixed rate.
double covariance_rate(const Precision& precision, double rate);

/// sigma <- sigma + r (e e^T - sigma), then symmetrize, clip and refresh pi.
void update_covariance(Precision& precision, const Tensor& epsilon, double rate);
void update_covariance(Precision& precision, const ErrorChannel& eps, double rate);

}  // namespace gpc
