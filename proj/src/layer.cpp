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

#include "gpc/layer.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <numbers>

#include "gpc/error.hpp"

namespace gpc {

namespace {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Matrix to_eigen(const Tensor& t) {
  Matrix m(t.rows(), t.cols());
  for (std::size_t r = 0; r < t.rows(); ++r) {
    for (std::size_t c = 0; c < t.cols(); ++c) m(r, c) = t(r, c);
  }
  return m;
}

Tensor from_eigen(const Matrix& m) {
  Tensor t(m.rows(), m.cols());
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) t(r, c) = m(r, c);
  }
  return t;
}

void symmetrize(Tensor& m) {
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c = r + 1; c < m.cols(); ++c) {
      const double v = 0.5 * (m(r, c) + m(c, r));
      m(r, c) = v;
      m(c, r) = v;
    }
  }
}

void require_square(const Tensor& m, const char* what) {
  if (m.rows() != m.cols() || m.rows() == 0) {
    throw ShapeError(fmt::format("{} must be a non-empty square matrix, got {}", what,
                                 to_string(m.shape())));
  }
}

void require_column(const Tensor& v, std::size_t n, const char* what) {
  if (v.cols() != 1 || v.rows() != n) {
    throw ShapeError(fmt::format("{}: expected {}x1, got {}", what, n, to_string(v.shape())));
  }
}

double sum_squares(const Tensor& t) {
  double s = 0.0;
  for (double v : t.data()) s += v * v;
  return s;
}

}  // namespace

std::string to_string(Activation activation) {
  return activation == Activation::relu ? "relu" : "linear";
}

std::string to_string(Channel channel) {
  switch (channel) {
    case Channel::hierarchical: return "hierarchical";
    case Channel::transition: return "transition";
    case Channel::derivative: return "derivative";
  }
  return "unknown";
}

Activation parse_activation(const std::string& name) {
  if (name == "linear") return Activation::linear;
  if (name == "relu") return Activation::relu;
  throw ConfigError(fmt::format("activation: unknown value '{}' (expected linear or relu)", name));
}

Precision Precision::identity(std::size_t n) {
  Precision p;
  p.pi_ = Tensor::identity(n);
  p.sigma_ = Tensor::identity(n);
  return p;
}

namespace {

// Clips the spectrum of a symmetric matrix m to [lo, hi]; returns the
// clipped matrix, its inverse and the sum of log eigenvalues.
struct Spectrum {
  Tensor matrix;
  Tensor inverse;
  double log_det = 0.0;
};

Spectrum clip_spectrum(const Tensor& m, double lo, double hi, const char* what) {
  require_square(m, what);
  if (!m.all_finite()) throw std::domain_error(fmt::format("{} has non-finite entries", what));
  Tensor s = m.detached();
  symmetrize(s);
  Eigen::SelfAdjointEigenSolver<Matrix> solver(to_eigen(s));
  if (solver.info() != Eigen::Success) throw std::domain_error(fmt::format("{} eigensolver failed", what));
  Eigen::VectorXd lambda = solver.eigenvalues();
  const Matrix& v = solver.eigenvectors();
  Eigen::VectorXd inverse(lambda.size());
  Spectrum out;
  for (Eigen::Index i = 0; i < lambda.size(); ++i) {
    lambda(i) = std::clamp(lambda(i), lo, hi);
    inverse(i) = 1.0 / lambda(i);
    out.log_det += std::log(lambda(i));
  }
  out.matrix = from_eigen(v * lambda.asDiagonal() * v.transpose());
  out.inverse = from_eigen(v * inverse.asDiagonal() * v.transpose());
  symmetrize(out.matrix);
  symmetrize(out.inverse);
  return out;
}

}  // namespace

Precision Precision::from_covariance(const Tensor& sigma, std::size_t updates) {
  Spectrum s = clip_spectrum(sigma, 1.0 / kMaxEigenvalue, 1.0 / kMinEigenvalue, "covariance");
  Precision p;
  p.sigma_ = std::move(s.matrix);
  p.pi_ = std::move(s.inverse);
  p.log_det_ = -s.log_det;
  p.updates_ = updates;
  return p;
}

Precision Precision::from_precision(const Tensor& pi, std::size_t updates) {
  Spectrum s = clip_spectrum(pi, kMinEigenvalue, kMaxEigenvalue, "precision");
  Precision p;
  p.pi_ = std::move(s.matrix);
  p.sigma_ = std::move(s.inverse);
  p.log_det_ = s.log_det;
  p.updates_ = updates;
  return p;
}

Precision Precision::restore(Tensor pi, Tensor sigma, std::size_t updates) {
  require_square(pi, "precision");
  if (sigma.shape() != pi.shape()) {
    throw ConfigError(fmt::format("precision {} and covariance {} differ in shape",
                                  to_string(pi.shape()), to_string(sigma.shape())));
  }
  if (!pi.all_finite() || !sigma.all_finite()) {
    throw ConfigError("precision or covariance has non-finite entries");
  }
  const std::size_t n = pi.rows();
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < n; ++c) {
      if (pi(r, c) != pi(c, r) || sigma(r, c) != sigma(c, r)) {
        throw ConfigError("precision and covariance must be symmetric");
      }
    }
  }
  const Matrix product = to_eigen(pi) * to_eigen(sigma);
  const double residual = (product - Matrix::Identity(n, n)).cwiseAbs().maxCoeff();
  if (residual > 1e-6) {
    throw ConfigError(fmt::format("precision is not the inverse of covariance (residual {:.3g})",
                                  residual));
  }
  Eigen::SelfAdjointEigenSolver<Matrix> solver(to_eigen(pi), Eigen::EigenvaluesOnly);
  double log_det = 0.0;
  for (Eigen::Index i = 0; i < solver.eigenvalues().size(); ++i) {
    const double lambda = solver.eigenvalues()(i);
    if (lambda < kMinEigenvalue * (1 - 1e-9) || lambda > kMaxEigenvalue * (1 + 1e-9)) {
      throw ConfigError(fmt::format("precision eigenvalue {:.6g} outside [{}, {}]", lambda,
                                    kMinEigenvalue, kMaxEigenvalue));
    }
    log_det += std::log(lambda);
  }
  Precision p;
  p.pi_ = std::move(pi);
  p.sigma_ = std::move(sigma);
  p.log_det_ = log_det;
  p.updates_ = updates;
  return p;
}

Tensor ErrorChannel::xi(const Precision& precision) const {
  return matmul(precision.pi(), epsilon.detached());
}

Tensor activate(Activation activation, const Tensor& x) {
  return activation == Activation::relu ? relu(x) : x;
}

Tensor predict(const PredictionWeights& weights, const Tensor& mu_above) {
  return activate(weights.activation, matmul(weights.weight, mu_above));
}

double energy_offset(const Precision& precision) {
  const double n = static_cast<double>(precision.dim());
  return 0.5 * (n * std::log(2.0 * std::numbers::pi) - precision.log_det());
}

Tensor quadratic_energy(const Tensor& epsilon, const Precision& precision) {
  return scale(quadratic_form(epsilon, precision.pi()), 0.5);
}

double layer_energy(const ErrorChannel& eps, const Precision& precision) {
  require_column(eps.epsilon, precision.dim(), "layer_energy");
  return quadratic_energy(eps.epsilon.detached(), precision).item() + energy_offset(precision);
}

UpdateResult guarded_descent(Tensor& x, const EnergyFn& energy, double rate) {
  UpdateResult result;
  Tape tape;
  const Tensor leaf = tape.leaf(x);
  const Tensor root = energy(leaf);
  result.energy_before = root.item();
  result.gradient = root.is_taped() ? tape.backward(root).at(*leaf.node())
                                    : Tensor::zeros(x.rows(), x.cols());
  result.energy_after = result.energy_before;
  const double g2 = sum_squares(result.gradient);
  if (g2 == 0.0 || !std::isfinite(g2)) return result;

  double step = rate;
  for (int h = 0; h <= kMaxHalvings; ++h, step *= 0.5) {
    Tensor candidate = x.detached();
    for (std::size_t i = 0; i < candidate.size(); ++i) candidate[i] -= step * result.gradient[i];
    const double e = energy(candidate).item();
    if (std::isfinite(e) && e <= result.energy_before - kArmijo * step * g2) {
      x = std::move(candidate);
      result.step = step;
      result.halvings = h;
      result.energy_after = e;
      return result;
    }
  }
  result.halvings = kMaxHalvings;
  return result;
}

UpdateResult update_weights(PredictionWeights& weights, std::span<const PredictionTerm> terms,
                            double rate) {
  for (const auto& term : terms) {
    if (term.target == nullptr || term.input == nullptr || term.precision == nullptr) {
      throw std::invalid_argument("update_weights: incomplete prediction term");
    }
    require_column(*term.input, weights.weight.cols(), "update_weights input");
    require_column(*term.target, weights.weight.rows(), "update_weights target");
    require_column(*term.target, term.precision->dim(), "update_weights precision");
  }
  const Activation activation = weights.activation;
  const EnergyFn energy = [&](const Tensor& w) {
    Tensor total = Tensor::scalar(0.0);
    for (const auto& term : terms) {
      const Tensor eps = sub(term.target->detached(),
                             activate(activation, matmul(w, term.input->detached())));
      total = add(total, quadratic_energy(eps, *term.precision));
    }
    return total;
  };
  return guarded_descent(weights.weight, energy, rate);
}

UpdateResult update_weights(PredictionWeights& weights, const Tensor& target, const Tensor& mu_above,
                            const Precision& precision, double rate) {
  const PredictionTerm term{&target, &mu_above, &precision};
  return update_weights(weights, std::span<const PredictionTerm>(&term, 1), rate);
}

UpdateResult update_state(Tensor& mu, std::optional<OwnError> own, std::optional<BelowError> below,
                          double rate) {
  if (mu.cols() != 1) throw ShapeError(fmt::format("state must be a column, got {}", to_string(mu.shape())));
  if (own) require_column(*own->prediction, mu.rows(), "update_state prediction");
  if (below) require_column(*below->mu_below, below->weights->weight.rows(), "update_state below");
  const EnergyFn energy = [&](const Tensor& x) {
    Tensor total = Tensor::scalar(0.0);
    if (own) total = add(total, quadratic_energy(sub(x, own->prediction->detached()), *own->precision));
    if (below) {
      const Tensor eps = sub(below->mu_below->detached(), predict(*below->weights, x));
      total = add(total, quadratic_energy(eps, *below->precision));
    }
    return total;
  };
  return guarded_descent(mu, energy, rate);
}

double covariance_rate(const Precision& precision, double rate) {
  return std::max(rate, 1.0 / (static_cast<double>(precision.updates()) + 2.0));
}

void update_covariance(Precision& precision, const Tensor& epsilon, double rate) {
  const std::size_t n = precision.dim();
  require_column(epsilon, n, "update_covariance");
  if (!(rate > 0.0 && rate <= 1.0)) {
    throw std::invalid_argument(fmt::format("covariance rate must be in (0, 1], got {}", rate));
  }
  const double r = covariance_rate(precision, rate);
  Tensor sigma = precision.sigma().detached();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      sigma(i, j) += r * (epsilon[i] * epsilon[j] - sigma(i, j));
    }
  }
  precision = Precision::from_covariance(sigma, precision.updates() + 1);
}

void update_covariance(Precision& precision, const ErrorChannel& eps, double rate) {
  update_covariance(precision, eps.epsilon, rate);
}

}  // namespace gpc
