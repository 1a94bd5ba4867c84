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

#include <array>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace gpc {

struct Shape {
  std::size_t rows = 0;
  std::size_t cols = 0;

  std::size_t size() const { return rows * cols; }
  bool operator==(const Shape&) const = default;
};

std::string to_string(Shape shape);

class Tape;
using NodeId = int;

/// Dense matrix or column vector of doubles, row-major, rank <= 2.
///
/// A tensor optionally refers to a node on a Tape. Operations on taped
/// tensors record themselves on that tape so that Tape::backward can produce
/// exact gradients. The tape must outlive every tensor that refers to it, and
/// the values of a taped tensor must not be modified after recording.
class Tensor {
 public:
  Tensor() = default;
  Tensor(std::size_t rows, std::size_t cols, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data);

  static Tensor zeros(std::size_t rows, std::size_t cols) { return {rows, cols, 0.0}; }
  static Tensor identity(std::size_t n);
  static Tensor column(std::vector<double> values);
  static Tensor scalar(double value) { return {1, 1, value}; }
  static Tensor from_rows(std::initializer_list<std::initializer_list<double>> rows);

  Shape shape() const { return shape_; }
  std::size_t rows() const { return shape_.rows; }
  std::size_t cols() const { return shape_.cols; }
  std::size_t size() const { return data_.size(); }
  bool is_scalar() const { return shape_.rows == 1 && shape_.cols == 1; }

  double operator()(std::size_t r, std::size_t c) const { return data_[r * shape_.cols + c]; }
  double& operator()(std::size_t r, std::size_t c) { return data_[r * shape_.cols + c]; }
  double operator[](std::size_t i) const { return data_[i]; }
  double& operator[](std::size_t i) { return data_[i]; }

  std::span<const double> data() const { return data_; }
  std::span<double> data() { return data_; }
  const std::vector<double>& values() const { return data_; }

  /// Value of a 1x1 tensor.
  double item() const;

  bool is_taped() const { return tape_ != nullptr; }
  std::optional<NodeId> node() const;
  Tape* tape() const { return tape_; }

  /// Copy of the values without any tape reference.
  Tensor detached() const { return {shape_, data_}; }

  bool all_finite() const;
  double norm() const;
  double max_abs() const;

 private:
  friend class Tape;

  Shape shape_;
  std::vector<double> data_;
  Tape* tape_ = nullptr;
  NodeId node_ = -1;
};

enum class OpKind {
  leaf,
  matmul,
  add,
  sub,
  hadamard,
  scale,
  transpose,
  relu,
  sum_of_squares,
  quadratic_form,
};

std::string to_string(OpKind kind);

// Differentiable operations. Each checks shapes and throws ShapeError naming
// the operation and both shapes. The result is recorded on the tape of any
// taped input; mixing tensors from two different tapes is a logic error.
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor hadamard(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
Tensor transpose(const Tensor& a);
/// Elementwise max(0, x); the subgradient at exactly 0 is 0.
Tensor relu(const Tensor& a);
/// Scalar sum of squared entries.
Tensor sum_of_squares(const Tensor& a);
/// Scalar e^T P e for a column vector e of length n and an n x n matrix P.
Tensor quadratic_form(const Tensor& e, const Tensor& p);

/// Dispatches to the operation named by kind. Unary operations use inputs[0];
/// scale uses factor. Leaf is not an operation and is rejected.
Tensor forward_eval(OpKind kind, std::span<const Tensor> inputs, double factor = 1.0);

/// Gradient of a scalar root with respect to each leaf, keyed by leaf node id.
using Gradients = std::map<NodeId, Tensor>;

/// Append-only record of a computation. Parents always precede a node, so the
/// node order is a topological order by construction.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Registers a copy of value as a differentiable leaf.
  Tensor leaf(const Tensor& value);

  std::size_t size() const { return nodes_.size(); }
  std::vector<NodeId> leaves() const;

  /// Reverse sweep from a taped scalar root. Every node is visited at most
  /// once; leaves the root does not depend on get zero gradients.
  Gradients backward(const Tensor& root) const;

  // Used by the operations above; not part of the public surface.
  Tensor record(OpKind kind, const Tensor& a, const Tensor* b, double factor, Tensor value);

 private:
  struct Node {
    OpKind kind = OpKind::leaf;
    std::array<NodeId, 2> parents{-1, -1};
    Tensor a;  // cached input values needed by the reverse rule
    Tensor b;
    double factor = 1.0;
    Shape shape;
  };

  std::vector<Node> nodes_;
};

struct LeafCheck {
  std::size_t leaf = 0;  // position in the leaf list handed to the checker
  double max_rel_error = 0.0;
};

struct GradCheckReport {
  std::vector<LeafCheck> leaves;
  double tolerance = 0.0;

  bool passed() const;
  double max_error() const;
};

/// Builds a scalar-rooted graph from the given leaves. Called with taped
/// leaves once and with untaped perturbed copies for the finite differences.
using GraphBuilder = std::function<Tensor(std::span<const Tensor> leaves)>;

/// Compares reverse-mode gradients against central finite differences with
/// step h. Errors are |analytic - numeric| / max(1, |analytic|, |numeric|).
GradCheckReport finite_diff_check(std::span<const Tensor> leaf_values, const GraphBuilder& build,
                                  double tolerance, double h = 1e-5);

}  // namespace gpc
