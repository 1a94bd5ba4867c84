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

#include "gpc/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <fmt/format.h>

#include "gpc/error.hpp"
#include "gpc/kernels.hpp"

namespace gpc {

std::string to_string(Shape shape) { return fmt::format("[{}x{}]", shape.rows, shape.cols); }

std::string to_string(OpKind kind) {
  switch (kind) {
    case OpKind::leaf: return "leaf";
    case OpKind::matmul: return "matmul";
    case OpKind::add: return "add";
    case OpKind::sub: return "sub";
    case OpKind::hadamard: return "hadamard";
    case OpKind::scale: return "scale";
    case OpKind::transpose: return "transpose";
    case OpKind::relu: return "relu";
    case OpKind::sum_of_squares: return "sum_of_squares";
    case OpKind::quadratic_form: return "quadratic_form";
  }
  return "unknown";
}

Tensor::Tensor(std::size_t rows, std::size_t cols, double fill)
    : shape_{rows, cols}, data_(rows * cols, fill) {}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(shape), data_(std::move(data)) {
  if (data_.size() != shape_.size()) {
    throw ShapeError(fmt::format("tensor: {} values do not fill shape {}", data_.size(),
                                 to_string(shape_)));
  }
}

Tensor Tensor::identity(std::size_t n) {
  Tensor t(n, n);
  for (std::size_t i = 0; i < n; ++i) t(i, i) = 1.0;
  return t;
}

Tensor Tensor::column(std::vector<double> values) {
  const std::size_t n = values.size();
  return {Shape{n, 1}, std::move(values)};
}

Tensor Tensor::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r == 0 ? 0 : rows.begin()->size();
  std::vector<double> data;
  data.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) throw ShapeError("tensor: ragged rows in from_rows");
    data.insert(data.end(), row.begin(), row.end());
  }
  return {Shape{r, c}, std::move(data)};
}

double Tensor::item() const {
  if (!is_scalar()) throw ShapeError(fmt::format("item: expected a scalar, got {}", to_string(shape_)));
  return data_[0];
}

std::optional<NodeId> Tensor::node() const {
  if (tape_ == nullptr) return std::nullopt;
  return node_;
}

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

double Tensor::norm() const {
  double acc = 0.0;
  for (double v : data_) acc += v * v;
  return std::sqrt(acc);
}

double Tensor::max_abs() const {
  double m = 0.0;
  for (double v : data_) m = std::max(m, std::abs(v));
  return m;
}

namespace {

[[noreturn]] void shape_mismatch(OpKind op, const Tensor& a, const Tensor& b) {
  throw ShapeError(fmt::format("{}: shape mismatch {} vs {}", to_string(op), to_string(a.shape()),
                               to_string(b.shape())));
}

Tape* common_tape(OpKind op, const Tensor& a, const Tensor* b) {
  Tape* tape = a.tape();
  if (b != nullptr && b->tape() != nullptr) {
    if (tape != nullptr && tape != b->tape()) {
      throw std::logic_error(to_string(op) + ": operands live on different tapes");
    }
    tape = b->tape();
  }
  return tape;
}

Tensor finish(OpKind op, const Tensor& a, const Tensor* b, double factor, Tensor value) {
  Tape* tape = common_tape(op, a, b);
  if (tape == nullptr) return value;
  return tape->record(op, a, b, factor, std::move(value));
}

Tensor raw_matmul(const Tensor& a, const Tensor& b) {
  Tensor out(a.rows(), b.cols());
  kernels::matmul(a.data(), b.data(), out.data(), a.rows(), a.cols(), b.cols());
  return out;
}

Tensor raw_transpose(const Tensor& a) {
  Tensor out(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) out(j, i) = a(i, j);
  return out;
}

template <class Fn>
Tensor elementwise(const Tensor& a, const Tensor& b, Fn fn) {
  Tensor out(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = fn(a[i], b[i]);
  return out;
}

void accumulate(Tensor& into, const Tensor& from) {
  for (std::size_t i = 0; i < into.size(); ++i) into[i] += from[i];
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.rows()) shape_mismatch(OpKind::matmul, a, b);
  return finish(OpKind::matmul, a, &b, 1.0, raw_matmul(a, b));
}

Tensor add(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) shape_mismatch(OpKind::add, a, b);
  return finish(OpKind::add, a, &b, 1.0, elementwise(a, b, [](double x, double y) { return x + y; }));
}

Tensor sub(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) shape_mismatch(OpKind::sub, a, b);
  return finish(OpKind::sub, a, &b, 1.0, elementwise(a, b, [](double x, double y) { return x - y; }));
}

Tensor hadamard(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) shape_mismatch(OpKind::hadamard, a, b);
  return finish(OpKind::hadamard, a, &b, 1.0,
                elementwise(a, b, [](double x, double y) { return x * y; }));
}

Tensor scale(const Tensor& a, double factor) {
  Tensor out = a.detached();
  for (double& v : out.data()) v *= factor;
  return finish(OpKind::scale, a, nullptr, factor, std::move(out));
}

Tensor transpose(const Tensor& a) { return finish(OpKind::transpose, a, nullptr, 1.0, raw_transpose(a)); }

Tensor relu(const Tensor& a) {
  Tensor out = a.detached();
  for (double& v : out.data()) v = v > 0.0 ? v : 0.0;
  return finish(OpKind::relu, a, nullptr, 1.0, std::move(out));
}

Tensor sum_of_squares(const Tensor& a) {
  double acc = 0.0;
  for (double v : a.data()) acc += v * v;
  return finish(OpKind::sum_of_squares, a, nullptr, 1.0, Tensor::scalar(acc));
}

Tensor quadratic_form(const Tensor& e, const Tensor& p) {
  if (e.cols() != 1 || p.rows() != e.rows() || p.cols() != e.rows()) {
    shape_mismatch(OpKind::quadratic_form, e, p);
  }
  const std::size_t n = e.rows();
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < n; ++j) row += p(i, j) * e[j];
    acc += e[i] * row;
  }
  return finish(OpKind::quadratic_form, e, &p, 1.0, Tensor::scalar(acc));
}

Tensor forward_eval(OpKind kind, std::span<const Tensor> inputs, double factor) {
  const auto need = [&](std::size_t n) {
    if (inputs.size() != n) {
      throw std::invalid_argument(
          fmt::format("{}: expected {} inputs, got {}", to_string(kind), n, inputs.size()));
    }
  };
  switch (kind) {
    case OpKind::matmul: need(2); return matmul(inputs[0], inputs[1]);
    case OpKind::add: need(2); return add(inputs[0], inputs[1]);
    case OpKind::sub: need(2); return sub(inputs[0], inputs[1]);
    case OpKind::hadamard: need(2); return hadamard(inputs[0], inputs[1]);
    case OpKind::scale: need(1); return scale(inputs[0], factor);
    case OpKind::transpose: need(1); return transpose(inputs[0]);
    case OpKind::relu: need(1); return relu(inputs[0]);
    case OpKind::sum_of_squares: need(1); return sum_of_squares(inputs[0]);
    case OpKind::quadratic_form: need(2); return quadratic_form(inputs[0], inputs[1]);
    case OpKind::leaf: break;
  }
  throw std::invalid_argument("forward_eval: leaf is not an operation");
}

Tensor Tape::leaf(const Tensor& value) {
  Node node;
  node.kind = OpKind::leaf;
  node.shape = value.shape();
  nodes_.push_back(std::move(node));
  Tensor out = value.detached();
  out.tape_ = this;
  out.node_ = static_cast<NodeId>(nodes_.size() - 1);
  return out;
}

std::vector<NodeId> Tape::leaves() const {
  std::vector<NodeId> ids;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (nodes_[i].kind == OpKind::leaf) ids.push_back(static_cast<NodeId>(i));
  }
  return ids;
}

Tensor Tape::record(OpKind kind, const Tensor& a, const Tensor* b, double factor, Tensor value) {
  Node node;
  node.kind = kind;
  node.parents[0] = a.tape_ == this ? a.node_ : -1;
  node.parents[1] = (b != nullptr && b->tape_ == this) ? b->node_ : -1;
  node.a = a.detached();
  if (b != nullptr) node.b = b->detached();
  node.factor = factor;
  node.shape = value.shape();
  nodes_.push_back(std::move(node));
  value.tape_ = this;
  value.node_ = static_cast<NodeId>(nodes_.size() - 1);
  return value;
}

Gradients Tape::backward(const Tensor& root) const {
  if (root.tape_ != this) throw std::invalid_argument("backward: root is not recorded on this tape");
  if (!root.is_scalar()) {
    throw ShapeError(fmt::format("backward: root must be a scalar, got {}", to_string(root.shape())));
  }

  std::vector<std::optional<Tensor>> adjoint(nodes_.size());
  adjoint[static_cast<std::size_t>(root.node_)] = Tensor::scalar(1.0);

  const auto push = [&adjoint](NodeId parent, Tensor contribution) {
    if (parent < 0) return;
    auto& slot = adjoint[static_cast<std::size_t>(parent)];
    if (slot) {
      accumulate(*slot, contribution);
    } else {
      slot = std::move(contribution);
    }
  };

  for (NodeId id = root.node_; id >= 0; --id) {
    auto& slot = adjoint[static_cast<std::size_t>(id)];
    if (!slot) continue;
    const Node& node = nodes_[static_cast<std::size_t>(id)];
    const Tensor& g = *slot;
    const auto [pa, pb] = node.parents;
    switch (node.kind) {
      case OpKind::leaf:
        break;
      case OpKind::matmul:
        if (pa >= 0) push(pa, raw_matmul(g, raw_transpose(node.b)));
        if (pb >= 0) push(pb, raw_matmul(raw_transpose(node.a), g));
        break;
      case OpKind::add:
        push(pa, g);
        push(pb, g);
        break;
      case OpKind::sub:
        push(pa, g);
        if (pb >= 0) push(pb, scale(g, -1.0));
        break;
      case OpKind::hadamard:
        if (pa >= 0) push(pa, elementwise(g, node.b, [](double x, double y) { return x * y; }));
        if (pb >= 0) push(pb, elementwise(g, node.a, [](double x, double y) { return x * y; }));
        break;
      case OpKind::scale:
        push(pa, scale(g, node.factor));
        break;
      case OpKind::transpose:
        push(pa, raw_transpose(g));
        break;
      case OpKind::relu:
        push(pa, elementwise(g, node.a, [](double x, double y) { return y > 0.0 ? x : 0.0; }));
        break;
      case OpKind::sum_of_squares: {
        Tensor d = scale(node.a, 2.0 * g.item());
        push(pa, std::move(d));
        break;
      }
      case OpKind::quadratic_form: {
        const Tensor& e = node.a;
        const Tensor& p = node.b;
        const double s = g.item();
        const std::size_t n = e.rows();
        if (pa >= 0) {
          // (P + P^T) e
          Tensor d(n, 1);
          for (std::size_t i = 0; i < n; ++i) {
            double acc = 0.0;
            for (std::size_t j = 0; j < n; ++j) acc += (p(i, j) + p(j, i)) * e[j];
            d[i] = s * acc;
          }
          push(pa, std::move(d));
        }
        if (pb >= 0) {
          Tensor d(n, n);
          for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) d(i, j) = s * e[i] * e[j];
          push(pb, std::move(d));
        }
        break;
      }
    }
    if (node.kind != OpKind::leaf) slot.reset();
  }

  Gradients grads;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (nodes_[i].kind != OpKind::leaf) continue;
    const Shape s = nodes_[i].shape;
    grads.emplace(static_cast<NodeId>(i), adjoint[i] ? std::move(*adjoint[i]) : Tensor(s.rows, s.cols));
  }
  return grads;
}

bool GradCheckReport::passed() const {
  return std::all_of(leaves.begin(), leaves.end(),
                     [this](const LeafCheck& c) { return c.max_rel_error <= tolerance; });
}

double GradCheckReport::max_error() const {
  double m = 0.0;
  for (const auto& c : leaves) m = std::max(m, c.max_rel_error);
  return m;
}

GradCheckReport finite_diff_check(std::span<const Tensor> leaf_values, const GraphBuilder& build,
                                  double tolerance, double h) {
  GradCheckReport report;
  report.tolerance = tolerance;
  if (leaf_values.empty()) return report;

  Tape tape;
  std::vector<Tensor> leaves;
  leaves.reserve(leaf_values.size());
  for (const auto& v : leaf_values) leaves.push_back(tape.leaf(v));
  const Tensor root = build(leaves);
  // An untaped root means the graph ignores its leaves: all gradients are zero.
  Gradients grads;
  if (root.is_taped()) grads = tape.backward(root);

  std::vector<Tensor> probe(leaf_values.begin(), leaf_values.end());
  for (auto& p : probe) p = p.detached();
  const auto evaluate = [&]() { return build(probe).item(); };

  for (std::size_t li = 0; li < leaves.size(); ++li) {
    const NodeId id = *leaves[li].node();
    const auto it = grads.find(id);
    LeafCheck check{li, 0.0};
    for (std::size_t i = 0; i < probe[li].size(); ++i) {
      const double original = probe[li][i];
      probe[li][i] = original + h;
      const double up = evaluate();
      probe[li][i] = original - h;
      const double down = evaluate();
      probe[li][i] = original;
      const double numeric = (up - down) / (2.0 * h);
      const double analytic = it == grads.end() ? 0.0 : it->second[i];
      const double denom = std::max({1.0, std::abs(analytic), std::abs(numeric)});
      check.max_rel_error = std::max(check.max_rel_error, std::abs(analytic - numeric) / denom);
    }
    report.leaves.push_back(check);
  }
  return report;
}

}  // namespace gpc
