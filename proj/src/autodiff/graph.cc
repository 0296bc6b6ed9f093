// Copyright 2026 The wm_policy Authors
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

#include "wmp/autodiff/graph.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "wmp/common/error.h"

namespace wmp::ad {
namespace {

std::string describe(const char* op, const Tensor& a, const Tensor& b) {
  std::ostringstream os;
  os << op << ": incompatible shapes " << shape_string(a.shape()) << " and "
     << shape_string(b.shape());
  return os.str();
}

// Treats rank-1 tensors as rows so mixed-rank inputs compare by rows x cols.
bool same_matrix_shape(const Tensor& a, const Tensor& b) {
  return a.rows() == b.rows() && a.cols() == b.cols();
}

double wrap(double x) {
  if (x > -std::numbers::pi && x <= std::numbers::pi) return x;
  constexpr double kTwoPi = 2.0 * std::numbers::pi;
  double w = std::fmod(x + std::numbers::pi, kTwoPi);
  if (w <= 0.0) w += kTwoPi;
  return w - std::numbers::pi;
}

}  // namespace

const char* op_name(OpKind kind) {
  switch (kind) {
    case OpKind::kConstant:
      return "constant";
    case OpKind::kVariable:
      return "variable";
    case OpKind::kParam:
      return "param";
    case OpKind::kMatMul:
      return "matmul";
    case OpKind::kAdd:
      return "add";
    case OpKind::kSub:
      return "sub";
    case OpKind::kMul:
      return "mul";
    case OpKind::kAddRow:
      return "add_row";
    case OpKind::kMulRow:
      return "mul_row";
    case OpKind::kMulCol:
      return "mul_col";
    case OpKind::kScale:
      return "scale";
    case OpKind::kAddScalar:
      return "add_scalar";
    case OpKind::kElu:
      return "elu";
    case OpKind::kTanh:
      return "tanh";
    case OpKind::kExp:
      return "exp";
    case OpKind::kSquare:
      return "square";
    case OpKind::kAbs:
      return "abs";
    case OpKind::kSin:
      return "sin";
    case OpKind::kCos:
      return "cos";
    case OpKind::kClamp:
      return "clamp";
    case OpKind::kWrapAngle:
      return "wrap_angle";
    case OpKind::kSum:
      return "sum";
    case OpKind::kMean:
      return "mean";
    case OpKind::kRowSum:
      return "row_sum";
    case OpKind::kRowNorm:
      return "row_norm";
    case OpKind::kSliceCols:
      return "slice_cols";
    case OpKind::kConcatCols:
      return "concat_cols";
  }
  return "unknown";
}

const Tensor& Var::value() const { return graph->value(*this); }

const Graph::Node& Graph::node(Var v) const {
  if (v.graph != this || v.id >= nodes_.size()) {
    throw InvalidArgument("variable does not belong to this graph");
  }
  return nodes_[v.id];
}

const Tensor& Graph::node_value(std::uint32_t id) const {
  const Node& n = nodes_[id];
  return n.external ? *n.external : n.value;
}

const Tensor& Graph::value(Var v) const {
  node(v);
  return node_value(v.id);
}

Var Graph::push(Node n) {
  if (backward_done_) {
    throw InvalidArgument("graph is sealed after backward()");
  }
  const Tensor& out = n.external ? *n.external : n.value;
  if (!out.all_finite()) {
    throw NonFiniteError(std::string("non-finite value produced by ") +
                         op_name(n.kind));
  }
  nodes_.push_back(std::move(n));
  return Var{this, static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Var Graph::constant(Tensor value) {
  Node n;
  n.kind = OpKind::kConstant;
  n.value = std::move(value);
  return push(std::move(n));
}

Var Graph::variable(Tensor value) {
  Node n;
  n.kind = OpKind::kVariable;
  n.value = std::move(value);
  n.requires_grad = true;
  return push(std::move(n));
}

Var Graph::param(const ParamStore& store, const std::string& name,
                 bool trainable) {
  if (auto it = params_.find(name); it != params_.end()) {
    if (param_trainable_.at(name) != trainable) {
      throw InvalidArgument("parameter '" + name +
                            "' bound both trainable and frozen");
    }
    return Var{this, it->second};
  }
  Node n;
  n.kind = trainable ? OpKind::kParam : OpKind::kConstant;
  n.external = &store.at(name);
  n.requires_grad = trainable;
  Var v = push(std::move(n));
  params_.emplace(name, v.id);
  param_trainable_.emplace(name, trainable);
  return v;
}

Var Graph::matmul(Var a, Var b) {
  const Tensor& x = value(a);
  const Tensor& y = value(b);
  if (x.cols() != y.rows()) throw ShapeError(describe("matmul", x, y));
  Node n;
  n.kind = OpKind::kMatMul;
  n.a = a.id;
  n.b = b.id;
  n.value = Tensor(x.rows(), y.cols());
  n.value.matrix().noalias() = x.matrix() * y.matrix();
  n.requires_grad = node(a).requires_grad || node(b).requires_grad;
  return push(std::move(n));
}

namespace {
template <typename F>
Tensor zip(const Tensor& x, const Tensor& y, F f) {
  Tensor out(x.rows(), x.cols());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(x[i], y[i]);
  return out;
}
}  // namespace

Var Graph::add(Var a, Var b) {
  const Tensor& x = value(a);
  const Tensor& y = value(b);
  if (!same_matrix_shape(x, y)) throw ShapeError(describe("add", x, y));
  Node n;
  n.kind = OpKind::kAdd;
  n.a = a.id;
  n.b = b.id;
  n.value = zip(x, y, [](double p, double q) { return p + q; });
  n.requires_grad = node(a).requires_grad || node(b).requires_grad;
  return push(std::move(n));
}

Var Graph::sub(Var a, Var b) {
  const Tensor& x = value(a);
  const Tensor& y = value(b);
  if (!same_matrix_shape(x, y)) throw ShapeError(describe("sub", x, y));
  Node n;
  n.kind = OpKind::kSub;
  n.a = a.id;
  n.b = b.id;
  n.value = zip(x, y, [](double p, double q) { return p - q; });
  n.requires_grad = node(a).requires_grad || node(b).requires_grad;
  return push(std::move(n));
}

Var Graph::mul(Var a, Var b) {
  const Tensor& x = value(a);
  const Tensor& y = value(b);
  if (!same_matrix_shape(x, y)) throw ShapeError(describe("mul", x, y));
  Node n;
  n.kind = OpKind::kMul;
  n.a = a.id;
  n.b = b.id;
  n.value = zip(x, y, [](double p, double q) { return p * q; });
  n.requires_grad = node(a).requires_grad || node(b).requires_grad;
  return push(std::move(n));
}

Var Graph::add_row(Var a, Var row) {
  const Tensor& x = value(a);
  const Tensor& r = value(row);
  if (r.rows() != 1 || r.cols() != x.cols()) {
    throw ShapeError(describe("add_row", x, r));
  }
  Node n;
  n.kind = OpKind::kAddRow;
  n.a = a.id;
  n.b = row.id;
  n.value = Tensor(x.rows(), x.cols());
  n.value.matrix() = x.matrix().rowwise() + r.matrix().row(0);
  n.requires_grad = node(a).requires_grad || node(row).requires_grad;
  return push(std::move(n));
}

Var Graph::mul_row(Var a, Var row) {
  const Tensor& x = value(a);
  const Tensor& r = value(row);
  if (r.rows() != 1 || r.cols() != x.cols()) {
    throw ShapeError(describe("mul_row", x, r));
  }
  Node n;
  n.kind = OpKind::kMulRow;
  n.a = a.id;
  n.b = row.id;
  n.value = Tensor(x.rows(), x.cols());
  const std::size_t c = x.cols();
  for (std::size_t i = 0; i < x.rows(); ++i) {
    for (std::size_t j = 0; j < c; ++j) n.value(i, j) = x(i, j) * r[j];
  }
  n.requires_grad = node(a).requires_grad || node(row).requires_grad;
  return push(std::move(n));
}

Var Graph::mul_col(Var a, Var col) {
  const Tensor& x = value(a);
  const Tensor& k = value(col);
  if (k.cols() != 1 || k.rows() != x.rows()) {
    throw ShapeError(describe("mul_col", x, k));
  }
  Node n;
  n.kind = OpKind::kMulCol;
  n.a = a.id;
  n.b = col.id;
  n.value = Tensor(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    for (std::size_t j = 0; j < x.cols(); ++j) n.value(i, j) = x(i, j) * k[i];
  }
  n.requires_grad = node(a).requires_grad || node(col).requires_grad;
  return push(std::move(n));
}

Var Graph::scale(Var a, double s) {
  const Tensor& x = value(a);
  Node n;
  n.kind = OpKind::kScale;
  n.a = a.id;
  n.s0 = s;
  n.value = Tensor(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.size(); ++i) n.value[i] = s * x[i];
  n.requires_grad = node(a).requires_grad;
  return push(std::move(n));
}

Var Graph::add_scalar(Var a, double s) {
  const Tensor& x = value(a);
  Node n;
  n.kind = OpKind::kAddScalar;
  n.a = a.id;
  n.s0 = s;
  n.value = Tensor(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.size(); ++i) n.value[i] = x[i] + s;
  n.requires_grad = node(a).requires_grad;
  return push(std::move(n));
}

Var Graph::unary(OpKind kind, Var a) {
  const Tensor& x = value(a);
  Node n;
  n.kind = kind;
  n.a = a.id;
  n.value = Tensor(x.rows(), x.cols());
  double* out = n.value.data();
  const double* in = x.data();
  const std::size_t size = x.size();
  switch (kind) {
    case OpKind::kElu:
      for (std::size_t i = 0; i < size; ++i) {
        out[i] = in[i] > 0.0 ? in[i] : std::expm1(in[i]);
      }
      break;
    case OpKind::kTanh:
      for (std::size_t i = 0; i < size; ++i) out[i] = std::tanh(in[i]);
      break;
    case OpKind::kExp:
      for (std::size_t i = 0; i < size; ++i) out[i] = std::exp(in[i]);
      break;
    case OpKind::kSquare:
      for (std::size_t i = 0; i < size; ++i) out[i] = in[i] * in[i];
      break;
    case OpKind::kAbs:
      for (std::size_t i = 0; i < size; ++i) out[i] = std::fabs(in[i]);
      break;
    case OpKind::kSin:
      for (std::size_t i = 0; i < size; ++i) out[i] = std::sin(in[i]);
      break;
    case OpKind::kCos:
      for (std::size_t i = 0; i < size; ++i) out[i] = std::cos(in[i]);
      break;
    case OpKind::kWrapAngle:
      for (std::size_t i = 0; i < size; ++i) out[i] = wrap(in[i]);
      break;
    default:
      throw InvalidArgument(std::string("not a unary op: ") + op_name(kind));
  }
  n.requires_grad = node(a).requires_grad;
  return push(std::move(n));
}

Var Graph::elu(Var a) { return unary(OpKind::kElu, a); }
Var Graph::tanh(Var a) { return unary(OpKind::kTanh, a); }
Var Graph::exp(Var a) { return unary(OpKind::kExp, a); }
Var Graph::square(Var a) { return unary(OpKind::kSquare, a); }
Var Graph::abs(Var a) { return unary(OpKind::kAbs, a); }
Var Graph::sin(Var a) { return unary(OpKind::kSin, a); }
Var Graph::cos(Var a) { return unary(OpKind::kCos, a); }
Var Graph::wrap_angle(Var a) { return unary(OpKind::kWrapAngle, a); }

Var Graph::clamp(Var a, double lo, double hi) {
  if (!(lo <= hi)) throw InvalidArgument("clamp: lo > hi");
  const Tensor& x = value(a);
  Node n;
  n.kind = OpKind::kClamp;
  n.a = a.id;
  n.s0 = lo;
  n.s1 = hi;
  n.value = Tensor(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.size(); ++i) {
    n.value[i] = std::min(std::max(x[i], lo), hi);
  }
  n.requires_grad = node(a).requires_grad;
  return push(std::move(n));
}

Var Graph::sum(Var a) {
  const Tensor& x = value(a);
  Node n;
  n.kind = OpKind::kSum;
  n.a = a.id;
  double s = 0.0;
  for (double v : x.values()) s += v;
  n.value = Tensor::scalar(s);
  n.requires_grad = node(a).requires_grad;
  return push(std::move(n));
}

Var Graph::mean(Var a) {
  const Tensor& x = value(a);
  if (x.size() == 0) throw ShapeError("mean of empty tensor");
  Node n;
  n.kind = OpKind::kMean;
  n.a = a.id;
  double s = 0.0;
  for (double v : x.values()) s += v;
  n.value = Tensor::scalar(s / static_cast<double>(x.size()));
  n.requires_grad = node(a).requires_grad;
  return push(std::move(n));
}

Var Graph::row_sum(Var a) {
  const Tensor& x = value(a);
  Node n;
  n.kind = OpKind::kRowSum;
  n.a = a.id;
  n.value = Tensor(x.rows(), 1);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    double s = 0.0;
    for (double v : x.row_span(i)) s += v;
    n.value[i] = s;
  }
  n.requires_grad = node(a).requires_grad;
  return push(std::move(n));
}

Var Graph::row_norm(Var a) {
  const Tensor& x = value(a);
  Node n;
  n.kind = OpKind::kRowNorm;
  n.a = a.id;
  n.value = Tensor(x.rows(), 1);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    double s = 0.0;
    for (double v : x.row_span(i)) s += v * v;
    n.value[i] = std::sqrt(s);
  }
  n.requires_grad = node(a).requires_grad;
  return push(std::move(n));
}

Var Graph::slice_cols(Var a, std::size_t begin, std::size_t count) {
  const Tensor& x = value(a);
  if (begin + count > x.cols()) {
    std::ostringstream os;
    os << "slice_cols: range [" << begin << ", " << begin + count
       << ") exceeds " << x.cols() << " columns";
    throw ShapeError(os.str());
  }
  Node n;
  n.kind = OpKind::kSliceCols;
  n.a = a.id;
  n.begin = begin;
  n.value = Tensor(x.rows(), count);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    for (std::size_t j = 0; j < count; ++j) n.value(i, j) = x(i, begin + j);
  }
  n.requires_grad = node(a).requires_grad;
  return push(std::move(n));
}

Var Graph::concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no inputs");
  const std::size_t rows = value(parts[0]).rows();
  std::size_t cols = 0;
  Node n;
  n.kind = OpKind::kConcatCols;
  for (Var p : parts) {
    const Tensor& x = value(p);
    if (x.rows() != rows) {
      throw ShapeError(describe("concat_cols", value(parts[0]), x));
    }
    cols += x.cols();
    n.parts.push_back(p.id);
    n.requires_grad = n.requires_grad || node(p).requires_grad;
  }
  n.value = Tensor(rows, cols);
  std::size_t offset = 0;
  for (Var p : parts) {
    const Tensor& x = value(p);
    for (std::size_t i = 0; i < rows; ++i) {
      for (std::size_t j = 0; j < x.cols(); ++j) {
        n.value(i, offset + j) = x(i, j);
      }
    }
    offset += x.cols();
  }
  return push(std::move(n));
}

Tensor& Graph::grad_slot(std::uint32_t id) {
  Node& n = nodes_[id];
  if (n.grad.empty()) {
    const Tensor& v = node_value(id);
    n.grad = Tensor(v.rows(), v.cols());
  }
  return n.grad;
}

void Graph::backward(Var loss) {
  const Tensor& root = value(loss);
  if (root.size() != 1) {
    throw ShapeError("backward: root must be a scalar, got shape " +
                     shape_string(root.shape()));
  }
  if (backward_done_) throw InvalidArgument("backward() called twice");
  backward_done_ = true;
  if (!nodes_[loss.id].requires_grad) return;
  grad_slot(loss.id)[0] = 1.0;

  for (std::int64_t id = loss.id; id >= 0; --id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (!n.requires_grad || n.grad.empty()) continue;
    const Tensor& g = n.grad;
    const bool ga = n.a != kNone && nodes_[n.a].requires_grad;
    const bool gb = n.b != kNone && nodes_[n.b].requires_grad;
    switch (n.kind) {
      case OpKind::kConstant:
      case OpKind::kVariable:
      case OpKind::kParam:
        break;
      case OpKind::kMatMul: {
        if (ga) {
          grad_slot(n.a).matrix().noalias() +=
              g.matrix() * node_value(n.b).matrix().transpose();
        }
        if (gb) {
          grad_slot(n.b).matrix().noalias() +=
              node_value(n.a).matrix().transpose() * g.matrix();
        }
        break;
      }
      case OpKind::kAdd:
      case OpKind::kSub: {
        const double sign = n.kind == OpKind::kSub ? -1.0 : 1.0;
        if (ga) {
          Tensor& t = grad_slot(n.a);
          for (std::size_t i = 0; i < g.size(); ++i) t[i] += g[i];
        }
        if (gb) {
          Tensor& t = grad_slot(n.b);
          for (std::size_t i = 0; i < g.size(); ++i) t[i] += sign * g[i];
        }
        break;
      }
      case OpKind::kMul: {
        const Tensor& x = node_value(n.a);
        const Tensor& y = node_value(n.b);
        if (ga) {
          Tensor& t = grad_slot(n.a);
          for (std::size_t i = 0; i < g.size(); ++i) t[i] += g[i] * y[i];
        }
        if (gb) {
          Tensor& t = grad_slot(n.b);
          for (std::size_t i = 0; i < g.size(); ++i) t[i] += g[i] * x[i];
        }
        break;
      }
      case OpKind::kAddRow: {
        if (ga) {
          Tensor& t = grad_slot(n.a);
          for (std::size_t i = 0; i < g.size(); ++i) t[i] += g[i];
        }
        if (gb) {
          grad_slot(n.b).matrix().row(0) += g.matrix().colwise().sum();
        }
        break;
      }
      case OpKind::kMulRow: {
        const Tensor& x = node_value(n.a);
        const Tensor& r = node_value(n.b);
        const std::size_t c = g.cols();
        if (ga) {
          Tensor& t = grad_slot(n.a);
          for (std::size_t i = 0; i < g.rows(); ++i) {
            for (std::size_t j = 0; j < c; ++j) t(i, j) += g(i, j) * r[j];
          }
        }
        if (gb) {
          Tensor& t = grad_slot(n.b);
          for (std::size_t i = 0; i < g.rows(); ++i) {
            for (std::size_t j = 0; j < c; ++j) t[j] += g(i, j) * x(i, j);
          }
        }
        break;
      }
      case OpKind::kMulCol: {
        const Tensor& x = node_value(n.a);
        const Tensor& k = node_value(n.b);
        if (ga) {
          Tensor& t = grad_slot(n.a);
          for (std::size_t i = 0; i < g.rows(); ++i) {
            for (std::size_t j = 0; j < g.cols(); ++j)
              t(i, j) += g(i, j) * k[i];
          }
        }
        if (gb) {
          Tensor& t = grad_slot(n.b);
          for (std::size_t i = 0; i < g.rows(); ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < g.cols(); ++j) s += g(i, j) * x(i, j);
            t[i] += s;
          }
        }
        break;
      }
      case OpKind::kScale: {
        if (ga) {
          Tensor& t = grad_slot(n.a);
          for (std::size_t i = 0; i < g.size(); ++i) t[i] += n.s0 * g[i];
        }
        break;
      }
      case OpKind::kAddScalar:
      case OpKind::kWrapAngle: {
        if (ga) {
          Tensor& t = grad_slot(n.a);
          for (std::size_t i = 0; i < g.size(); ++i) t[i] += g[i];
        }
        break;
      }
      case OpKind::kElu:
      case OpKind::kTanh:
      case OpKind::kExp:
      case OpKind::kSquare:
      case OpKind::kAbs:
      case OpKind::kSin:
      case OpKind::kCos:
      case OpKind::kClamp: {
        if (!ga) break;
        const Tensor& x = node_value(n.a);
        const Tensor& y = n.value;
        Tensor& t = grad_slot(n.a);
        const std::size_t size = g.size();
        switch (n.kind) {
          case OpKind::kElu:
            for (std::size_t i = 0; i < size; ++i) {
              t[i] += g[i] * (x[i] > 0.0 ? 1.0 : y[i] + 1.0);
            }
            break;
          case OpKind::kTanh:
            for (std::size_t i = 0; i < size; ++i) {
              t[i] += g[i] * (1.0 - y[i] * y[i]);
            }
            break;
          case OpKind::kExp:
            for (std::size_t i = 0; i < size; ++i) t[i] += g[i] * y[i];
            break;
          case OpKind::kSquare:
            for (std::size_t i = 0; i < size; ++i) t[i] += 2.0 * g[i] * x[i];
            break;
          case OpKind::kAbs:
            for (std::size_t i = 0; i < size; ++i) {
              const double s = x[i] > 0.0 ? 1.0 : (x[i] < 0.0 ? -1.0 : 0.0);
              t[i] += g[i] * s;
            }
            break;
          case OpKind::kSin:
            for (std::size_t i = 0; i < size; ++i) {
              t[i] += g[i] * std::cos(x[i]);
            }
            break;
          case OpKind::kCos:
            for (std::size_t i = 0; i < size; ++i) {
              t[i] -= g[i] * std::sin(x[i]);
            }
            break;
          case OpKind::kClamp:
            for (std::size_t i = 0; i < size; ++i) {
              if (x[i] >= n.s0 && x[i] <= n.s1) t[i] += g[i];
            }
            break;
          default:
            break;
        }
        break;
      }
      case OpKind::kSum:
      case OpKind::kMean: {
        if (!ga) break;
        Tensor& t = grad_slot(n.a);
        const double scale = n.kind == OpKind::kMean
                                 ? g[0] / static_cast<double>(t.size())
                                 : g[0];
        for (std::size_t i = 0; i < t.size(); ++i) t[i] += scale;
        break;
      }
      case OpKind::kRowSum: {
        if (!ga) break;
        Tensor& t = grad_slot(n.a);
        for (std::size_t i = 0; i < t.rows(); ++i) {
          for (std::size_t j = 0; j < t.cols(); ++j) t(i, j) += g[i];
        }
        break;
      }
      case OpKind::kRowNorm: {
        if (!ga) break;
        const Tensor& x = node_value(n.a);
        Tensor& t = grad_slot(n.a);
        for (std::size_t i = 0; i < t.rows(); ++i) {
          const double norm = n.value[i];
          if (norm <= 0.0) continue;
          const double s = g[i] / norm;
          for (std::size_t j = 0; j < t.cols(); ++j) t(i, j) += s * x(i, j);
        }
        break;
      }
      case OpKind::kSliceCols: {
        if (!ga) break;
        Tensor& t = grad_slot(n.a);
        for (std::size_t i = 0; i < g.rows(); ++i) {
          for (std::size_t j = 0; j < g.cols(); ++j) {
            t(i, n.begin + j) += g(i, j);
          }
        }
        break;
      }
      case OpKind::kConcatCols: {
        std::size_t offset = 0;
        for (std::uint32_t p : n.parts) {
          const std::size_t width = node_value(p).cols();
          if (nodes_[p].requires_grad) {
            Tensor& t = grad_slot(p);
            for (std::size_t i = 0; i < g.rows(); ++i) {
              for (std::size_t j = 0; j < width; ++j) {
                t(i, j) += g(i, offset + j);
              }
            }
          }
          offset += width;
        }
        break;
      }
    }
  }
}

Tensor Graph::grad(Var v) const {
  const Node& n = node(v);
  if (n.grad.empty()) {
    const Tensor& val = node_value(v.id);
    return Tensor(val.rows(), val.cols());
  }
  return n.grad;
}

GradMap Graph::param_grads(const ParamStore& store) const {
  return param_grads(store, std::span<const std::string>());
}

GradMap Graph::param_grads(const ParamStore& store,
                           std::span<const std::string> prefixes) const {
  GradMap out;
  for (const std::string& name : store.names()) {
    if (!prefixes.empty() && std::none_of(prefixes.begin(), prefixes.end(),
                                          [&](const std::string& p) {
                                            return name.starts_with(p);
                                          })) {
      continue;
    }
    const Tensor& value = store.at(name);
    auto it = params_.find(name);
    if (it != params_.end() && !nodes_[it->second].grad.empty()) {
      out.emplace(name, nodes_[it->second].grad.reshaped(value.shape()));
    } else {
      out.emplace(name, Tensor::zeros_like(value));
    }
  }
  return out;
}

std::vector<std::string> Graph::trainable_params() const {
  std::vector<std::string> out;
  for (const auto& [name, trainable] : param_trainable_) {
    if (trainable) out.push_back(name);
  }
  return out;
}

Var operator+(Var a, Var b) { return a.graph->add(a, b); }
Var operator-(Var a, Var b) { return a.graph->sub(a, b); }
Var operator*(Var a, Var b) { return a.graph->mul(a, b); }
Var operator-(Var a) { return a.graph->scale(a, -1.0); }
Var operator*(Var a, double s) { return a.graph->scale(a, s); }
Var operator*(double s, Var a) { return a.graph->scale(a, s); }
Var operator+(Var a, double s) { return a.graph->add_scalar(a, s); }
Var operator+(double s, Var a) { return a.graph->add_scalar(a, s); }
Var operator-(Var a, double s) { return a.graph->add_scalar(a, -s); }
Var operator-(double s, Var a) {
  return a.graph->add_scalar(a.graph->scale(a, -1.0), s);
}
Var matmul(Var a, Var b) { return a.graph->matmul(a, b); }

GradMap filter_prefixes(const GradMap& grads,
                        std::span<const std::string> prefixes) {
  GradMap out;
  for (const auto& [name, g] : grads) {
    for (const std::string& p : prefixes) {
      if (std::string_view(name).starts_with(p)) {
        out.emplace(name, g);
        break;
      }
    }
  }
  return out;
}

}  // namespace wmp::ad
