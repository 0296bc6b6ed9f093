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

#ifndef WMP_AUTODIFF_GRAPH_H_
#define WMP_AUTODIFF_GRAPH_H_

#include <cstdint>
#include <initializer_list>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "wmp/autodiff/param_store.h"
#include "wmp/autodiff/tensor.h"

namespace wmp::ad {

class Graph;

// Handle to a node of a Graph. Cheap to copy; only valid while the graph
// that created it is alive.
struct Var {
  Graph* graph = nullptr;
  std::uint32_t id = 0;

  const Tensor& value() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
};

enum class OpKind : std::uint8_t {
  kConstant,
  kVariable,
  kParam,
  kMatMul,
  kAdd,
  kSub,
  kMul,
  kAddRow,
  kMulRow,
  kMulCol,
  kScale,
  kAddScalar,
  kElu,
  kTanh,
  kExp,
  kSquare,
  kAbs,
  kSin,
  kCos,
  kClamp,
  kWrapAngle,
  kSum,
  kMean,
  kRowSum,
  kRowNorm,
  kSliceCols,
  kConcatCols,
};

const char* op_name(OpKind kind);

// Define-by-run reverse-mode tape. Nodes are appended in evaluation order, so
// reverse insertion order is a valid topological order for backward.
//
// Every op validates shapes and checks its output for NaN/Inf; violations
// throw ShapeError / NonFiniteError naming the op.
class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var constant(Tensor value);
  // Leaf that receives a gradient (used to differentiate w.r.t. inputs).
  Var variable(Tensor value);
  // Binds a store tensor without copying it. A frozen (non-trainable)
  // parameter behaves as a constant and always reports a zero gradient. The
  // store must outlive the graph and stay unmodified while it is in use.
  Var param(const ParamStore& store, const std::string& name,
            bool trainable = true);

  Var matmul(Var a, Var b);
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  // Broadcasts a [1, c] row over every row of a.
  Var add_row(Var a, Var row);
  Var mul_row(Var a, Var row);
  // Broadcasts an [r, 1] column over every column of a.
  Var mul_col(Var a, Var col);
  Var scale(Var a, double s);
  Var add_scalar(Var a, double s);

  Var elu(Var a);
  Var tanh(Var a);
  Var exp(Var a);
  Var square(Var a);
  Var abs(Var a);
  Var sin(Var a);
  Var cos(Var a);
  Var clamp(Var a, double lo, double hi);
  // Wraps into (-pi, pi]; unit derivative.
  Var wrap_angle(Var a);

  Var sum(Var a);
  Var mean(Var a);
  Var row_sum(Var a);
  // Per-row Euclidean norm, [r, c] -> [r, 1]. The subgradient at a zero row
  // is zero.
  Var row_norm(Var a);
  Var slice_cols(Var a, std::size_t begin, std::size_t count);
  Var concat_cols(std::span<const Var> parts);
  Var concat_cols(std::initializer_list<Var> parts) {
    return concat_cols(std::span<const Var>(parts.begin(), parts.size()));
  }

  const Tensor& value(Var v) const;
  OpKind kind(Var v) const { return nodes_.at(v.id).kind; }
  std::size_t node_count() const { return nodes_.size(); }

  // Runs reverse accumulation from a single-element root.
  void backward(Var loss);
  // Gradient of the last backward root w.r.t. `v` (zeros if unreached).
  Tensor grad(Var v) const;
  // Gradients for every tensor in `store`; zero for parameters that were not
  // bound, bound frozen, or not reachable from the root.
  GradMap param_grads(const ParamStore& store) const;
  // Restricted to store names starting with one of `prefixes`.
  GradMap param_grads(const ParamStore& store,
                      std::span<const std::string> prefixes) const;
  // Names bound as trainable, in store order.
  std::vector<std::string> trainable_params() const;

 private:
  static constexpr std::uint32_t kNone = 0xffffffffu;

  struct Node {
    OpKind kind = OpKind::kConstant;
    std::uint32_t a = kNone;
    std::uint32_t b = kNone;
    std::vector<std::uint32_t> parts;
    double s0 = 0.0;
    double s1 = 0.0;
    std::size_t begin = 0;
    Tensor value;
    const Tensor* external = nullptr;
    Tensor grad;
    bool requires_grad = false;
  };

  std::vector<Node> nodes_;
  std::map<std::string, std::uint32_t, std::less<>> params_;
  std::map<std::string, bool, std::less<>> param_trainable_;
  bool backward_done_ = false;

  const Node& node(Var v) const;
  const Tensor& node_value(std::uint32_t id) const;
  Var push(Node node);
  Var unary(OpKind kind, Var a);
  Tensor& grad_slot(std::uint32_t id);
};

Var operator+(Var a, Var b);
Var operator-(Var a, Var b);
Var operator*(Var a, Var b);
Var operator-(Var a);
Var operator*(Var a, double s);
Var operator*(double s, Var a);
Var operator+(Var a, double s);
Var operator+(double s, Var a);
Var operator-(Var a, double s);
Var operator-(double s, Var a);
Var matmul(Var a, Var b);

// Keeps only entries whose name starts with one of `prefixes`.
GradMap filter_prefixes(const GradMap& grads,
                        std::span<const std::string> prefixes);

}  // namespace wmp::ad

#endif  // WMP_AUTODIFF_GRAPH_H_
