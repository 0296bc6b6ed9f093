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

#include "wmp/autodiff/mlp.h"

#include <cmath>
#include <sstream>

#include "wmp/common/error.h"

namespace wmp::ad {

Mlp::Mlp(std::string prefix, std::vector<std::size_t> sizes)
    : prefix_(std::move(prefix)), sizes_(std::move(sizes)) {
  if (sizes_.size() < 2) {
    throw InvalidArgument("mlp '" + prefix_ + "' needs at least two sizes");
  }
  for (std::size_t s : sizes_) {
    if (s == 0) throw InvalidArgument("mlp '" + prefix_ + "' has a zero size");
  }
}

std::string Mlp::weight_name(std::size_t layer) const {
  return prefix_ + "l" + std::to_string(layer) + "/w";
}

std::string Mlp::bias_name(std::size_t layer) const {
  return prefix_ + "l" + std::to_string(layer) + "/b";
}

void Mlp::init(ParamStore& store, Rng& rng, bool zero_last) const {
  for (std::size_t l = 0; l < layer_count(); ++l) {
    const std::size_t in = sizes_[l];
    const std::size_t out = sizes_[l + 1];
    Tensor w(in, out);
    if (!(zero_last && l + 1 == layer_count())) {
      const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
      for (double& v : w.values()) v = rng.uniform(-limit, limit);
    }
    store.set(weight_name(l), std::move(w));
    store.set(bias_name(l), Tensor(1, out));
  }
}

void Mlp::check_layer(const ParamStore& store, std::size_t layer,
                      std::size_t input_cols) const {
  const std::size_t in = sizes_[layer];
  const std::size_t out = sizes_[layer + 1];
  auto fail = [&](const std::string& what) {
    std::ostringstream os;
    os << "mlp '" << prefix_ << "' layer " << layer << ": " << what;
    throw ShapeError(os.str());
  };
  if (input_cols != in) {
    fail("input has " + std::to_string(input_cols) + " columns, expected " +
         std::to_string(in));
  }
  const std::string wn = weight_name(layer);
  const std::string bn = bias_name(layer);
  if (!store.contains(wn) || !store.contains(bn)) fail("missing parameters");
  const Tensor& w = store.at(wn);
  const Tensor& b = store.at(bn);
  if (w.rows() != in || w.cols() != out) {
    fail("weight shape " + shape_string(w.shape()) + ", expected [" +
         std::to_string(in) + ", " + std::to_string(out) + "]");
  }
  if (b.rows() != 1 || b.cols() != out) {
    fail("bias shape " + shape_string(b.shape()) + ", expected [1, " +
         std::to_string(out) + "]");
  }
}

Var Mlp::forward(Graph& graph, const ParamStore& store, Var input,
                 bool trainable) const {
  Var h = input;
  for (std::size_t l = 0; l < layer_count(); ++l) {
    check_layer(store, l, h.cols());
    Var w = graph.param(store, weight_name(l), trainable);
    Var b = graph.param(store, bias_name(l), trainable);
    h = graph.add_row(graph.matmul(h, w), b);
    if (l + 1 < layer_count()) h = graph.elu(h);
  }
  return h;
}

Tensor Mlp::forward_values(const ParamStore& store, const Tensor& input) const {
  if (!input.all_finite()) {
    throw NonFiniteError("mlp '" + prefix_ + "': non-finite input");
  }
  Tensor h = input;
  for (std::size_t l = 0; l < layer_count(); ++l) {
    check_layer(store, l, h.cols());
    const Tensor& w = store.at(weight_name(l));
    const Tensor& b = store.at(bias_name(l));
    Tensor out(h.rows(), w.cols());
    out.matrix().noalias() = h.matrix() * w.matrix();
    out.matrix().rowwise() += b.matrix().row(0);
    if (l + 1 < layer_count()) {
      for (double& v : out.values()) v = v > 0.0 ? v : std::expm1(v);
    }
    h = std::move(out);
  }
  return h;
}

}  // namespace wmp::ad
