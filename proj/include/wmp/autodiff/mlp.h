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

#ifndef WMP_AUTODIFF_MLP_H_
#define WMP_AUTODIFF_MLP_H_

#include <string>
#include <vector>

#include "wmp/autodiff/graph.h"
#include "wmp/autodiff/param_store.h"
#include "wmp/autodiff/tensor.h"
#include "wmp/common/rng.h"

namespace wmp::ad {

// Fully connected network with ELU hidden layers and a linear output.
// Parameters live in a ParamStore as "<prefix>l<i>/w" ([in, out]) and
// "<prefix>l<i>/b" ([1, out]).
class Mlp {
 public:
  Mlp() = default;
  // `sizes` = {input, hidden..., output}; at least two entries.
  Mlp(std::string prefix, std::vector<std::size_t> sizes);

  const std::string& prefix() const { return prefix_; }
  const std::vector<std::size_t>& sizes() const { return sizes_; }
  std::size_t input_size() const { return sizes_.front(); }
  std::size_t output_size() const { return sizes_.back(); }
  std::size_t layer_count() const { return sizes_.size() - 1; }
  std::string weight_name(std::size_t layer) const;
  std::string bias_name(std::size_t layer) const;

  // Glorot-uniform weights, zero biases. With `zero_last` the output layer
  // starts at exactly zero.
  void init(ParamStore& store, Rng& rng, bool zero_last = false) const;

  // Records the forward pass on `graph`. Frozen networks pass trainable=false.
  Var forward(Graph& graph, const ParamStore& store, Var input,
              bool trainable = true) const;
  // Same computation without recording a graph.
  Tensor forward_values(const ParamStore& store, const Tensor& input) const;

 private:
  std::string prefix_;
  std::vector<std::size_t> sizes_;

  void check_layer(const ParamStore& store, std::size_t layer,
                   std::size_t input_cols) const;
};

}  // namespace wmp::ad

#endif  // WMP_AUTODIFF_MLP_H_
