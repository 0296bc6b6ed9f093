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

#ifndef WMP_AUTODIFF_PARAM_STORE_H_
#define WMP_AUTODIFF_PARAM_STORE_H_

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "wmp/autodiff/tensor.h"

namespace wmp::ad {

// Adam moment estimates for one parameter tensor.
struct Moments {
  Tensor m;
  Tensor v;
  std::int64_t step = 0;
};

// Named parameter tensors plus their optimizer state. Iteration order is the
// lexicographic name order, which is also the order gradients are reported
// in.
class ParamStore {
 public:
  // Inserts or replaces `name`; moments are reset to zero.
  void set(const std::string& name, Tensor value);
  bool contains(std::string_view name) const;
  const Tensor& at(std::string_view name) const;
  Tensor& mutable_at(std::string_view name);
  Moments& moments(std::string_view name);
  const Moments& moments(std::string_view name) const;

  std::vector<std::string> names() const;
  std::vector<std::string> names_with_prefix(std::string_view prefix) const;
  std::size_t size() const { return entries_.size(); }
  std::size_t parameter_count() const;

  void erase_prefix(std::string_view prefix);
  // Copies every tensor under `from` to the same suffix under `to`.
  void copy_prefix(std::string_view from, std::string_view to);
  void reset_moments();

  bool all_finite() const;
  bool operator==(const ParamStore& other) const;

 private:
  struct Entry {
    Tensor value;
    Moments moments;
  };
  std::map<std::string, Entry, std::less<>> entries_;

  const Entry& entry(std::string_view name) const;
  Entry& entry(std::string_view name);
};

// Gradients keyed by parameter name, in store order.
using GradMap = std::map<std::string, Tensor, std::less<>>;

}  // namespace wmp::ad

#endif  // WMP_AUTODIFF_PARAM_STORE_H_
