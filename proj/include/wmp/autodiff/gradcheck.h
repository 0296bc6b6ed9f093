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

#ifndef WMP_AUTODIFF_GRADCHECK_H_
#define WMP_AUTODIFF_GRADCHECK_H_

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "wmp/autodiff/graph.h"
#include "wmp/autodiff/param_store.h"

namespace wmp::ad {

// Builds a scalar loss on a fresh graph from the current store contents.
// Must be deterministic.
using LossBuilder = std::function<Var(Graph&, const ParamStore&)>;

struct GradCheckOptions {
  double eps = 1e-5;
  double tolerance = 1e-4;
  // Entries whose analytic and numeric magnitudes are both below
  // zero_floor * max(1, |loss|) are flagged as near-zero instead of compared.
  double zero_floor = 1e-6;
  // Only parameters starting with one of these prefixes; empty checks all.
  std::vector<std::string> prefixes;
  // Maximum entries sampled per parameter; 0 checks every entry.
  std::size_t max_entries = 0;
  std::uint64_t seed = 0;
  std::size_t report_worst = 10;
};

struct GradCheckEntry {
  std::string name;
  std::size_t index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_error = 0.0;
  bool near_zero = false;
};

struct GradCheckParam {
  std::string name;
  std::size_t checked = 0;
  std::size_t near_zero = 0;
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
};

struct GradCheckReport {
  double loss = 0.0;
  double tolerance = 0.0;
  std::vector<GradCheckParam> params;
  // Largest relative errors across all compared entries, descending.
  std::vector<GradCheckEntry> worst;
  std::vector<GradCheckEntry> flagged;
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  bool passed() const { return max_rel_error < tolerance; }
  std::string summary() const;
};

// Compares reverse-mode gradients against central differences. The store is
// perturbed in place and restored bit-exactly before returning.
GradCheckReport finite_difference_check(const LossBuilder& loss,
                                        ParamStore& store,
                                        const GradCheckOptions& options = {});

}  // namespace wmp::ad

#endif  // WMP_AUTODIFF_GRADCHECK_H_
