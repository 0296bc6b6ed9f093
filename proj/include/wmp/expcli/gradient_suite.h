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

#ifndef WMP_EXPCLI_GRADIENT_SUITE_H_
#define WMP_EXPCLI_GRADIENT_SUITE_H_

#include <cstdint>
#include <string>
#include <vector>

#include "wmp/autodiff/gradcheck.h"

namespace wmp::cli {

struct GradientCase {
  std::string name;
  std::uint64_t seed = 0;
  ad::GradCheckReport report;
};

// Central-difference checks of every trainable parameter for the n-step
// world-model loss (n = 1, 4, 8), the motion-tracking loss (n = 4) and the
// command-following loss with 0.1 * regularizer (n = 4). Uses narrow
// networks so that every parameter can be perturbed.
std::vector<GradientCase> run_gradient_suite(std::size_t seeds,
                                             std::uint64_t first_seed = 1);

}  // namespace wmp::cli

#endif  // WMP_EXPCLI_GRADIENT_SUITE_H_
