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

#ifndef WMP_AUTODIFF_ADAM_H_
#define WMP_AUTODIFF_ADAM_H_

#include "wmp/autodiff/param_store.h"

namespace wmp::ad {

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  // Rescales the joint gradient to this L2 norm when exceeded; 0 disables.
  double max_grad_norm = 0.0;
};

// Applies one bias-corrected Adam update to every parameter named in
// `grads`. All gradients are validated before anything is written, so a
// non-finite or misaligned gradient leaves the store untouched.
void adam_step(ParamStore& store, const GradMap& grads,
               const AdamOptions& options);

double grad_norm(const GradMap& grads);

}  // namespace wmp::ad

#endif  // WMP_AUTODIFF_ADAM_H_
