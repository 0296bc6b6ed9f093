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

#include "wmp/autodiff/adam.h"

#include <cmath>

#include "wmp/common/error.h"

namespace wmp::ad {

double grad_norm(const GradMap& grads) {
  double s = 0.0;
  for (const auto& [name, g] : grads) {
    for (double v : g.values()) s += v * v;
  }
  return std::sqrt(s);
}

void adam_step(ParamStore& store, const GradMap& grads,
               const AdamOptions& options) {
  for (const auto& [name, g] : grads) {
    if (!store.contains(name)) {
      throw InvalidArgument("adam: gradient for unknown parameter '" + name +
                            "'");
    }
    if (g.size() != store.at(name).size()) {
      throw ShapeError("adam: gradient shape " + shape_string(g.shape()) +
                       " does not match parameter '" + name + "' " +
                       shape_string(store.at(name).shape()));
    }
    if (!g.all_finite()) {
      throw NonFiniteError("adam: non-finite gradient for parameter '" + name +
                           "'");
    }
  }
  double scale = 1.0;
  if (options.max_grad_norm > 0.0) {
    const double norm = grad_norm(grads);
    if (norm > options.max_grad_norm) scale = options.max_grad_norm / norm;
  }

  const double b1 = options.beta1;
  const double b2 = options.beta2;
  for (const auto& [name, g] : grads) {
    Tensor& p = store.mutable_at(name);
    Moments& mo = store.moments(name);
    mo.step += 1;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(mo.step));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(mo.step));
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double gi = scale * g[i];
      mo.m[i] = b1 * mo.m[i] + (1.0 - b1) * gi;
      mo.v[i] = b2 * mo.v[i] + (1.0 - b2) * gi * gi;
      const double m_hat = mo.m[i] / c1;
      const double v_hat = mo.v[i] / c2;
      p[i] -= options.lr * m_hat / (std::sqrt(v_hat) + options.eps);
    }
  }
}

}  // namespace wmp::ad
