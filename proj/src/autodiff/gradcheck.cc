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

#include "wmp/autodiff/gradcheck.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "wmp/common/error.h"
#include "wmp/common/rng.h"

namespace wmp::ad {
namespace {

double evaluate(const LossBuilder& loss, const ParamStore& store) {
  Graph g;
  Var root = loss(g, store);
  if (g.value(root).size() != 1) {
    throw ShapeError("gradient check: loss must be a scalar");
  }
  return g.value(root)[0];
}

bool selected(const std::string& name, const std::vector<std::string>& pre) {
  if (pre.empty()) return true;
  return std::any_of(pre.begin(), pre.end(),
                     [&](const std::string& p) { return name.starts_with(p); });
}

}  // namespace

GradCheckReport finite_difference_check(const LossBuilder& loss,
                                        ParamStore& store,
                                        const GradCheckOptions& options) {
  GradCheckReport report;
  report.tolerance = options.tolerance;

  GradMap analytic;
  {
    Graph g;
    Var root = loss(g, store);
    g.backward(root);
    report.loss = g.value(root)[0];
    analytic = g.param_grads(store);
  }
  const double floor =
      options.zero_floor * std::max(1.0, std::fabs(report.loss));
  Rng rng(options.seed);
  std::vector<GradCheckEntry> compared;

  for (const std::string& name : store.names()) {
    if (!selected(name, options.prefixes)) continue;
    Tensor& p = store.mutable_at(name);
    std::vector<std::size_t> indices(p.size());
    std::iota(indices.begin(), indices.end(), 0);
    if (options.max_entries > 0 && indices.size() > options.max_entries) {
      for (std::size_t i = 0; i < options.max_entries; ++i) {
        std::swap(indices[i], indices[i + rng.index(indices.size() - i)]);
      }
      indices.resize(options.max_entries);
      std::sort(indices.begin(), indices.end());
    }

    GradCheckParam pr;
    pr.name = name;
    const Tensor& ga = analytic.at(name);
    for (std::size_t idx : indices) {
      const double saved = p[idx];
      p[idx] = saved + options.eps;
      const double up = evaluate(loss, store);
      p[idx] = saved - options.eps;
      const double down = evaluate(loss, store);
      p[idx] = saved;

      GradCheckEntry e;
      e.name = name;
      e.index = idx;
      e.analytic = ga[idx];
      e.numeric = (up - down) / (2.0 * options.eps);
      const double mag = std::max(std::fabs(e.analytic), std::fabs(e.numeric));
      if (mag < floor) {
        e.near_zero = true;
        ++pr.near_zero;
        report.flagged.push_back(e);
        continue;
      }
      e.rel_error = std::fabs(e.analytic - e.numeric) / mag;
      ++pr.checked;
      if (e.rel_error >= pr.max_rel_error) {
        pr.max_rel_error = e.rel_error;
        pr.worst_index = idx;
      }
      compared.push_back(e);
    }
    report.checked += pr.checked;
    report.max_rel_error = std::max(report.max_rel_error, pr.max_rel_error);
    report.params.push_back(pr);
  }

  std::stable_sort(compared.begin(), compared.end(),
                   [](const GradCheckEntry& a, const GradCheckEntry& b) {
                     return a.rel_error > b.rel_error;
                   });
  if (compared.size() > options.report_worst) {
    compared.resize(options.report_worst);
  }
  report.worst = std::move(compared);
  return report;
}

std::string GradCheckReport::summary() const {
  std::ostringstream os;
  os << (passed() ? "PASS" : "FAIL") << " max_rel_error=" << max_rel_error
     << " tolerance=" << tolerance << " checked=" << checked
     << " near_zero=" << flagged.size() << " loss=" << loss << "\n";
  for (const GradCheckEntry& e : worst) {
    os << "  " << e.name << "[" << e.index << "] analytic=" << e.analytic
       << " numeric=" << e.numeric << " rel=" << e.rel_error << "\n";
  }
  return os.str();
}

}  // namespace wmp::ad
