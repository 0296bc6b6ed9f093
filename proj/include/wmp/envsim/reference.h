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

#ifndef WMP_ENVSIM_REFERENCE_H_
#define WMP_ENVSIM_REFERENCE_H_

#include <string>
#include <vector>

#include "json.hpp"
#include "wmp/envsim/env.h"

namespace wmp::env {

struct ReferenceClip {
  double dt = kDt;
  double speed = 0.0;
  double turn = 0.0;
  std::vector<RobotState> frames;

  std::size_t joints() const { return frames.front().joints(); }
  void validate() const;
};

// Open-loop sinusoidal gait a_i(t) = A sin(2 pi f t + phi_i).
struct GaitPlan {
  double amplitude = 0.5;
  double frequency = 1.0;
  std::vector<double> phases;

  std::vector<double> action(double t) const;
};

// Plans a gait whose steady-state mean twist is (speed, turn) under `params`.
// Throws InvalidArgument when the pair is outside the reachable set.
GaitPlan plan_gait(double speed, double turn, const PhysicalParams& params,
                   std::size_t joints = kDefaultJoints);

// Rolls out the planned gait from rest, discards a one-second warm-up, moves
// the pose back to the origin and records duration / dt frames.
ReferenceClip scripted_gait_reference(double speed, double turn,
                                      double duration,
                                      const PhysicalParams& params,
                                      std::size_t joints = kDefaultJoints);

nlohmann::json clip_to_json(const ReferenceClip& clip);
ReferenceClip clip_from_json(const nlohmann::json& doc);

}  // namespace wmp::env

#endif  // WMP_ENVSIM_REFERENCE_H_
