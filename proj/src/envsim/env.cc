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

#include "wmp/envsim/env.h"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "wmp/common/error.h"

namespace wmp::env {
namespace {

constexpr double kGaitGain = 12.0;
constexpr double kWeightVx = 0.04;
constexpr double kWeightVy = 0.02;
constexpr double kWeightYaw = 0.03;

void require_finite(double v, const char* what) {
  if (!std::isfinite(v))
    throw NonFiniteError(std::string("non-finite ") + what);
}

}  // namespace

void PhysicalParams::validate() const {
  if (!(mass > 0.0) || !std::isfinite(mass)) {
    throw InvalidArgument("mass must be positive");
  }
  if (!(kp > 0.0) || !std::isfinite(kp)) {
    throw InvalidArgument("kp must be positive");
  }
  if (!(latency_ms >= 0.0) || !(latency_ms < kDt * 1000.0)) {
    throw InvalidArgument("control latency must lie in [0, 20) ms");
  }
  if (!(max_torque > 0.0) || !std::isfinite(max_torque)) {
    throw InvalidArgument("max_torque must be positive");
  }
}

PhysicalParams PhysicalParams::by_name(const std::string& name) {
  if (name == "original") return original();
  if (name == "env1") return env1();
  if (name == "env2") return env2();
  if (name == "env3") return env3();
  if (name == "env4") return env4();
  throw InvalidArgument("unknown environment '" + name + "'");
}

double PhysicalParams::latency_blend() const {
  return std::clamp(latency_ms / (kDt * 1000.0), 0.0, 1.0);
}

bool RobotState::all_finite() const {
  for (double v : {x, y, heading, vx, vy, yaw_rate}) {
    if (!std::isfinite(v)) return false;
  }
  for (const auto* vec : {&joint_pos, &joint_vel, &prev_action}) {
    for (double v : *vec) {
      if (!std::isfinite(v)) return false;
    }
  }
  return true;
}

std::vector<double> RobotState::flat() const {
  std::vector<double> out{x, y, heading, vx, vy, yaw_rate};
  out.reserve(flat_size(joints()));
  out.insert(out.end(), joint_pos.begin(), joint_pos.end());
  out.insert(out.end(), joint_vel.begin(), joint_vel.end());
  out.insert(out.end(), prev_action.begin(), prev_action.end());
  return out;
}

RobotState RobotState::from_flat(std::span<const double> values,
                                 std::size_t joints) {
  if (values.size() != flat_size(joints)) {
    throw ShapeError("state vector has " + std::to_string(values.size()) +
                     " entries, expected " + std::to_string(flat_size(joints)));
  }
  RobotState s(joints);
  s.x = values[0];
  s.y = values[1];
  s.heading = values[2];
  s.vx = values[3];
  s.vy = values[4];
  s.yaw_rate = values[5];
  for (std::size_t i = 0; i < joints; ++i) {
    s.joint_pos[i] = values[6 + i];
    s.joint_vel[i] = values[6 + joints + i];
    s.prev_action[i] = values[6 + 2 * joints + i];
  }
  return s;
}

void validate_joint_count(std::size_t joints) {
  if (joints == 0 || joints % 4 != 0) {
    throw InvalidArgument("joint count must be a positive multiple of 4, got " +
                          std::to_string(joints));
  }
}

double wrap_angle(double angle) {
  if (angle > -std::numbers::pi && angle <= std::numbers::pi) return angle;
  constexpr double kTwoPi = 2.0 * std::numbers::pi;
  double w = std::fmod(angle + std::numbers::pi, kTwoPi);
  if (w <= 0.0) w += kTwoPi;
  return w - std::numbers::pi;
}

RobotState step(const RobotState& state, std::span<const double> action,
                const PhysicalParams& params) {
  const std::size_t n = state.joints();
  if (action.size() != n) {
    throw ShapeError("action has " + std::to_string(action.size()) +
                     " entries, expected " + std::to_string(n));
  }
  validate_joint_count(n);
  if (!state.all_finite()) throw NonFiniteError("non-finite state");
  for (double a : action) require_finite(a, "action");

  const double lambda = params.latency_blend();
  const double inertia = params.joint_inertia();
  const double kd = params.kd();
  const double gain = kGaitGain * kNominalMass / params.mass;

  RobotState next = state;
  std::vector<double> mid(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double a = std::clamp(action[i], -kActionLimit, kActionLimit);
    const double a_eff = (1.0 - lambda) * a + lambda * state.prev_action[i];
    const double tau = std::clamp(
        params.kp * (a_eff - state.joint_pos[i]) - kd * state.joint_vel[i],
        -params.max_torque, params.max_torque);
    next.joint_vel[i] = state.joint_vel[i] + tau / inertia * kDt;
    next.joint_pos[i] = state.joint_pos[i] + next.joint_vel[i] * kDt;
    next.prev_action[i] = a;
    mid[i] = 0.5 * (state.joint_pos[i] + next.joint_pos[i]);
  }

  double target_vx = 0.0;
  double target_vy = 0.0;
  double target_yaw = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const bool hip = i % 2 == 0;
    const double g = hip ? gain * next.joint_vel[i] * mid[i + 1]
                         : -gain * next.joint_vel[i] * mid[i - 1];
    target_vx += kWeightVx * g;
    target_vy += (hip ? kWeightVy : -kWeightVy) * g;
    target_yaw += (i < n / 2 ? kWeightYaw : -kWeightYaw) * g;
  }

  const double relax = kDt / params.twist_tau();
  next.vx += (target_vx - state.vx) * relax;
  next.vy += (target_vy - state.vy) * relax;
  next.yaw_rate += (target_yaw - state.yaw_rate) * relax;

  next.heading = wrap_angle(state.heading + next.yaw_rate * kDt);
  const double c = std::cos(next.heading);
  const double s = std::sin(next.heading);
  next.x += (c * next.vx - s * next.vy) * kDt;
  next.y += (s * next.vx + c * next.vy) * kDt;
  return next;
}

std::vector<double> observe(const RobotState& state) {
  std::vector<double> o{state.vx, state.vy, state.yaw_rate};
  o.reserve(observation_size(state.joints()));
  o.insert(o.end(), state.joint_pos.begin(), state.joint_pos.end());
  o.insert(o.end(), state.joint_vel.begin(), state.joint_vel.end());
  return o;
}

Trajectory rollout(const PolicyFn& policy, const RobotState& initial,
                   const PhysicalParams& params, std::size_t steps,
                   std::uint64_t seed, const CommandFn& command) {
  if (steps == 0) throw InvalidArgument("rollout needs at least one step");
  params.validate();
  Rng rng(seed);
  Trajectory traj;
  traj.states.reserve(steps + 1);
  traj.actions.reserve(steps);
  traj.states.push_back(initial);
  for (std::size_t t = 0; t < steps; ++t) {
    const RobotState& s = traj.states.back();
    if (command) traj.commands.push_back(command(s, t));
    std::vector<double> a = policy(s, t, rng);
    RobotState next(s.joints());
    try {
      next = step(s, a, params);
    } catch (const NonFiniteError&) {
      if (command) traj.commands.pop_back();
      traj.truncated = true;
      break;
    }
    if (!next.all_finite()) {
      if (command) traj.commands.pop_back();
      traj.truncated = true;
      break;
    }
    traj.actions.push_back(std::move(a));
    traj.states.push_back(std::move(next));
  }
  return traj;
}

}  // namespace wmp::env
