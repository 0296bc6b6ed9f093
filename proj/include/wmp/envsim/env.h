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

#ifndef WMP_ENVSIM_ENV_H_
#define WMP_ENVSIM_ENV_H_

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "wmp/common/rng.h"

namespace wmp::env {

inline constexpr double kDt = 0.02;
inline constexpr double kNominalMass = 5.74;
inline constexpr double kActionLimit = 1.5707963267948966;
inline constexpr std::size_t kDefaultJoints = 8;

struct PhysicalParams {
  double mass = kNominalMass;
  double kp = 50.0;
  double latency_ms = 0.0;
  double max_torque = 18.0;

  void validate() const;

  static PhysicalParams original() { return {}; }
  static PhysicalParams env1() { return {14.0, 40.0, 6.0, 16.2}; }
  static PhysicalParams env2() { return {kNominalMass + 3.0, 50.0, 6.0, 18.0}; }
  static PhysicalParams env3() { return {kNominalMass + 5.0, 50.0, 6.0, 18.0}; }
  static PhysicalParams env4() { return {kNominalMass + 7.0, 50.0, 6.0, 18.0}; }
  // "original", "env1" ... "env4".
  static PhysicalParams by_name(const std::string& name);

  double joint_inertia() const { return 0.05 * mass / kNominalMass; }
  double kd() const { return kp / 20.0; }
  double twist_tau() const { return 0.1 * mass / kNominalMass; }
  double latency_blend() const;
};

// Commanded forward speed (m/s) and yaw rate (rad/s).
struct Command {
  double v = 0.0;
  double omega = 0.0;
  bool operator==(const Command&) const = default;
};

// Planar base pose, body-frame twist and joint state. Joint i belongs to leg
// i / 2; even joints are hips and odd joints knees. Legs with index below
// J / 4 form the left side.
struct RobotState {
  double x = 0.0;
  double y = 0.0;
  double heading = 0.0;
  double vx = 0.0;
  double vy = 0.0;
  double yaw_rate = 0.0;
  std::vector<double> joint_pos;
  std::vector<double> joint_vel;
  std::vector<double> prev_action;

  explicit RobotState(std::size_t joints = kDefaultJoints)
      : joint_pos(joints, 0.0),
        joint_vel(joints, 0.0),
        prev_action(joints, 0.0) {}

  std::size_t joints() const { return joint_pos.size(); }
  bool all_finite() const;

  // [x, y, heading, vx, vy, yaw_rate, joint_pos, joint_vel, prev_action].
  std::vector<double> flat() const;
  static RobotState from_flat(std::span<const double> values,
                              std::size_t joints);
  static std::size_t flat_size(std::size_t joints) { return 6 + 3 * joints; }

  bool operator==(const RobotState&) const = default;
};

// Offset of the observation inside RobotState::flat(): the observation is
// the contiguous block [vx, vy, yaw_rate, joint_pos, joint_vel].
inline constexpr std::size_t kObservationOffset = 3;
inline std::size_t observation_size(std::size_t joints) {
  return 3 + 2 * joints;
}

void validate_joint_count(std::size_t joints);

// One 50 Hz control step of the surrogate dynamics. The action is clamped to
// [-pi/2, pi/2] before use.
RobotState step(const RobotState& state, std::span<const double> action,
                const PhysicalParams& params);

std::vector<double> observe(const RobotState& state);

double wrap_angle(double angle);

struct Trajectory {
  // states[t] is the state before actions[t]; states has one more entry.
  std::vector<RobotState> states;
  std::vector<std::vector<double>> actions;
  std::vector<Command> commands;
  bool truncated = false;

  std::size_t steps() const { return actions.size(); }
};

// Returns the action and the command the policy was following.
using PolicyFn =
    std::function<std::vector<double>(const RobotState&, std::size_t, Rng&)>;
using CommandFn = std::function<Command(const RobotState&, std::size_t)>;

// Runs `steps` control steps. A non-finite state ends the rollout early with
// `truncated` set; the offending state is not recorded.
Trajectory rollout(const PolicyFn& policy, const RobotState& initial,
                   const PhysicalParams& params, std::size_t steps,
                   std::uint64_t seed, const CommandFn& command = nullptr);

}  // namespace wmp::env

#endif  // WMP_ENVSIM_ENV_H_
