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

#include "wmp/envsim/reference.h"

#include <cmath>
#include <complex>
#include <numbers>

#include "wmp/common/error.h"

namespace wmp::env {
namespace {

constexpr double kGaitGain = 12.0;
constexpr double kAmplitude = 0.5;
constexpr double kWarmup = 1.0;

// Mean of (joint velocity x mid-step partner position) per unit sin(lag) for
// a sinusoidal target at `freq`, from the steady-state response of the
// discrete PD loop.
double propulsion_gain(double freq, const PhysicalParams& p) {
  using C = std::complex<double>;
  const double inertia = p.joint_inertia();
  const C z = std::polar(1.0, 2.0 * std::numbers::pi * freq * kDt);
  const double lambda = p.latency_blend();
  const C a_lat = (1.0 - lambda) + lambda / z;
  const C vel = (kDt * p.kp * a_lat / inertia) /
                ((z - 1.0 + kDt * p.kd() / inertia) +
                 kDt * kDt * p.kp / inertia * z / (z - 1.0));
  const C pos = kDt * vel * z / (z - 1.0);
  const C pos_mid = pos * (1.0 + 1.0 / z) / 2.0;
  const double gain = kGaitGain * kNominalMass / p.mass;
  return gain * kAmplitude * kAmplitude * std::imag(vel * std::conj(pos_mid));
}

}  // namespace

void ReferenceClip::validate() const {
  if (frames.empty()) throw InvalidArgument("reference clip has no frames");
  if (std::fabs(dt - kDt) > 1e-12) {
    throw InvalidArgument("reference clip dt must be 0.02");
  }
  const std::size_t j = frames.front().joints();
  for (const RobotState& f : frames) {
    if (f.joints() != j) throw ShapeError("clip frames differ in joint count");
    if (!f.all_finite()) throw NonFiniteError("clip frame is not finite");
  }
}

std::vector<double> GaitPlan::action(double t) const {
  std::vector<double> a(phases.size());
  for (std::size_t i = 0; i < phases.size(); ++i) {
    a[i] = amplitude *
           std::sin(2.0 * std::numbers::pi * frequency * t + phases[i]);
  }
  return a;
}

GaitPlan plan_gait(double speed, double turn, const PhysicalParams& params,
                   std::size_t joints) {
  validate_joint_count(joints);
  params.validate();
  if (!(speed >= 0.0 && speed <= 1.5)) {
    throw InvalidArgument("gait speed must lie in [0, 1.5]");
  }
  if (!(std::fabs(turn) <= 1.5)) {
    throw InvalidArgument("gait turn rate must lie in [-1.5, 1.5]");
  }
  GaitPlan plan;
  plan.amplitude = kAmplitude;
  plan.frequency = 1.0 + speed;
  const double legs_per_side = static_cast<double>(joints) / 4.0;
  const double g = propulsion_gain(plan.frequency, params) * legs_per_side;
  const double fwd = speed / (0.04 * g);
  const double yaw = turn / (0.03 * g);
  const double sin_left = 0.5 * (fwd + yaw);
  const double sin_right = 0.5 * (fwd - yaw);
  if (std::fabs(sin_left) > 1.0 || std::fabs(sin_right) > 1.0) {
    throw InvalidArgument("speed/turn pair is not reachable by the gait");
  }
  const double lag_left = std::asin(sin_left);
  const double lag_right = std::asin(sin_right);
  plan.phases.resize(joints);
  for (std::size_t leg = 0; leg < joints / 2; ++leg) {
    const double hip = std::numbers::pi * static_cast<double>(2 * leg) /
                       static_cast<double>(joints);
    plan.phases[2 * leg] = hip;
    plan.phases[2 * leg + 1] =
        hip + (2 * leg < joints / 2 ? lag_left : lag_right);
  }
  return plan;
}

ReferenceClip scripted_gait_reference(double speed, double turn,
                                      double duration,
                                      const PhysicalParams& params,
                                      std::size_t joints) {
  if (!(duration > 0.0) || !std::isfinite(duration)) {
    throw InvalidArgument("clip duration must be positive");
  }
  const GaitPlan plan = plan_gait(speed, turn, params, joints);
  const auto warmup = static_cast<std::size_t>(std::llround(kWarmup / kDt));
  const auto frames = static_cast<std::size_t>(std::llround(duration / kDt));
  if (frames == 0) throw InvalidArgument("clip duration shorter than dt");

  RobotState s(joints);
  for (std::size_t t = 0; t < warmup; ++t) {
    s = step(s, plan.action(static_cast<double>(t) * kDt), params);
  }
  s.x = 0.0;
  s.y = 0.0;
  s.heading = 0.0;

  ReferenceClip clip;
  clip.speed = speed;
  clip.turn = turn;
  clip.frames.reserve(frames);
  clip.frames.push_back(s);
  for (std::size_t t = warmup; clip.frames.size() < frames; ++t) {
    s = step(s, plan.action(static_cast<double>(t) * kDt), params);
    clip.frames.push_back(s);
  }
  return clip;
}

nlohmann::json clip_to_json(const ReferenceClip& clip) {
  nlohmann::json frames = nlohmann::json::array();
  for (const RobotState& f : clip.frames) frames.push_back(f.flat());
  return {{"dt", clip.dt},
          {"speed", clip.speed},
          {"turn", clip.turn},
          {"frames", std::move(frames)}};
}

ReferenceClip clip_from_json(const nlohmann::json& doc) {
  try {
    ReferenceClip clip;
    clip.dt = doc.at("dt").get<double>();
    clip.speed = doc.at("speed").get<double>();
    clip.turn = doc.value("turn", 0.0);
    for (const auto& row : doc.at("frames")) {
      const auto values = row.get<std::vector<double>>();
      if (values.size() < 6 || (values.size() - 6) % 3 != 0) {
        throw ShapeError("clip frame has " + std::to_string(values.size()) +
                         " fields");
      }
      clip.frames.push_back(
          RobotState::from_flat(values, (values.size() - 6) / 3));
    }
    clip.validate();
    return clip;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("malformed reference clip: ") + e.what());
  }
}

}  // namespace wmp::env
