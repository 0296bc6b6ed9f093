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

#include <cmath>
#include <numbers>

#include "doctest.h"
#include "wmp/common/error.h"
#include "wmp/common/rng.h"
#include "wmp/envsim/env.h"
#include "wmp/envsim/reference.h"

using namespace wmp;
using namespace wmp::env;

namespace {

RobotState random_state(Rng& rng, std::size_t joints = 8) {
  RobotState s(joints);
  s.x = rng.uniform(-3, 3);
  s.y = rng.uniform(-3, 3);
  s.heading = rng.uniform(-3, 3);
  s.vx = rng.uniform(-1, 1);
  s.vy = rng.uniform(-0.3, 0.3);
  s.yaw_rate = rng.uniform(-1, 1);
  for (std::size_t i = 0; i < joints; ++i) {
    s.joint_pos[i] = rng.uniform(-0.8, 0.8);
    s.joint_vel[i] = rng.uniform(-3, 3);
    s.prev_action[i] = rng.uniform(-0.8, 0.8);
  }
  return s;
}

std::vector<double> random_action(Rng& rng, std::size_t joints = 8) {
  std::vector<double> a(joints);
  for (double& v : a) v = rng.uniform(-1, 1);
  return a;
}

double pd_energy(const RobotState& s, const PhysicalParams& p) {
  double e = 0.0;
  for (std::size_t i = 0; i < s.joints(); ++i) {
    e += 0.5 * p.joint_inertia() * s.joint_vel[i] * s.joint_vel[i] +
         0.5 * p.kp * s.joint_pos[i] * s.joint_pos[i];
  }
  return e;
}

}  // namespace

TEST_CASE("zero state and zero action is a fixed point") {
  RobotState s;
  RobotState next = step(s, std::vector<double>(8, 0.0), PhysicalParams{});
  CHECK(next == s);
}

TEST_CASE("unit joint error saturates the torque clamp") {
  RobotState s;
  std::vector<double> a(8, 0.0);
  a[3] = 1.0;
  const PhysicalParams p = PhysicalParams::original();
  RobotState next = step(s, a, p);
  // kp * 1 = 50 > 18, so the joint accelerates at 18 / 0.05.
  CHECK(next.joint_vel[3] ==
        doctest::Approx(18.0 / 0.05 * 0.02).epsilon(1e-14));
  CHECK(next.joint_pos[3] ==
        doctest::Approx(18.0 / 0.05 * 0.02 * 0.02).epsilon(1e-14));
  CHECK(next.joint_vel[2] == 0.0);
}

TEST_CASE("doubling mass halves joint acceleration and twist relaxation") {
  RobotState s;
  s.vx = 0.5;
  s.vy = -0.2;
  s.yaw_rate = 0.3;
  std::vector<double> a(8, 0.1);
  PhysicalParams light;
  PhysicalParams heavy;
  heavy.mass = 2.0 * kNominalMass;
  RobotState nl = step(s, a, light);
  RobotState nh = step(s, a, heavy);
  // Torque 5 is below the clamp; joints start at rest so the gait target is
  // zero on the first step and twist decays towards zero.
  CHECK(nh.joint_vel[0] ==
        doctest::Approx(0.5 * nl.joint_vel[0]).epsilon(1e-14));
  const double rate_light = (s.vx - nl.vx) / s.vx;
  const double rate_heavy = (s.vx - nh.vx) / s.vx;
  CHECK(rate_light == doctest::Approx(0.02 / 0.1).epsilon(1e-12));
  CHECK(rate_heavy == doctest::Approx(0.5 * rate_light).epsilon(1e-12));
}

TEST_CASE("observation copies the body-frame fields") {
  Rng rng(1);
  RobotState s = random_state(rng);
  std::vector<double> o = observe(s);
  REQUIRE(o.size() == observation_size(8));
  CHECK(o[0] == s.vx);
  CHECK(o[1] == s.vy);
  CHECK(o[2] == s.yaw_rate);
  for (std::size_t i = 0; i < 8; ++i) {
    CHECK(o[3 + i] == s.joint_pos[i]);
    CHECK(o[11 + i] == s.joint_vel[i]);
  }
  std::vector<double> flat = s.flat();
  for (std::size_t i = 0; i < o.size(); ++i) {
    CHECK(flat[kObservationOffset + i] == o[i]);
  }
  for (double v : observe(RobotState{})) CHECK(v == 0.0);
}

TEST_CASE("observation ignores world pose") {
  Rng rng(2);
  RobotState a = random_state(rng);
  RobotState b = a;
  b.x += 4.0;
  b.y -= 1.5;
  b.heading = wrap_angle(b.heading + 2.0);
  CHECK(observe(a) == observe(b));
}

TEST_CASE("step is equivariant under planar rigid motions") {
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    RobotState s = random_state(rng);
    std::vector<double> a = random_action(rng);
    const double rot = rng.uniform(-3, 3);
    const double tx = rng.uniform(-5, 5);
    const double ty = rng.uniform(-5, 5);
    RobotState moved = s;
    moved.x = std::cos(rot) * s.x - std::sin(rot) * s.y + tx;
    moved.y = std::sin(rot) * s.x + std::cos(rot) * s.y + ty;
    moved.heading = wrap_angle(s.heading + rot);
    const PhysicalParams p = PhysicalParams::env2();
    RobotState n1 = step(s, a, p);
    RobotState n2 = step(moved, a, p);
    CHECK(n2.x ==
          doctest::Approx(std::cos(rot) * n1.x - std::sin(rot) * n1.y + tx)
              .epsilon(1e-12));
    CHECK(n2.y ==
          doctest::Approx(std::sin(rot) * n1.x + std::cos(rot) * n1.y + ty)
              .epsilon(1e-12));
    CHECK(std::fabs(wrap_angle(n2.heading - n1.heading - rot)) < 1e-12);
    CHECK(observe(n1) == observe(n2));
  }
}

TEST_CASE("heading stays wrapped") {
  Rng rng(4);
  RobotState s = random_state(rng);
  s.heading = std::numbers::pi - 1e-3;
  s.yaw_rate = 1.0;
  RobotState n = step(s, std::vector<double>(8, 0.0), PhysicalParams{});
  CHECK(n.heading > -std::numbers::pi);
  CHECK(n.heading <= std::numbers::pi);
  CHECK(n.heading < 0.0);
}

TEST_CASE("with zero action PD energy and twist decay") {
  Rng rng(5);
  for (const PhysicalParams& p :
       {PhysicalParams::original(), PhysicalParams::env1(),
        PhysicalParams::env2(), PhysicalParams::env4()}) {
    for (int trial = 0; trial < 20; ++trial) {
      RobotState s = random_state(rng);
      std::fill(s.prev_action.begin(), s.prev_action.end(), 0.0);
      const std::vector<double> zero(8, 0.0);
      double energy = pd_energy(s, p);
      for (int t = 0; t < 200; ++t) {
        s = step(s, zero, p);
        const double e = pd_energy(s, p);
        CHECK(e <= energy + 1e-12);
        energy = e;
      }
      const double speed = std::hypot(s.vx, s.vy, s.yaw_rate);
      CHECK(speed < 1e-3);
    }
  }
}

TEST_CASE("latency blending") {
  Rng rng(6);
  RobotState s = random_state(rng);
  std::vector<double> a = random_action(rng);
  PhysicalParams no_lat = PhysicalParams::env2();
  no_lat.latency_ms = 0.0;
  // With lambda = 0 the previous action has no influence.
  RobotState s2 = s;
  for (double& v : s2.prev_action) v = rng.uniform(-1, 1);
  RobotState n1 = step(s, a, no_lat);
  RobotState n2 = step(s2, a, no_lat);
  CHECK(n1.joint_pos == n2.joint_pos);
  CHECK(n1.joint_vel == n2.joint_vel);
  // A constant action makes latency irrelevant.
  s.prev_action = a;
  RobotState n3 = step(s, a, PhysicalParams::env2());
  RobotState n4 = step(s, a, no_lat);
  CHECK(n3 == n4);
}

TEST_CASE("joint acceleration never exceeds the torque bound") {
  Rng rng(7);
  const PhysicalParams p = PhysicalParams::env1();
  for (int trial = 0; trial < 200; ++trial) {
    RobotState s = random_state(rng);
    std::vector<double> a = random_action(rng);
    for (double& v : a) v *= 3.0;
    RobotState n = step(s, a, p);
    for (std::size_t i = 0; i < 8; ++i) {
      const double acc = (n.joint_vel[i] - s.joint_vel[i]) / kDt;
      CHECK(std::fabs(acc) <= p.max_torque / p.joint_inertia() * (1 + 1e-12));
    }
    for (std::size_t i = 0; i < 8; ++i) {
      CHECK(std::fabs(n.prev_action[i]) <= kActionLimit);
    }
  }
}

TEST_CASE("step rejects bad inputs") {
  RobotState s;
  CHECK_THROWS_AS(step(s, std::vector<double>(7, 0.0), PhysicalParams{}),
                  ShapeError);
  std::vector<double> a(8, 0.0);
  a[0] = NAN;
  CHECK_THROWS_AS(step(s, a, PhysicalParams{}), NonFiniteError);
  PhysicalParams p;
  p.latency_ms = 25.0;
  CHECK_THROWS_AS(p.validate(), InvalidArgument);
  CHECK_THROWS_AS(PhysicalParams::by_name("env9"), InvalidArgument);
}

TEST_CASE("table of physical parameters") {
  CHECK(PhysicalParams::original().mass == 5.74);
  CHECK(PhysicalParams::env1().mass == 14.0);
  CHECK(PhysicalParams::env1().kp == 40.0);
  CHECK(PhysicalParams::env1().latency_ms == 6.0);
  CHECK(PhysicalParams::env1().max_torque == 16.2);
  CHECK(PhysicalParams::env2().mass == doctest::Approx(8.74));
  CHECK(PhysicalParams::env3().mass == doctest::Approx(10.74));
  CHECK(PhysicalParams::env4().mass == doctest::Approx(12.74));
  CHECK(PhysicalParams::env4().latency_ms == 6.0);
}

TEST_CASE("zero policy rollout stays at rest") {
  Trajectory t =
      rollout([](const RobotState& s, std::size_t,
                 Rng&) { return std::vector<double>(s.joints(), 0.0); },
              RobotState{}, PhysicalParams{}, 1500, 1);
  CHECK(t.steps() == 1500);
  CHECK(t.states.size() == 1501);
  CHECK(static_cast<double>(t.steps()) * kDt == doctest::Approx(30.0));
  for (const RobotState& s : t.states) CHECK(s == RobotState{});
}

TEST_CASE("rollouts are deterministic for a seed") {
  auto noisy = [](const RobotState& s, std::size_t, Rng& rng) {
    std::vector<double> a(s.joints());
    for (double& v : a) v = rng.uniform(-0.5, 0.5);
    return a;
  };
  Trajectory a = rollout(noisy, RobotState{}, PhysicalParams::env3(), 200, 9);
  Trajectory b = rollout(noisy, RobotState{}, PhysicalParams::env3(), 200, 9);
  Trajectory c = rollout(noisy, RobotState{}, PhysicalParams::env3(), 200, 10);
  CHECK(a.states == b.states);
  CHECK(a.actions == b.actions);
  CHECK_FALSE(a.states == c.states);
}

TEST_CASE("rollout truncates on a non-finite action") {
  Trajectory t = rollout(
      [](const RobotState& s, std::size_t k, Rng&) {
        return std::vector<double>(s.joints(), k == 5 ? NAN : 0.1);
      },
      RobotState{}, PhysicalParams{}, 20, 0,
      [](const RobotState&, std::size_t) { return Command{0.5, 0.0}; });
  CHECK(t.truncated);
  CHECK(t.steps() == 5);
  CHECK(t.commands.size() == 5);
}

TEST_CASE("reference clip length follows the 50 Hz clock") {
  ReferenceClip clip =
      scripted_gait_reference(0.9, 0.0, 10.0, PhysicalParams{});
  CHECK(clip.frames.size() == 500);
  CHECK(clip.frames.front().x == 0.0);
  CHECK(clip.frames.front().heading == 0.0);
}

TEST_CASE("stationary gait has no net displacement over a cycle") {
  ReferenceClip clip = scripted_gait_reference(0.0, 0.0, 4.0, PhysicalParams{});
  // f = 1 Hz: one cycle is 50 frames.
  for (std::size_t start : {0u, 50u, 120u}) {
    const RobotState& a = clip.frames[start];
    const RobotState& b = clip.frames[start + 50];
    CHECK(std::hypot(b.x - a.x, b.y - a.y) < 1e-3);
  }
}

TEST_CASE("scripted gait mean twist matches its tags") {
  for (auto [speed, turn] :
       {std::pair{0.6, 0.0}, std::pair{0.9, 0.0}, std::pair{1.2, 0.0},
        std::pair{0.9, 0.6}, std::pair{0.6, -0.8}, std::pair{0.0, 1.0}}) {
    ReferenceClip clip = scripted_gait_reference(speed, turn, 10.0, {});
    double vx = 0.0;
    double yaw = 0.0;
    for (const RobotState& f : clip.frames) {
      vx += f.vx;
      yaw += f.yaw_rate;
    }
    vx /= static_cast<double>(clip.frames.size());
    yaw /= static_cast<double>(clip.frames.size());
    CHECK(std::fabs(vx - speed) < 2e-3);
    CHECK(std::fabs(yaw - turn) < 2e-3);
  }
}

TEST_CASE("faster clips move faster") {
  auto mean_speed = [](double v) {
    ReferenceClip clip = scripted_gait_reference(v, 0.0, 6.0, {});
    const RobotState& last = clip.frames.back();
    return std::hypot(last.x, last.y) /
           (static_cast<double>(clip.frames.size() - 1) * kDt);
  };
  CHECK(mean_speed(1.2) > mean_speed(0.6));
}

TEST_CASE("clip request validation") {
  CHECK_THROWS_AS(scripted_gait_reference(1.6, 0.0, 1.0, {}), InvalidArgument);
  CHECK_THROWS_AS(scripted_gait_reference(0.5, 2.0, 1.0, {}), InvalidArgument);
  CHECK_THROWS_AS(scripted_gait_reference(-0.1, 0.0, 1.0, {}), InvalidArgument);
  CHECK_THROWS_AS(scripted_gait_reference(0.5, 0.0, 0.0, {}), InvalidArgument);
}

TEST_CASE("clip JSON round trip is exact") {
  ReferenceClip clip = scripted_gait_reference(0.9, 0.3, 2.0, {});
  nlohmann::json doc = clip_to_json(clip);
  ReferenceClip back = clip_from_json(nlohmann::json::parse(doc.dump()));
  CHECK(back.speed == clip.speed);
  CHECK(back.turn == clip.turn);
  CHECK(back.frames == clip.frames);
  CHECK(doc.at("frames").at(0).size() == RobotState::flat_size(8));
}
