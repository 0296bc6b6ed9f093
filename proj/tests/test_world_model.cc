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

#include "doctest.h"
#include "wmp/autodiff/gradcheck.h"
#include "wmp/common/error.h"
#include "wmp/envsim/reference.h"
#include "wmp/worldmodel/world_model.h"

using namespace wmp;
using namespace wmp::wm;
using ad::Graph;
using ad::ParamStore;
using ad::Tensor;
using ad::Var;

namespace {

env::RobotState random_state(Rng& rng) {
  env::RobotState s;
  s.x = rng.uniform(-2, 2);
  s.y = rng.uniform(-2, 2);
  s.heading = rng.uniform(-3, 3);
  s.vx = rng.uniform(0, 1);
  s.vy = rng.uniform(-0.1, 0.1);
  s.yaw_rate = rng.uniform(-0.5, 0.5);
  for (std::size_t i = 0; i < s.joints(); ++i) {
    s.joint_pos[i] = rng.uniform(-0.5, 0.5);
    s.joint_vel[i] = rng.uniform(-2, 2);
    s.prev_action[i] = rng.uniform(-0.5, 0.5);
  }
  return s;
}

std::vector<double> random_action(Rng& rng) {
  std::vector<double> a(8);
  for (double& v : a) v = rng.uniform(-0.6, 0.6);
  return a;
}

// Buffer of short random-action episodes around a scripted gait.
trainer::ReplayBuffer gait_buffer(std::size_t episodes, std::size_t steps,
                                  std::uint64_t seed) {
  trainer::ReplayBuffer buffer;
  Rng rng(seed);
  for (std::size_t e = 0; e < episodes; ++e) {
    const double speed = rng.uniform(0.3, 1.2);
    const double turn = rng.uniform(-0.6, 0.6);
    const env::GaitPlan plan = env::plan_gait(speed, turn, {});
    const double phase = rng.uniform(0, 2);
    env::Trajectory traj = env::rollout(
        [&](const env::RobotState&, std::size_t t, Rng& r) {
          std::vector<double> a = plan.action(phase + t * env::kDt);
          for (double& v : a) v += r.uniform(-0.1, 0.1);
          return a;
        },
        random_state(rng), {}, steps, rng.fork(e).seed());
    buffer.add(trainer::from_trajectory(traj));
  }
  return buffer;
}

// Single-row batch holding one true transition sequence.
trainer::SegmentBatch segment_of(const env::Trajectory& traj, std::size_t n) {
  trainer::SegmentBatch b;
  for (std::size_t t = 0; t <= n; ++t) {
    b.states.push_back(Tensor::row(traj.states[t].flat()));
  }
  for (std::size_t t = 0; t < n; ++t) {
    b.actions.push_back(Tensor::row(traj.actions[t]));
    b.commands.push_back(Tensor(1, 2));
  }
  return b;
}

// Body-frame delta the surrogate actually produced.
std::vector<double> true_delta(const env::RobotState& a,
                               const env::RobotState& b) {
  std::vector<double> fa = a.flat();
  std::vector<double> fb = b.flat();
  const double c = std::cos(a.heading);
  const double s = std::sin(a.heading);
  std::vector<double> d(6 + 2 * a.joints());
  d[0] = c * (b.x - a.x) + s * (b.y - a.y);
  d[1] = -s * (b.x - a.x) + c * (b.y - a.y);
  d[2] = env::wrap_angle(b.heading - a.heading);
  for (std::size_t i = 3; i < d.size(); ++i) d[i] = fb[i] - fa[i];
  return d;
}

}  // namespace

TEST_CASE("zero output layer gives the identity model") {
  WorldModel model;
  ParamStore store;
  Rng rng(1);
  model.init(store, rng);
  for (int trial = 0; trial < 20; ++trial) {
    env::RobotState s = random_state(rng);
    env::RobotState next = model.predict_state(store, s, s.prev_action);
    CHECK(next == s);
  }
}

TEST_CASE("predicted body-frame deltas ignore world pose") {
  WorldModel model(WorldModelConfig{8, {16}});
  ParamStore store;
  Rng rng(2);
  model.init(store, rng);
  for (double& v : store.mutable_at(model.net().weight_name(1)).values()) {
    v = rng.uniform(-0.3, 0.3);
  }
  env::RobotState a = random_state(rng);
  env::RobotState b = a;
  b.x -= 3.0;
  b.y += 1.0;
  b.heading = env::wrap_angle(b.heading + 1.3);
  std::vector<double> act = random_action(rng);
  env::RobotState na = model.predict_state(store, a, act);
  env::RobotState nb = model.predict_state(store, b, act);
  std::vector<double> da = true_delta(a, na);
  std::vector<double> db = true_delta(b, nb);
  for (std::size_t i = 0; i < da.size(); ++i) {
    CHECK(da[i] == doctest::Approx(db[i]).epsilon(1e-12).scale(1.0));
  }
}

TEST_CASE("pose composition with exact deltas reproduces the surrogate") {
  // A single-layer net with zero weights outputs its bias, so writing the
  // true normalized delta into the bias makes a perfect one-step model.
  WorldModel model(WorldModelConfig{8, {}});
  ParamStore store;
  Rng rng(3);
  model.init(store, rng);
  const Stats stats = model.stats(store);
  env::Trajectory traj = env::rollout(
      [](const env::RobotState&, std::size_t, Rng& r) {
        std::vector<double> a(8);
        for (double& v : a) v = r.uniform(-0.8, 0.8);
        return a;
      },
      random_state(rng), env::PhysicalParams::env2(), 12, 4);
  env::RobotState s_hat = traj.states[0];
  for (std::size_t t = 0; t < traj.steps(); ++t) {
    std::vector<double> d = true_delta(traj.states[t], traj.states[t + 1]);
    Tensor& bias = store.mutable_at(model.net().bias_name(0));
    for (std::size_t i = 0; i < d.size(); ++i)
      bias[i] = d[i] / stats.delta_std[i];
    s_hat = model.predict_state(store, s_hat, traj.actions[t]);
    std::vector<double> a = s_hat.flat();
    std::vector<double> b = traj.states[t + 1].flat();
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(std::fabs(a[i] - b[i]) < 1e-9 * static_cast<double>(t + 1));
    }
  }
}

TEST_CASE("perfect one-step model has zero prediction loss") {
  WorldModel model(WorldModelConfig{8, {}});
  ParamStore store;
  Rng rng(4);
  model.init(store, rng);
  env::Trajectory traj =
      env::rollout([](const env::RobotState&, std::size_t,
                      Rng&) { return std::vector<double>(8, 0.3); },
                   random_state(rng), {}, 1, 0);
  std::vector<double> d = true_delta(traj.states[0], traj.states[1]);
  Tensor& bias = store.mutable_at(model.net().bias_name(0));
  for (std::size_t i = 0; i < d.size(); ++i) bias[i] = d[i];
  Graph g;
  Var loss = model.prediction_loss(g, store, segment_of(traj, 1));
  CHECK(g.value(loss)[0] < 1e-12);
}

TEST_CASE("zero-residual loss over one step is the state change norm") {
  WorldModel model;
  ParamStore store;
  Rng rng(5);
  model.init(store, rng);
  env::Trajectory traj = env::rollout(
      [](const env::RobotState&, std::size_t, Rng& r) {
        std::vector<double> a(8);
        for (double& v : a) v = r.uniform(-0.8, 0.8);
        return a;
      },
      random_state(rng), {}, 2, 6);
  Graph g;
  double loss1 =
      g.value(model.prediction_loss(g, store, segment_of(traj, 1)))[0];
  // The identity model keeps every field except prev_action, which it sets
  // to the action exactly as the surrogate does.
  const std::vector<double> a = traj.states[0].flat();
  const std::vector<double> b = traj.states[1].flat();
  double sq = 0.0;
  for (std::size_t i = 0; i < 6 + 16; ++i) {
    double d = b[i] - a[i];
    if (i == 2) d = env::wrap_angle(d);
    sq += d * d;
  }
  CHECK(loss1 == doctest::Approx(std::sqrt(sq)).epsilon(1e-12));
  Graph g2;
  double loss2 =
      g2.value(model.prediction_loss(g2, store, segment_of(traj, 2)))[0];
  CHECK(loss2 >= loss1);
}

TEST_CASE("non-finite prediction names the offending field") {
  WorldModel model(WorldModelConfig{8, {}});
  ParamStore store;
  Rng rng(6);
  model.init(store, rng);
  Stats st = model.stats(store);
  st.delta_std[4] = 1e300;
  model.set_stats(store, st);
  store.mutable_at(model.net().bias_name(0))[4] = 1e300;
  try {
    model.predict_state(store, env::RobotState{}, std::vector<double>(8, 0.0));
    FAIL("expected NonFiniteError");
  } catch (const NonFiniteError& e) {
    CHECK(std::string(e.what()).find("delta_vy") != std::string::npos);
  }
}

TEST_CASE("prediction loss gradients match finite differences") {
  for (std::size_t n : {1u, 4u, 8u}) {
    trainer::ReplayBuffer buffer = gait_buffer(4, 20, 7 + n);
    WorldModel model(WorldModelConfig{8, {6}});
    ParamStore store;
    Rng rng(n);
    model.init(store, rng);
    model.set_stats(store, Stats::fit(buffer));
    for (const auto& name : store.names_with_prefix(model.net_prefix())) {
      for (double& v : store.mutable_at(name).values())
        v = rng.uniform(-0.5, 0.5);
    }
    trainer::SegmentBatch batch = buffer.sample(3, n, rng);
    ad::GradCheckOptions opts;
    opts.prefixes = {model.net_prefix()};
    ad::GradCheckReport rep = ad::finite_difference_check(
        [&](Graph& g, const ParamStore& s) {
          return model.prediction_loss(g, s, batch, true);
        },
        store, opts);
    CHECK_MESSAGE(rep.passed(), rep.summary());
    CHECK(rep.checked > 100);
  }
}

TEST_CASE("world model training reduces the one-step loss tenfold") {
  trainer::ReplayBuffer train = gait_buffer(40, 150, 11);
  trainer::ReplayBuffer held = gait_buffer(8, 150, 12);
  WorldModel model(WorldModelConfig{8, {64, 64}});
  ParamStore store;
  Rng rng(13);
  model.init(store, rng);
  model.set_stats(store, Stats::fit(train));
  Rng eval_rng(14);
  trainer::SegmentBatch eval = held.sample(256, 1, eval_rng);
  auto held_loss = [&] {
    Graph g;
    return g.value(model.prediction_loss(g, store, eval, true))[0];
  };
  const double before = held_loss();
  WorldModelTrainOptions opts{
      .updates = 8000, .batch = 64, .horizon = 1, .lr = 2e-3, .lr_final = 1e-4};
  train_world_model(model, store, train, opts, rng);
  const double after = held_loss();
  MESSAGE("held-out one-step loss " << before << " -> " << after);
  CHECK(after * 10.0 < before);
}

TEST_CASE("world model training edge cases") {
  trainer::ReplayBuffer buffer = gait_buffer(2, 10, 15);
  WorldModel model(WorldModelConfig{8, {8}});
  ParamStore store;
  Rng rng(16);
  model.init(store, rng);
  ParamStore before = store;
  train_world_model(model, store, buffer, {.updates = 0}, rng);
  CHECK(store == before);
  CHECK_THROWS_AS(
      train_world_model(model, store, buffer,
                        {.updates = 1, .batch = 64, .horizon = 8}, rng),
      InvalidArgument);

  auto run = [&](const trainer::ReplayBuffer& b) {
    ParamStore s;
    Rng r(17);
    model.init(s, r);
    train_world_model(model, s, b, {.updates = 5, .batch = 4, .horizon = 3}, r);
    return s;
  };
  CHECK(run(buffer) == run(buffer));
}
