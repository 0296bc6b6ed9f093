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

#include "wmp/expcli/gradient_suite.h"

#include "wmp/envsim/reference.h"
#include "wmp/trainer/replay_buffer.h"
#include "wmp/vaepolicy/policy.h"
#include "wmp/worldmodel/world_model.h"

namespace wmp::cli {
namespace {

using ad::Graph;
using ad::ParamStore;
using ad::Tensor;

constexpr std::size_t kJoints = 8;

void randomize(ParamStore& store, const std::string& prefix, Rng& rng,
               double scale) {
  for (const auto& name : store.names_with_prefix(prefix)) {
    for (double& v : store.mutable_at(name).values()) {
      v = rng.uniform(-scale, scale);
    }
  }
}

// Short noisy gait episodes at random speeds and turns.
trainer::ReplayBuffer gait_buffer(Rng& rng) {
  trainer::ReplayBuffer buffer;
  for (int e = 0; e < 3; ++e) {
    const env::GaitPlan plan =
        env::plan_gait(rng.uniform(0.3, 1.2), rng.uniform(-0.5, 0.5), {});
    const double phase = rng.uniform(0.0, 1.0);
    env::RobotState start(kJoints);
    start.heading = rng.uniform(-3.0, 3.0);
    const env::Trajectory traj = env::rollout(
        [&](const env::RobotState&, std::size_t t, Rng& r) {
          std::vector<double> a = plan.action(phase + t * env::kDt);
          for (double& v : a) v += r.uniform(-0.1, 0.1);
          return a;
        },
        start, {}, 40, rng.fork(e).seed());
    buffer.add(trainer::from_trajectory(traj));
  }
  return buffer;
}

Tensor random_states(Rng& rng, std::size_t rows) {
  Tensor t(rows, env::RobotState::flat_size(kJoints));
  for (std::size_t r = 0; r < rows; ++r) {
    env::RobotState s(kJoints);
    s.x = rng.uniform(-1, 1);
    s.y = rng.uniform(-1, 1);
    s.heading = rng.uniform(-2, 2);
    s.vx = rng.uniform(0, 1);
    s.vy = rng.uniform(-0.1, 0.1);
    s.yaw_rate = rng.uniform(-0.5, 0.5);
    for (std::size_t i = 0; i < kJoints; ++i) {
      s.joint_pos[i] = rng.uniform(-0.5, 0.5);
      s.joint_vel[i] = rng.uniform(-1, 1);
      s.prev_action[i] = rng.uniform(-0.5, 0.5);
    }
    const std::vector<double> flat = s.flat();
    std::copy(flat.begin(), flat.end(), t.row_span(r).begin());
  }
  return t;
}

std::vector<Tensor> drifting_refs(const Tensor& start, std::size_t count,
                                  Rng& rng) {
  std::vector<Tensor> refs{start};
  for (std::size_t k = 1; k < count; ++k) {
    Tensor next = refs.back();
    for (std::size_t r = 0; r < next.rows(); ++r) {
      next(r, 0) += 0.02 * std::cos(next(r, 2));
      next(r, 1) += 0.02 * std::sin(next(r, 2));
      for (std::size_t i = 6; i < 6 + 2 * kJoints; ++i) {
        next(r, i) += rng.uniform(-0.05, 0.05);
      }
    }
    refs.push_back(next);
  }
  return refs;
}

struct SmallModels {
  policy::VaePolicy policy;
  wm::WorldModel world;
  ParamStore store;

  explicit SmallModels(std::uint64_t seed)
      : policy(policy::PolicyConfig{kJoints, 3, 2, 0.3, {6}}),
        world(wm::WorldModelConfig{kJoints, {6}}) {
    Rng rng(seed);
    policy.init(store, rng);
    world.init(store, rng);
    for (const char* p : {policy::kPriorPrefix, policy::kMtPrefix,
                          policy::kCfPrefix, policy::kDecoderPrefix}) {
      randomize(store, p, rng, 0.5);
    }
    randomize(store, world.net_prefix(), rng, 0.3);
  }
};

}  // namespace

std::vector<GradientCase> run_gradient_suite(std::size_t seeds,
                                             std::uint64_t first_seed) {
  std::vector<GradientCase> out;
  for (std::uint64_t seed = first_seed; seed < first_seed + seeds; ++seed) {
    Rng rng(seed);
    SmallModels m(seed);
    const trainer::ReplayBuffer buffer = gait_buffer(rng);
    m.world.set_stats(m.store, wm::Stats::fit(buffer));

    for (std::size_t n : {1, 4, 8}) {
      Rng sample_rng = rng.fork(n);
      const trainer::SegmentBatch batch = buffer.sample(3, n, sample_rng);
      ad::GradCheckOptions opts;
      opts.prefixes = {m.world.net_prefix()};
      out.push_back({"world_model_n" + std::to_string(n), seed,
                     ad::finite_difference_check(
                         [&](Graph& g, const ParamStore& s) {
                           return m.world.prediction_loss(g, s, batch);
                         },
                         m.store, opts)});
    }

    const Tensor start = random_states(rng, 2);
    const std::vector<Tensor> refs = drifting_refs(start, 6, rng);
    {
      const policy::Trainable trainable = policy::Trainable::motion_tracking();
      ad::GradCheckOptions opts;
      opts.prefixes = m.policy.prefixes(trainable);
      out.push_back({"motion_tracking_n4", seed,
                     ad::finite_difference_check(
                         [&](Graph& g, const ParamStore& s) {
                           Rng r(seed);
                           return m.policy.mt_policy_loss(
                               g, s, m.world, start, refs, 4, &r, trainable);
                         },
                         m.store, opts)});
    }
    {
      m.policy.snapshot_decoder(m.store);
      randomize(m.store, policy::kDecoderPrefix, rng, 0.5);
      std::vector<Tensor> commands;
      for (int t = 0; t < 4; ++t) {
        Tensor c(2, 2);
        for (std::size_t r = 0; r < 2; ++r) {
          c(r, 0) = rng.uniform(0.0, 1.5);
          c(r, 1) = rng.uniform(-1.5, 1.5);
        }
        commands.push_back(c);
      }
      const policy::Trainable trainable = policy::Trainable::fine_tune();
      ad::GradCheckOptions opts;
      opts.prefixes = m.policy.prefixes(trainable);
      out.push_back({"command_following_reg_n4", seed,
                     ad::finite_difference_check(
                         [&](Graph& g, const ParamStore& s) {
                           Rng r(seed);
                           return m.policy.cf_policy_loss(g, s, m.world, start,
                                                          commands, 4, 0.1, &r,
                                                          trainable);
                         },
                         m.store, opts)});
    }
  }
  return out;
}

}  // namespace wmp::cli
