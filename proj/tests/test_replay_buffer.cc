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
#include <set>

#include "doctest.h"
#include "wmp/common/error.h"
#include "wmp/envsim/reference.h"
#include "wmp/trainer/replay_buffer.h"

using namespace wmp;
using namespace wmp::trainer;

namespace {

// Trajectory whose state x field encodes (id, step) so that samples reveal
// their origin.
StoredTrajectory tagged(int id, std::size_t steps, std::size_t joints = 4) {
  StoredTrajectory t;
  for (std::size_t k = 0; k <= steps; ++k) {
    std::vector<double> s(env::RobotState::flat_size(joints), 0.0);
    s[0] = id * 1000.0 + static_cast<double>(k);
    t.states.push_back(s);
    if (k < steps) {
      t.actions.push_back(std::vector<double>(joints, s[0]));
      t.commands.push_back({static_cast<double>(id), static_cast<double>(k)});
    }
  }
  t.clip_id = id;
  t.start_frame = 10 * id;
  return t;
}

}  // namespace

TEST_CASE("sampled segments never cross trajectory boundaries") {
  ReplayBuffer buffer;
  buffer.add(tagged(1, 5));
  buffer.add(tagged(2, 3));
  buffer.add(tagged(3, 12));
  CHECK(buffer.segment_count(4) == 2 + 0 + 9);
  Rng rng(1);
  std::set<int> seen;
  for (int draw = 0; draw < 50; ++draw) {
    SegmentBatch b = buffer.sample(11, 4, rng);
    for (std::size_t r = 0; r < b.size(); ++r) {
      const double first = b.states[0](r, 0);
      const int id = static_cast<int>(first / 1000.0);
      seen.insert(id);
      for (std::size_t k = 0; k <= 4; ++k) {
        CHECK(b.states[k](r, 0) == first + static_cast<double>(k));
      }
      for (std::size_t k = 0; k < 4; ++k) {
        CHECK(b.actions[k](r, 0) == first + static_cast<double>(k));
        CHECK(b.commands[k](r, 0) == id);
      }
      CHECK(b.clip_ids[r] == id);
      CHECK(b.clip_frames[r] ==
            10 * id + static_cast<int>(first - id * 1000.0));
    }
  }
  CHECK(seen == std::set<int>{1, 3});
}

TEST_CASE("capacity evicts the oldest trajectories first") {
  ReplayBuffer buffer(20);
  buffer.add(tagged(1, 8));
  buffer.add(tagged(2, 8));
  CHECK(buffer.trajectory_count() == 2);
  buffer.add(tagged(3, 8));
  CHECK(buffer.trajectory_count() == 2);
  CHECK(buffer.transitions() == 16);
  CHECK(buffer.trajectory(0).clip_id == 2);
  CHECK(buffer.insertions() == 3);
}

TEST_CASE("insufficient segments report required and available counts") {
  ReplayBuffer buffer;
  buffer.add(tagged(1, 5));
  Rng rng(2);
  try {
    buffer.sample(10, 4, rng);
    FAIL("expected InvalidArgument");
  } catch (const InvalidArgument& e) {
    const std::string msg = e.what();
    CHECK(msg.find("holds 2") != std::string::npos);
    CHECK(msg.find("needs 10") != std::string::npos);
  }
}

TEST_CASE("sampling is deterministic for a seed") {
  ReplayBuffer buffer;
  for (int i = 0; i < 5; ++i) buffer.add(tagged(i, 20));
  Rng r1(9), r2(9);
  SegmentBatch a = buffer.sample(32, 8, r1);
  SegmentBatch b = buffer.sample(32, 8, r2);
  CHECK(a.states == b.states);
  CHECK(a.actions == b.actions);
}

TEST_CASE("rollout trajectories convert to stored rows") {
  env::ReferenceClip clip = env::scripted_gait_reference(0.6, 0.0, 1.0, {});
  env::Trajectory traj;
  traj.states = clip.frames;
  for (std::size_t k = 1; k < clip.frames.size(); ++k) {
    traj.actions.push_back(clip.frames[k].prev_action);
  }
  StoredTrajectory st = from_trajectory(traj, 0, 0);
  CHECK(st.steps() == 49);
  CHECK(st.states[3] == clip.frames[3].flat());
  ReplayBuffer buffer;
  buffer.add(st);
  CHECK(buffer.joints() == 8);
}
