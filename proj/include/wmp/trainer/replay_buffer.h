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

#ifndef WMP_TRAINER_REPLAY_BUFFER_H_
#define WMP_TRAINER_REPLAY_BUFFER_H_

#include <cstdint>
#include <deque>
#include <vector>

#include "wmp/autodiff/tensor.h"
#include "wmp/common/rng.h"
#include "wmp/envsim/env.h"

namespace wmp::trainer {

// One stored episode. `states` holds steps() + 1 flat RobotState rows.
struct StoredTrajectory {
  std::vector<std::vector<double>> states;
  std::vector<std::vector<double>> actions;
  std::vector<env::Command> commands;
  // Reference clip followed by a motion-tracking episode and the clip frame
  // aligned with states[0]; -1 when unused.
  int clip_id = -1;
  int start_frame = 0;

  std::size_t steps() const { return actions.size(); }
};

StoredTrajectory from_trajectory(const env::Trajectory& traj, int clip_id = -1,
                                 int start_frame = 0);

// A batch of M segments of length n. states[t] is [M, S], actions[t] and
// commands[t] are [M, J] and [M, 2] for t < n.
struct SegmentBatch {
  std::vector<ad::Tensor> states;
  std::vector<ad::Tensor> actions;
  std::vector<ad::Tensor> commands;
  std::vector<int> clip_ids;
  std::vector<int> clip_frames;

  std::size_t size() const { return states.empty() ? 0 : states[0].rows(); }
  std::size_t length() const { return actions.size(); }
};

class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity = 1'000'000)
      : capacity_(capacity) {}

  void add(StoredTrajectory traj);

  std::size_t trajectory_count() const { return trajectories_.size(); }
  std::size_t transitions() const { return transitions_; }
  std::size_t capacity() const { return capacity_; }
  // Total trajectories ever inserted, including evicted ones.
  std::uint64_t insertions() const { return insertions_; }
  const StoredTrajectory& trajectory(std::size_t i) const {
    return trajectories_.at(i);
  }
  std::size_t joints() const;

  // Number of distinct length-n windows that stay inside one trajectory.
  std::size_t segment_count(std::size_t n) const;
  // Samples M windows uniformly over all valid (trajectory, start) pairs.
  // Throws InvalidArgument when fewer than M windows exist.
  SegmentBatch sample(std::size_t m, std::size_t n, Rng& rng) const;

 private:
  std::size_t capacity_;
  std::size_t transitions_ = 0;
  std::uint64_t insertions_ = 0;
  std::deque<StoredTrajectory> trajectories_;
};

}  // namespace wmp::trainer

#endif  // WMP_TRAINER_REPLAY_BUFFER_H_
