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

#include "wmp/trainer/replay_buffer.h"

#include <algorithm>

#include "wmp/common/error.h"

namespace wmp::trainer {

StoredTrajectory from_trajectory(const env::Trajectory& traj, int clip_id,
                                 int start_frame) {
  StoredTrajectory out;
  out.states.reserve(traj.states.size());
  for (const env::RobotState& s : traj.states) out.states.push_back(s.flat());
  out.actions = traj.actions;
  out.commands = traj.commands;
  out.clip_id = clip_id;
  out.start_frame = start_frame;
  return out;
}

void ReplayBuffer::add(StoredTrajectory traj) {
  if (traj.states.size() != traj.steps() + 1) {
    throw InvalidArgument("trajectory must hold one more state than actions");
  }
  if (!traj.commands.empty() && traj.commands.size() != traj.steps()) {
    throw InvalidArgument("trajectory commands must align with actions");
  }
  if (!trajectories_.empty() &&
      traj.states[0].size() != trajectories_.front().states[0].size()) {
    throw ShapeError("trajectory state size differs from buffer contents");
  }
  transitions_ += traj.steps();
  ++insertions_;
  trajectories_.push_back(std::move(traj));
  while (transitions_ > capacity_ && trajectories_.size() > 1) {
    transitions_ -= trajectories_.front().steps();
    trajectories_.pop_front();
  }
}

std::size_t ReplayBuffer::joints() const {
  if (trajectories_.empty()) return 0;
  return (trajectories_.front().states[0].size() - 6) / 3;
}

std::size_t ReplayBuffer::segment_count(std::size_t n) const {
  std::size_t count = 0;
  for (const StoredTrajectory& t : trajectories_) {
    if (t.steps() >= n) count += t.steps() - n + 1;
  }
  return count;
}

SegmentBatch ReplayBuffer::sample(std::size_t m, std::size_t n,
                                  Rng& rng) const {
  if (n == 0) throw InvalidArgument("segment length must be at least 1");
  std::vector<std::size_t> cumulative;
  cumulative.reserve(trajectories_.size());
  std::size_t total = 0;
  for (const StoredTrajectory& t : trajectories_) {
    if (t.steps() >= n) total += t.steps() - n + 1;
    cumulative.push_back(total);
  }
  if (total < m || m == 0) {
    throw InvalidArgument("replay buffer holds " + std::to_string(total) +
                          " segments of length " + std::to_string(n) +
                          ", batch needs " + std::to_string(m));
  }
  const std::size_t state_size = trajectories_.front().states[0].size();
  const std::size_t joints = (state_size - 6) / 3;

  SegmentBatch batch;
  batch.states.assign(n + 1, ad::Tensor(m, state_size));
  batch.actions.assign(n, ad::Tensor(m, joints));
  batch.commands.assign(n, ad::Tensor(m, 2));
  batch.clip_ids.resize(m);
  batch.clip_frames.resize(m);
  for (std::size_t row = 0; row < m; ++row) {
    const std::size_t pick = rng.index(total);
    const auto it =
        std::upper_bound(cumulative.begin(), cumulative.end(), pick);
    const std::size_t ti = static_cast<std::size_t>(it - cumulative.begin());
    const std::size_t before = ti == 0 ? 0 : cumulative[ti - 1];
    const std::size_t start = pick - before;
    const StoredTrajectory& t = trajectories_[ti];
    for (std::size_t k = 0; k <= n; ++k) {
      std::copy(t.states[start + k].begin(), t.states[start + k].end(),
                batch.states[k].row_span(row).begin());
    }
    for (std::size_t k = 0; k < n; ++k) {
      std::copy(t.actions[start + k].begin(), t.actions[start + k].end(),
                batch.actions[k].row_span(row).begin());
      if (!t.commands.empty()) {
        batch.commands[k](row, 0) = t.commands[start + k].v;
        batch.commands[k](row, 1) = t.commands[start + k].omega;
      }
    }
    batch.clip_ids[row] = t.clip_id;
    batch.clip_frames[row] = t.start_frame + static_cast<int>(start);
  }
  return batch;
}

}  // namespace wmp::trainer
