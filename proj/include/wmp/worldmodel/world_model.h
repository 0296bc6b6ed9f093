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

#ifndef WMP_WORLDMODEL_WORLD_MODEL_H_
#define WMP_WORLDMODEL_WORLD_MODEL_H_

#include <span>
#include <string>
#include <vector>

#include "wmp/autodiff/graph.h"
#include "wmp/autodiff/mlp.h"
#include "wmp/autodiff/param_store.h"
#include "wmp/common/rng.h"
#include "wmp/envsim/env.h"
#include "wmp/trainer/replay_buffer.h"

namespace wmp::wm {

// Normalization statistics, frozen per training phase and stored next to the
// weights. Inputs are normalized as (x - mean) / std; the network output is
// multiplied by delta_std to give the body-frame state delta.
struct Stats {
  std::vector<double> obs_mean, obs_std;
  std::vector<double> act_mean, act_std;
  std::vector<double> delta_std;
  // Per state field weight of the training loss.
  std::vector<double> loss_weight;

  static Stats identity(std::size_t joints);
  static Stats fit(const trainer::ReplayBuffer& buffer);
};

// Name of every flat RobotState field, e.g. "joint_vel[3]".
std::vector<std::string> state_field_names(std::size_t joints);

struct WorldModelConfig {
  std::size_t joints = env::kDefaultJoints;
  std::vector<std::size_t> hidden{256, 256};
};

// Residual dynamics model: the network maps (observation, action) to a
// body-frame state delta which is composed with the current pose.
class WorldModel {
 public:
  explicit WorldModel(WorldModelConfig config = {},
                      std::string prefix = "world/");

  const WorldModelConfig& config() const { return config_; }
  std::size_t joints() const { return config_.joints; }
  std::size_t state_size() const {
    return env::RobotState::flat_size(joints());
  }
  std::size_t delta_size() const { return 6 + 2 * joints(); }
  const ad::Mlp& net() const { return net_; }
  std::string net_prefix() const { return prefix_ + "net/"; }
  std::string stats_prefix() const { return prefix_ + "stats/"; }

  // Glorot weights with a zero output layer (identity dynamics) and
  // identity statistics.
  void init(ad::ParamStore& store, Rng& rng) const;
  void set_stats(ad::ParamStore& store, const Stats& stats) const;
  Stats stats(const ad::ParamStore& store) const;

  // state [B, S], action [B, J] -> next state [B, S]. prev_action of the
  // prediction is the clamped action.
  ad::Var predict(ad::Graph& graph, const ad::ParamStore& store, ad::Var state,
                  ad::Var action, bool trainable = true) const;
  ad::Tensor predict_values(const ad::ParamStore& store,
                            const ad::Tensor& state,
                            const ad::Tensor& action) const;
  env::RobotState predict_state(const ad::ParamStore& store,
                                const env::RobotState& state,
                                std::span<const double> action) const;

  // Open-loop n-step loss: sum over t of the batch mean of
  // ||w * (s_hat_t - s_t)|| with wrapped heading difference. Unit weights
  // unless `weighted`, in which case Stats::loss_weight is used.
  ad::Var prediction_loss(ad::Graph& graph, const ad::ParamStore& store,
                          const trainer::SegmentBatch& batch,
                          bool weighted = false, bool trainable = true) const;

  // Wrapped state difference a - b, [B, S].
  static ad::Var state_difference(ad::Graph& graph, ad::Var a, ad::Var b);

 private:
  WorldModelConfig config_;
  std::string prefix_;

  std::string nonfinite_field(const ad::ParamStore& store,
                              const ad::Tensor& state,
                              const ad::Tensor& action) const;
  ad::Mlp net_;
};

struct WorldModelTrainOptions {
  std::size_t updates = 200;
  std::size_t batch = 64;
  std::size_t horizon = 8;
  double lr = 3e-4;
  // Learning rate reached at the last update, decayed geometrically from
  // `lr`; 0 keeps it constant.
  double lr_final = 0.0;
  double max_grad_norm = 0.0;
};

struct WorldModelTrainResult {
  double first_loss = 0.0;
  double final_loss = 0.0;
};

// Adam on the weighted n-step loss over segments drawn from `buffer`.
WorldModelTrainResult train_world_model(const WorldModel& model,
                                        ad::ParamStore& store,
                                        const trainer::ReplayBuffer& buffer,
                                        const WorldModelTrainOptions& options,
                                        Rng& rng);

}  // namespace wmp::wm

#endif  // WMP_WORLDMODEL_WORLD_MODEL_H_
