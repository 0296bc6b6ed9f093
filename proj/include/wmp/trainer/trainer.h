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

#ifndef WMP_TRAINER_TRAINER_H_
#define WMP_TRAINER_TRAINER_H_

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "wmp/autodiff/param_store.h"
#include "wmp/common/error.h"
#include "wmp/envsim/env.h"
#include "wmp/envsim/reference.h"
#include "wmp/pathcmd/path.h"
#include "wmp/trainer/replay_buffer.h"
#include "wmp/vaepolicy/policy.h"
#include "wmp/worldmodel/world_model.h"

namespace wmp::trainer {

enum class Phase { kMtScratch, kCfScratch, kFinetune, kOffPolicy };

// "mt-scratch", "cf-scratch", "finetune", "offpolicy".
std::string phase_name(Phase phase);
Phase phase_from_name(const std::string& name);

struct TrainConfig {
  Phase phase = Phase::kMtScratch;
  std::size_t iterations = 20;
  // Environment transitions per agent and iteration.
  std::size_t n_sample = 3000;
  std::size_t agents = 1;
  std::size_t n_w = 500;
  std::size_t n_pi = 100;
  std::size_t batch = 64;
  // Policy unroll length through the world model.
  std::size_t rollout = 16;
  // Open-loop horizon of the world-model loss.
  std::size_t wm_horizon = 8;
  double lr_w = 1e-3;
  double lr_pi = 3e-4;
  double max_grad_norm = 1.0;
  double reg_weight = 0.1;
  std::size_t episode_steps = 150;
  double bootstrap_noise = 0.1;
  double command_hold_min = 2.0;
  double command_hold_max = 4.0;
  double v_max = 1.5;
  double omega_max = 1.5;
  std::uint64_t seed = 0;

  // Held-out evaluation after every iteration.
  double eval_seconds = 30.0;
  path::PathKind eval_path = path::PathKind::kOblong;
  path::PursuitConfig eval_pursuit;
  std::size_t eval_clips = 8;
  // Fine-tuning collects data by following the evaluation path; otherwise
  // commands are sampled at random.
  bool collect_on_path = true;

  void validate() const;
};

struct Models {
  policy::VaePolicy policy;
  wm::WorldModel world;
};

struct Checkpoint {
  Phase phase = Phase::kMtScratch;
  std::size_t iteration = 0;
  std::uint64_t seed = 0;
  ad::ParamStore store;
};

// One CSV row. Fields that do not apply to a phase are NaN.
struct IterationMetrics {
  std::size_t iteration = 0;
  std::uint64_t samples_total = 0;
  double loss_w = NAN;
  double loss_policy = NAN;
  double reg_loss = NAN;
  double e_v = NAN;
  double e_omega = NAN;
  double e_p = NAN;
  double tracking_reward = NAN;
  double eval_loss_cf = NAN;
};

std::string metrics_csv_header();
std::string metrics_csv_row(const IterationMetrics& m);

// Raised when a loss or parameter becomes non-finite; carries the checkpoint
// of the last completed iteration.
class TrainingDiverged : public Error {
 public:
  TrainingDiverged(const std::string& message, Checkpoint last_good)
      : Error("diverged", message), last_good_(std::move(last_good)) {}
  const Checkpoint& last_good() const { return last_good_; }

 private:
  Checkpoint last_good_;
};

using IterationCallback =
    std::function<void(const Checkpoint&, const IterationMetrics&)>;

struct TrainResult {
  Checkpoint checkpoint;
  // Row 0 evaluates the starting checkpoint; row k follows iteration k.
  std::vector<IterationMetrics> metrics;
  ReplayBuffer buffer;
};

// Fresh parameters: networks initialized, policy input statistics fitted to
// the clips, world-model statistics left at identity until the first fit.
Checkpoint initialize(const Models& models,
                      const std::vector<env::ReferenceClip>& clips,
                      std::uint64_t seed);

// Motion-tracking co-training: collect, fit the world model, update prior,
// motion-tracking encoder and decoder through world-model rollouts.
TrainResult co_train_mt(const TrainConfig& config, const Models& models,
                        const env::PhysicalParams& params,
                        const std::vector<env::ReferenceClip>& clips,
                        Checkpoint start,
                        const IterationCallback& on_iteration = nullptr);

// Command-following encoder training with prior and decoder frozen.
TrainResult train_cf(const TrainConfig& config, const Models& models,
                     const env::PhysicalParams& params, Checkpoint mt,
                     const IterationCallback& on_iteration = nullptr);

// Online fine-tuning against perturbed dynamics: updates the
// command-following encoder and the decoder with the decoder regularizer.
// Takes the original-decoder snapshot on entry when absent.
TrainResult fine_tune(const TrainConfig& config, const Models& models,
                      const env::PhysicalParams& params, Checkpoint cf,
                      const IterationCallback& on_iteration = nullptr);

// Fine-tuning from stored data only. The world model is fitted once on
// `stored`, then every iteration runs n_pi policy updates. `params` is used
// for evaluation only.
TrainResult off_policy_finetune(
    const TrainConfig& config, const Models& models, const ReplayBuffer& stored,
    const env::PhysicalParams& params, Checkpoint cf,
    const IterationCallback& on_iteration = nullptr);

// Follows `path` with pure pursuit at each speed for `seconds`, using the
// command-following policy with sampled latents.
ReplayBuffer collect_path_data(const Models& models,
                               const ad::ParamStore& store,
                               const env::PhysicalParams& params,
                               const path::Path& path,
                               const std::vector<double>& speeds,
                               double seconds, std::size_t episode_steps,
                               std::uint64_t seed);

struct PathEvaluation {
  env::Trajectory trajectory;
  path::TrackingMetrics metrics;
  double loss_cf = 0.0;
};

// Deterministic path-following rollout with mean latents from the start of
// the path.
PathEvaluation evaluate_path(const Models& models, const ad::ParamStore& store,
                             const env::PhysicalParams& params,
                             const path::Path& path,
                             const path::PursuitConfig& pursuit,
                             double seconds);

// Mean-latent command following of a constant command from rest.
env::Trajectory run_command(const Models& models, const ad::ParamStore& store,
                            const env::PhysicalParams& params,
                            env::Command command, std::size_t steps);

// 1 - mean per-step tracking loss of mean-latent motion tracking in the
// environment, from the first frame of each clip for `steps` steps. With
// `prior_only` the decoder receives the prior mean instead of the posterior
// mean.
double evaluate_tracking(const Models& models, const ad::ParamStore& store,
                         const env::PhysicalParams& params,
                         const std::vector<env::ReferenceClip>& clips,
                         std::size_t steps, bool prior_only = false);

}  // namespace wmp::trainer

#endif  // WMP_TRAINER_TRAINER_H_
