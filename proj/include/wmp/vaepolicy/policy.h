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

#ifndef WMP_VAEPOLICY_POLICY_H_
#define WMP_VAEPOLICY_POLICY_H_

#include <string>
#include <vector>

#include "wmp/autodiff/graph.h"
#include "wmp/autodiff/mlp.h"
#include "wmp/autodiff/param_store.h"
#include "wmp/common/rng.h"
#include "wmp/envsim/env.h"
#include "wmp/envsim/reference.h"
#include "wmp/worldmodel/world_model.h"

namespace wmp::policy {

struct PolicyConfig {
  std::size_t joints = env::kDefaultJoints;
  std::size_t z_dim = 16;
  std::size_t window = 2;
  double sigma = 0.3;
  std::vector<std::size_t> hidden{256, 256};
};

// Which networks receive gradients. Frozen networks are bound as constants
// and report exactly zero gradient.
struct Trainable {
  bool prior = false;
  bool mt = false;
  bool cf = false;
  bool decoder = false;

  static Trainable motion_tracking() { return {true, true, false, true}; }
  static Trainable command_following() { return {false, false, true, false}; }
  static Trainable fine_tune() { return {false, false, true, true}; }
};

// Input normalization shared by every policy network.
struct PolicyStats {
  std::vector<double> obs_mean, obs_std;
  std::vector<double> window_mean, window_std;

  static PolicyStats identity(const PolicyConfig& config);
  static PolicyStats fit(const std::vector<env::ReferenceClip>& clips,
                         const PolicyConfig& config);
};

inline constexpr char kPriorPrefix[] = "prior/";
inline constexpr char kMtPrefix[] = "mt/";
inline constexpr char kCfPrefix[] = "cf/";
inline constexpr char kDecoderPrefix[] = "decoder/";
inline constexpr char kDecoderSnapshotPrefix[] = "decoder_ori/";
inline constexpr char kPolicyStatsPrefix[] = "policy_stats/";

struct TrackingTerms {
  ad::Var jpos, jvel, bpos, bvel;
};

// Prior, motion-tracking encoder, command-following encoder and motor
// decoder. The encoders predict residuals on top of the prior mean; every
// latent is Gaussian with the fixed isotropic sigma.
class VaePolicy {
 public:
  explicit VaePolicy(PolicyConfig config = {});

  const PolicyConfig& config() const { return config_; }
  std::size_t joints() const { return config_.joints; }
  std::size_t obs_size() const { return env::observation_size(joints()); }
  std::size_t frame_features() const { return 6 + 2 * joints(); }
  std::size_t window_size() const { return config_.window * frame_features(); }
  const ad::Mlp& prior_net() const { return prior_; }
  const ad::Mlp& mt_net() const { return mt_; }
  const ad::Mlp& cf_net() const { return cf_; }
  const ad::Mlp& decoder_net() const { return decoder_; }

  // Encoders start with a zero output layer so the posterior equals the
  // prior until trained.
  void init(ad::ParamStore& store, Rng& rng) const;
  void set_stats(ad::ParamStore& store, const PolicyStats& stats) const;
  PolicyStats stats(const ad::ParamStore& store) const;
  // Copies the motor decoder to the frozen snapshot used by reg_loss.
  void snapshot_decoder(ad::ParamStore& store) const;
  bool has_snapshot(const ad::ParamStore& store) const;

  // Normalized observation of a [B, S] flat-state batch.
  ad::Var observation(ad::Graph& g, const ad::ParamStore& store,
                      ad::Var state) const;
  // Future reference frames relative to the current pose, normalized.
  // `frames` holds K tensors of shape [B, S].
  ad::Var reference_window(ad::Graph& g, const ad::ParamStore& store,
                           ad::Var state,
                           const std::vector<ad::Var>& frames) const;
  static ad::Var command_features(ad::Graph& g, ad::Var command);

  ad::Var prior_mean(ad::Graph& g, const ad::ParamStore& store, ad::Var obs,
                     bool trainable) const;
  ad::Var mt_residual(ad::Graph& g, const ad::ParamStore& store, ad::Var obs,
                      ad::Var window, bool trainable) const;
  ad::Var cf_residual(ad::Graph& g, const ad::ParamStore& store, ad::Var obs,
                      ad::Var command, bool trainable) const;
  // z = mean + sigma * eps with eps ~ N(0, I) drawn from `rng`; returns the
  // mean when `rng` is null.
  ad::Var sample_latent(ad::Graph& g, ad::Var mean, Rng* rng) const;
  ad::Var decode(ad::Graph& g, const ad::ParamStore& store, ad::Var obs,
                 ad::Var z, bool trainable,
                 const std::string& prefix = kDecoderPrefix) const;

  // Per-row losses, each [B, 1].
  static ad::Var tracking_loss(ad::Graph& g, ad::Var predicted,
                               ad::Var reference,
                               TrackingTerms* terms = nullptr);
  static ad::Var kl_loss(ad::Graph& g, ad::Var residual, double sigma);
  static ad::Var cf_loss(ad::Graph& g, ad::Var predicted, ad::Var command);
  ad::Var reg_loss(ad::Graph& g, const ad::ParamStore& store, ad::Var obs,
                   ad::Var z, bool trainable) const;

  // n-step motion-tracking loss through the frozen world model. refs[k] is
  // the reference frame k steps after the start ([B, S]); at least
  // n + window - 1 frames after the start are required. Returns the batch
  // mean of sum_t (L^T_t + 0.1 KL_t); `tracking` receives the batch mean of
  // sum_t L^T_t when non-null.
  ad::Var mt_policy_loss(ad::Graph& g, const ad::ParamStore& store,
                         const wm::WorldModel& model, const ad::Tensor& start,
                         const std::vector<ad::Tensor>& refs, std::size_t n,
                         Rng* rng, const Trainable& trainable,
                         ad::Var* tracking = nullptr) const;
  // n-step command-following loss; commands[t] is [B, 2]. With `reg_weight`
  // > 0 adds reg_weight * L^reg_t per step; `reg` receives the batch mean of
  // sum_t L^reg_t when non-null.
  ad::Var cf_policy_loss(ad::Graph& g, const ad::ParamStore& store,
                         const wm::WorldModel& model, const ad::Tensor& start,
                         const std::vector<ad::Tensor>& commands, std::size_t n,
                         double reg_weight, Rng* rng,
                         const Trainable& trainable,
                         ad::Var* reg = nullptr) const;

  // Graph-free helpers for environment rollouts. States are [B, S].
  ad::Tensor act_mt(const ad::ParamStore& store, const ad::Tensor& states,
                    const std::vector<ad::Tensor>& frames, Rng* rng) const;
  ad::Tensor act_cf(const ad::ParamStore& store, const ad::Tensor& states,
                    const ad::Tensor& commands, Rng* rng) const;

  std::vector<std::string> prefixes(const Trainable& trainable) const;

 private:
  PolicyConfig config_;
  ad::Mlp prior_, mt_, cf_, decoder_;
};

}  // namespace wmp::policy

#endif  // WMP_VAEPOLICY_POLICY_H_
