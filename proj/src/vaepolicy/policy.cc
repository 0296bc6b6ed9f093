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

#include "wmp/vaepolicy/policy.h"

#include <algorithm>
#include <cmath>

#include "wmp/common/error.h"

namespace wmp::policy {
namespace {

using ad::Graph;
using ad::ParamStore;
using ad::Tensor;
using ad::Var;

constexpr double kStdFloor = 1e-3;
constexpr double kKlWeight = 0.1;
constexpr double kCommandCenter = 0.75;
constexpr double kCommandScale = 0.75;
constexpr double kTurnScale = 1.5;

Var normalize(Graph& g, const ParamStore& store, Var x, const std::string& mean,
              const std::string& std) {
  const Tensor& m = store.at(mean);
  const Tensor& s = store.at(std);
  Tensor shift(1, m.size());
  Tensor scale(1, s.size());
  for (std::size_t i = 0; i < m.size(); ++i) {
    shift[i] = -m[i];
    scale[i] = 1.0 / s[i];
  }
  return g.mul_row(g.add_row(x, g.constant(std::move(shift))),
                   g.constant(std::move(scale)));
}

// Relative features of reference frame `ref` seen from `state` (flat rows).
void window_features(std::span<const double> state, std::span<const double> ref,
                     std::size_t joints, std::span<double> out) {
  const double c = std::cos(state[2]);
  const double s = std::sin(state[2]);
  const double dx = ref[0] - state[0];
  const double dy = ref[1] - state[1];
  out[0] = c * dx + s * dy;
  out[1] = -s * dx + c * dy;
  out[2] = env::wrap_angle(ref[2] - state[2]);
  for (std::size_t i = 3; i < 6 + 2 * joints; ++i) out[i] = ref[i];
}

void mean_std(const std::vector<std::vector<double>>& rows,
              std::vector<double>& mean, std::vector<double>& std) {
  const std::size_t n = rows.front().size();
  mean.assign(n, 0.0);
  std.assign(n, 0.0);
  for (const auto& r : rows) {
    for (std::size_t i = 0; i < n; ++i) mean[i] += r[i];
  }
  for (double& m : mean) m /= static_cast<double>(rows.size());
  for (const auto& r : rows) {
    for (std::size_t i = 0; i < n; ++i) {
      std[i] += (r[i] - mean[i]) * (r[i] - mean[i]);
    }
  }
  for (double& s : std) {
    s = std::max(std::sqrt(s / static_cast<double>(rows.size())), kStdFloor);
  }
}

}  // namespace

PolicyStats PolicyStats::identity(const PolicyConfig& config) {
  PolicyStats s;
  const std::size_t obs = env::observation_size(config.joints);
  const std::size_t window = config.window * (6 + 2 * config.joints);
  s.obs_mean.assign(obs, 0.0);
  s.obs_std.assign(obs, 1.0);
  s.window_mean.assign(window, 0.0);
  s.window_std.assign(window, 1.0);
  return s;
}

PolicyStats PolicyStats::fit(const std::vector<env::ReferenceClip>& clips,
                             const PolicyConfig& config) {
  if (clips.empty()) throw InvalidArgument("policy statistics need clips");
  const std::size_t j = config.joints;
  const std::size_t f = 6 + 2 * j;
  std::vector<std::vector<double>> obs_rows, window_rows;
  for (const env::ReferenceClip& clip : clips) {
    if (clip.joints() != j) throw ShapeError("clip joint count mismatch");
    std::vector<std::vector<double>> flat;
    for (const env::RobotState& s : clip.frames) flat.push_back(s.flat());
    for (std::size_t t = 0; t < flat.size(); ++t) {
      obs_rows.push_back(env::observe(clip.frames[t]));
      if (t + config.window >= flat.size()) continue;
      std::vector<double> w(config.window * f);
      for (std::size_t k = 0; k < config.window; ++k) {
        window_features(flat[t], flat[t + 1 + k], j,
                        std::span<double>(w).subspan(k * f, f));
      }
      window_rows.push_back(std::move(w));
    }
  }
  if (window_rows.empty()) throw InvalidArgument("clips shorter than window");
  PolicyStats s;
  mean_std(obs_rows, s.obs_mean, s.obs_std);
  mean_std(window_rows, s.window_mean, s.window_std);
  return s;
}

VaePolicy::VaePolicy(PolicyConfig config) : config_(std::move(config)) {
  env::validate_joint_count(config_.joints);
  if (!(config_.sigma > 0.0)) throw InvalidArgument("sigma must be positive");
  if (config_.z_dim == 0 || config_.window == 0) {
    throw InvalidArgument("latent size and window must be positive");
  }
  auto sizes = [&](std::size_t in, std::size_t out) {
    std::vector<std::size_t> s{in};
    s.insert(s.end(), config_.hidden.begin(), config_.hidden.end());
    s.push_back(out);
    return s;
  };
  const std::size_t z = config_.z_dim;
  prior_ = ad::Mlp(kPriorPrefix, sizes(obs_size(), z));
  mt_ = ad::Mlp(kMtPrefix, sizes(obs_size() + window_size(), z));
  cf_ = ad::Mlp(kCfPrefix, sizes(obs_size() + 2, z));
  decoder_ = ad::Mlp(kDecoderPrefix, sizes(obs_size() + z, joints()));
}

void VaePolicy::init(ParamStore& store, Rng& rng) const {
  prior_.init(store, rng);
  mt_.init(store, rng, /*zero_last=*/true);
  cf_.init(store, rng, /*zero_last=*/true);
  decoder_.init(store, rng);
  set_stats(store, PolicyStats::identity(config_));
}

void VaePolicy::set_stats(ParamStore& store, const PolicyStats& stats) const {
  if (stats.obs_mean.size() != obs_size() ||
      stats.obs_std.size() != obs_size() ||
      stats.window_mean.size() != window_size() ||
      stats.window_std.size() != window_size()) {
    throw ShapeError("policy statistics do not match the configuration");
  }
  const std::string p = kPolicyStatsPrefix;
  store.set(p + "obs_mean", Tensor::row(stats.obs_mean));
  store.set(p + "obs_std", Tensor::row(stats.obs_std));
  store.set(p + "window_mean", Tensor::row(stats.window_mean));
  store.set(p + "window_std", Tensor::row(stats.window_std));
}

PolicyStats VaePolicy::stats(const ParamStore& store) const {
  const std::string p = kPolicyStatsPrefix;
  PolicyStats s;
  s.obs_mean = store.at(p + "obs_mean").to_vector();
  s.obs_std = store.at(p + "obs_std").to_vector();
  s.window_mean = store.at(p + "window_mean").to_vector();
  s.window_std = store.at(p + "window_std").to_vector();
  return s;
}

void VaePolicy::snapshot_decoder(ParamStore& store) const {
  store.erase_prefix(kDecoderSnapshotPrefix);
  store.copy_prefix(kDecoderPrefix, kDecoderSnapshotPrefix);
}

bool VaePolicy::has_snapshot(const ParamStore& store) const {
  return !store.names_with_prefix(kDecoderSnapshotPrefix).empty();
}

Var VaePolicy::observation(Graph& g, const ParamStore& store, Var state) const {
  const std::string p = kPolicyStatsPrefix;
  Var obs = g.slice_cols(state, env::kObservationOffset, obs_size());
  return normalize(g, store, obs, p + "obs_mean", p + "obs_std");
}

Var VaePolicy::reference_window(Graph& g, const ParamStore& store, Var state,
                                const std::vector<Var>& frames) const {
  if (frames.size() != config_.window) {
    throw ShapeError("reference window needs " +
                     std::to_string(config_.window) + " frames, got " +
                     std::to_string(frames.size()));
  }
  Var heading = g.slice_cols(state, 2, 1);
  Var c = g.cos(heading);
  Var s = g.sin(heading);
  Var px = g.slice_cols(state, 0, 1);
  Var py = g.slice_cols(state, 1, 1);
  std::vector<Var> parts;
  for (Var f : frames) {
    Var dx = g.slice_cols(f, 0, 1) - px;
    Var dy = g.slice_cols(f, 1, 1) - py;
    parts.push_back(c * dx + s * dy);
    parts.push_back(c * dy - s * dx);
    parts.push_back(g.wrap_angle(g.slice_cols(f, 2, 1) - heading));
    parts.push_back(g.slice_cols(f, 3, 3 + 2 * joints()));
  }
  const std::string p = kPolicyStatsPrefix;
  return normalize(g, store, g.concat_cols(parts), p + "window_mean",
                   p + "window_std");
}

Var VaePolicy::command_features(Graph& g, Var command) {
  Tensor shift(ad::Shape{1, 2}, {-kCommandCenter, 0.0});
  Tensor scale(ad::Shape{1, 2}, {1.0 / kCommandScale, 1.0 / kTurnScale});
  return g.mul_row(g.add_row(command, g.constant(std::move(shift))),
                   g.constant(std::move(scale)));
}

Var VaePolicy::prior_mean(Graph& g, const ParamStore& store, Var obs,
                          bool trainable) const {
  return prior_.forward(g, store, obs, trainable);
}

Var VaePolicy::mt_residual(Graph& g, const ParamStore& store, Var obs,
                           Var window, bool trainable) const {
  return mt_.forward(g, store, g.concat_cols({obs, window}), trainable);
}

Var VaePolicy::cf_residual(Graph& g, const ParamStore& store, Var obs,
                           Var command, bool trainable) const {
  return cf_.forward(
      g, store, g.concat_cols({obs, command_features(g, command)}), trainable);
}

Var VaePolicy::sample_latent(Graph& g, Var mean, Rng* rng) const {
  if (rng == nullptr) return mean;
  Tensor eps(mean.rows(), mean.cols());
  for (double& e : eps.values()) e = config_.sigma * rng->normal();
  return mean + g.constant(std::move(eps));
}

Var VaePolicy::decode(Graph& g, const ParamStore& store, Var obs, Var z,
                      bool trainable, const std::string& prefix) const {
  if (prefix == kDecoderPrefix) {
    return decoder_.forward(g, store, g.concat_cols({obs, z}), trainable);
  }
  ad::Mlp other(prefix, decoder_.sizes());
  return other.forward(g, store, g.concat_cols({obs, z}), trainable);
}

Var VaePolicy::tracking_loss(Graph& g, Var predicted, Var reference,
                             TrackingTerms* terms) {
  const std::size_t n = predicted.cols();
  if (reference.cols() != n || (n - 6) % 3 != 0) {
    throw ShapeError("tracking loss expects two flat-state batches");
  }
  const std::size_t j = (n - 6) / 3;
  Var d = predicted - reference;
  auto sq = [&](std::size_t begin, std::size_t count) {
    return g.row_sum(g.square(g.slice_cols(d, begin, count)));
  };
  Var jpos = 1.0 - g.exp(-1.0 * sq(6, j));
  Var jvel = 1.0 - g.exp(-1.0 * sq(6 + j, j));
  Var dh = g.wrap_angle(g.slice_cols(d, 2, 1));
  Var bpos = 1.0 - g.exp(-20.0 * sq(0, 2) - 10.0 * g.square(dh));
  Var bvel = 1.0 - g.exp(-2.0 * sq(3, 2) - 0.2 * sq(5, 1));
  if (terms != nullptr) *terms = {jpos, jvel, bpos, bvel};
  return 0.6 * jpos + 0.05 * jvel + 0.3 * bpos + 0.05 * bvel;
}

Var VaePolicy::kl_loss(Graph& g, Var residual, double sigma) {
  if (!(sigma > 0.0)) throw InvalidArgument("sigma must be positive");
  return g.row_sum(g.square(residual)) * (1.0 / (2.0 * sigma * sigma));
}

Var VaePolicy::cf_loss(Graph& g, Var predicted, Var command) {
  Var ev = g.abs(g.slice_cols(command, 0, 1) - g.slice_cols(predicted, 3, 1));
  Var ew = g.abs(g.slice_cols(command, 1, 1) - g.slice_cols(predicted, 5, 1));
  return 2.0 * (1.0 - g.exp(-2.0 * ev)) + (1.0 - g.exp(-2.0 * ew));
}

Var VaePolicy::reg_loss(Graph& g, const ParamStore& store, Var obs, Var z,
                        bool trainable) const {
  if (!has_snapshot(store)) {
    throw InvalidArgument("decoder regularizer needs the original decoder");
  }
  Var original = decode(g, store, obs, z, false, kDecoderSnapshotPrefix);
  Var current = decode(g, store, obs, z, trainable);
  return g.row_norm(original - current);
}

Var VaePolicy::mt_policy_loss(Graph& g, const ParamStore& store,
                              const wm::WorldModel& model, const Tensor& start,
                              const std::vector<Tensor>& refs, std::size_t n,
                              Rng* rng, const Trainable& trainable,
                              Var* tracking) const {
  if (n == 0) throw InvalidArgument("rollout length must be at least 1");
  if (refs.size() < n + config_.window) {
    throw InvalidArgument("reference clip too short: need " +
                          std::to_string(n + config_.window - 1) +
                          " frames after the start, have " +
                          std::to_string(refs.empty() ? 0 : refs.size() - 1));
  }
  std::vector<Var> ref_vars;
  ref_vars.reserve(refs.size());
  for (const Tensor& r : refs) ref_vars.push_back(g.constant(r));

  Var s = g.constant(start);
  Var total, track;
  for (std::size_t t = 0; t < n; ++t) {
    Var obs = observation(g, store, s);
    std::vector<Var> frames(
        ref_vars.begin() + static_cast<long>(t + 1),
        ref_vars.begin() + static_cast<long>(t + 1 + config_.window));
    Var window = reference_window(g, store, s, frames);
    Var residual = mt_residual(g, store, obs, window, trainable.mt);
    Var mean = prior_mean(g, store, obs, trainable.prior) + residual;
    Var z = sample_latent(g, mean, rng);
    Var action = decode(g, store, obs, z, trainable.decoder);
    s = model.predict(g, store, s, action, false);
    Var lt = g.mean(tracking_loss(g, s, ref_vars[t + 1]));
    Var kl = g.mean(kl_loss(g, residual, config_.sigma));
    Var step = lt + kKlWeight * kl;
    total = t == 0 ? step : total + step;
    track = t == 0 ? lt : track + lt;
  }
  if (tracking != nullptr) *tracking = track;
  return total;
}

Var VaePolicy::cf_policy_loss(Graph& g, const ParamStore& store,
                              const wm::WorldModel& model, const Tensor& start,
                              const std::vector<Tensor>& commands,
                              std::size_t n, double reg_weight, Rng* rng,
                              const Trainable& trainable, Var* reg) const {
  if (n == 0) throw InvalidArgument("rollout length must be at least 1");
  if (commands.size() < n) {
    throw InvalidArgument("command schedule shorter than the rollout");
  }
  Var s = g.constant(start);
  Var total, reg_total;
  for (std::size_t t = 0; t < n; ++t) {
    Var obs = observation(g, store, s);
    Var cmd = g.constant(commands[t]);
    Var mean = prior_mean(g, store, obs, trainable.prior) +
               cf_residual(g, store, obs, cmd, trainable.cf);
    Var z = sample_latent(g, mean, rng);
    Var action = decode(g, store, obs, z, trainable.decoder);
    s = model.predict(g, store, s, action, false);
    Var step = g.mean(cf_loss(g, s, cmd));
    if (reg_weight > 0.0 || reg != nullptr) {
      Var r = g.mean(reg_loss(g, store, obs, z, trainable.decoder));
      reg_total = t == 0 ? r : reg_total + r;
      if (reg_weight > 0.0) step = step + reg_weight * r;
    }
    total = t == 0 ? step : total + step;
  }
  if (reg != nullptr) *reg = reg_total;
  return total;
}

Tensor VaePolicy::act_mt(const ParamStore& store, const Tensor& states,
                         const std::vector<Tensor>& frames, Rng* rng) const {
  Graph g;
  Var s = g.constant(states);
  std::vector<Var> f;
  for (const Tensor& t : frames) f.push_back(g.constant(t));
  Var obs = observation(g, store, s);
  Var mean =
      prior_mean(g, store, obs, false) +
      mt_residual(g, store, obs, reference_window(g, store, s, f), false);
  return g.value(decode(g, store, obs, sample_latent(g, mean, rng), false));
}

Tensor VaePolicy::act_cf(const ParamStore& store, const Tensor& states,
                         const Tensor& commands, Rng* rng) const {
  Graph g;
  Var obs = observation(g, store, g.constant(states));
  Var mean = prior_mean(g, store, obs, false) +
             cf_residual(g, store, obs, g.constant(commands), false);
  return g.value(decode(g, store, obs, sample_latent(g, mean, rng), false));
}

std::vector<std::string> VaePolicy::prefixes(const Trainable& t) const {
  std::vector<std::string> out;
  if (t.prior) out.push_back(kPriorPrefix);
  if (t.mt) out.push_back(kMtPrefix);
  if (t.cf) out.push_back(kCfPrefix);
  if (t.decoder) out.push_back(kDecoderPrefix);
  return out;
}

}  // namespace wmp::policy
