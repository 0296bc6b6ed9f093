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

#include "wmp/worldmodel/world_model.h"

#include <algorithm>
#include <cmath>

#include "wmp/autodiff/adam.h"
#include "wmp/common/error.h"

namespace wmp::wm {
namespace {

using ad::Graph;
using ad::Tensor;
using ad::Var;

constexpr double kStdFloor = 1e-3;

struct Moments {
  std::vector<double> sum, sq;
  std::size_t count = 0;

  explicit Moments(std::size_t n) : sum(n, 0.0), sq(n, 0.0) {}
  void add(std::span<const double> x) {
    for (std::size_t i = 0; i < x.size(); ++i) {
      sum[i] += x[i];
      sq[i] += x[i] * x[i];
    }
    ++count;
  }
  std::vector<double> mean() const {
    std::vector<double> m(sum.size());
    for (std::size_t i = 0; i < m.size(); ++i) m[i] = sum[i] / count;
    return m;
  }
  std::vector<double> var() const {
    std::vector<double> v(sum.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
      const double m = sum[i] / count;
      v[i] = std::max(sq[i] / count - m * m, 0.0);
    }
    return v;
  }
};

double floored_std(double var) { return std::max(std::sqrt(var), kStdFloor); }

Tensor row_of(const std::vector<double>& v) { return Tensor::row(v); }

}  // namespace

std::vector<std::string> state_field_names(std::size_t joints) {
  std::vector<std::string> names{"x", "y", "heading", "vx", "vy", "yaw_rate"};
  for (const char* group : {"joint_pos", "joint_vel", "prev_action"}) {
    for (std::size_t i = 0; i < joints; ++i) {
      names.push_back(std::string(group) + "[" + std::to_string(i) + "]");
    }
  }
  return names;
}

Stats Stats::identity(std::size_t joints) {
  Stats s;
  const std::size_t obs = env::observation_size(joints);
  s.obs_mean.assign(obs, 0.0);
  s.obs_std.assign(obs, 1.0);
  s.act_mean.assign(joints, 0.0);
  s.act_std.assign(joints, 1.0);
  s.delta_std.assign(6 + 2 * joints, 1.0);
  s.loss_weight.assign(env::RobotState::flat_size(joints), 1.0);
  return s;
}

Stats Stats::fit(const trainer::ReplayBuffer& buffer) {
  if (buffer.transitions() == 0) {
    throw InvalidArgument("cannot fit statistics on an empty buffer");
  }
  const std::size_t joints = buffer.joints();
  const std::size_t obs_n = env::observation_size(joints);
  const std::size_t delta_n = 6 + 2 * joints;
  Moments obs(obs_n), act(joints), delta(delta_n);
  std::vector<double> d(delta_n), a(joints);
  for (std::size_t k = 0; k < buffer.trajectory_count(); ++k) {
    const trainer::StoredTrajectory& t = buffer.trajectory(k);
    for (std::size_t i = 0; i < t.steps(); ++i) {
      const auto& s0 = t.states[i];
      const auto& s1 = t.states[i + 1];
      obs.add(
          std::span<const double>(s0).subspan(env::kObservationOffset, obs_n));
      for (std::size_t j = 0; j < joints; ++j) {
        a[j] =
            std::clamp(t.actions[i][j], -env::kActionLimit, env::kActionLimit);
      }
      act.add(a);
      const double c = std::cos(s0[2]);
      const double s = std::sin(s0[2]);
      const double dx = s1[0] - s0[0];
      const double dy = s1[1] - s0[1];
      d[0] = c * dx + s * dy;
      d[1] = -s * dx + c * dy;
      d[2] = env::wrap_angle(s1[2] - s0[2]);
      for (std::size_t j = 3; j < delta_n; ++j) d[j] = s1[j] - s0[j];
      delta.add(d);
    }
  }
  Stats st;
  st.obs_mean = obs.mean();
  st.act_mean = act.mean();
  for (double v : obs.var()) st.obs_std.push_back(floored_std(v));
  for (double v : act.var()) st.act_std.push_back(floored_std(v));
  const std::vector<double> dv = delta.var();
  for (double v : dv) st.delta_std.push_back(floored_std(v));
  // x and y share a weight so the loss stays rotation invariant.
  const double planar = floored_std(0.5 * (dv[0] + dv[1]));
  st.loss_weight.assign(env::RobotState::flat_size(joints), 0.0);
  st.loss_weight[0] = 1.0 / planar;
  st.loss_weight[1] = 1.0 / planar;
  for (std::size_t j = 2; j < delta_n; ++j) {
    st.loss_weight[j] = 1.0 / st.delta_std[j];
  }
  return st;
}

WorldModel::WorldModel(WorldModelConfig config, std::string prefix)
    : config_(std::move(config)), prefix_(std::move(prefix)) {
  env::validate_joint_count(config_.joints);
  std::vector<std::size_t> sizes{env::observation_size(config_.joints) +
                                 config_.joints};
  sizes.insert(sizes.end(), config_.hidden.begin(), config_.hidden.end());
  sizes.push_back(delta_size());
  net_ = ad::Mlp(net_prefix(), std::move(sizes));
}

void WorldModel::init(ad::ParamStore& store, Rng& rng) const {
  net_.init(store, rng, /*zero_last=*/true);
  set_stats(store, Stats::identity(joints()));
}

void WorldModel::set_stats(ad::ParamStore& store, const Stats& stats) const {
  const std::size_t obs = env::observation_size(joints());
  if (stats.obs_mean.size() != obs || stats.obs_std.size() != obs ||
      stats.act_mean.size() != joints() || stats.act_std.size() != joints() ||
      stats.delta_std.size() != delta_size() ||
      stats.loss_weight.size() != state_size()) {
    throw ShapeError("world model statistics do not match the joint count");
  }
  const std::string p = stats_prefix();
  store.set(p + "obs_mean", row_of(stats.obs_mean));
  store.set(p + "obs_std", row_of(stats.obs_std));
  store.set(p + "act_mean", row_of(stats.act_mean));
  store.set(p + "act_std", row_of(stats.act_std));
  store.set(p + "delta_std", row_of(stats.delta_std));
  store.set(p + "loss_weight", row_of(stats.loss_weight));
}

Stats WorldModel::stats(const ad::ParamStore& store) const {
  const std::string p = stats_prefix();
  Stats s;
  s.obs_mean = store.at(p + "obs_mean").to_vector();
  s.obs_std = store.at(p + "obs_std").to_vector();
  s.act_mean = store.at(p + "act_mean").to_vector();
  s.act_std = store.at(p + "act_std").to_vector();
  s.delta_std = store.at(p + "delta_std").to_vector();
  s.loss_weight = store.at(p + "loss_weight").to_vector();
  return s;
}

namespace {

// (x - mean) / std with the statistics as graph constants.
Var normalize(Graph& g, Var x, const Tensor& mean, const Tensor& std) {
  Tensor shift(1, mean.size());
  Tensor scale(1, std.size());
  for (std::size_t i = 0; i < mean.size(); ++i) {
    shift[i] = -mean[i];
    scale[i] = 1.0 / std[i];
  }
  return g.mul_row(g.add_row(x, g.constant(std::move(shift))),
                   g.constant(std::move(scale)));
}

}  // namespace

Var WorldModel::predict(Graph& g, const ad::ParamStore& store, Var state,
                        Var action, bool trainable) const {
  const std::size_t j = joints();
  const std::size_t body = 3 + 2 * j;
  if (state.cols() != state_size() || action.cols() != j ||
      state.rows() != action.rows()) {
    throw ShapeError("world model predict: state " +
                     ad::shape_string(state.value().shape()) + ", action " +
                     ad::shape_string(action.value().shape()));
  }
  const std::string p = stats_prefix();
  Var obs = g.slice_cols(state, env::kObservationOffset, body);
  Var act = g.clamp(action, -env::kActionLimit, env::kActionLimit);
  Var input = g.concat_cols(
      {normalize(g, obs, store.at(p + "obs_mean"), store.at(p + "obs_std")),
       normalize(g, act, store.at(p + "act_mean"), store.at(p + "act_std"))});
  Var delta = g.mul_row(net_.forward(g, store, input, trainable),
                        g.param(store, p + "delta_std", false));

  Var heading = g.slice_cols(state, 2, 1);
  Var c = g.cos(heading);
  Var s = g.sin(heading);
  Var dxb = g.slice_cols(delta, 0, 1);
  Var dyb = g.slice_cols(delta, 1, 1);
  Var x = g.slice_cols(state, 0, 1) + (c * dxb - s * dyb);
  Var y = g.slice_cols(state, 1, 1) + (s * dxb + c * dyb);
  Var h = g.wrap_angle(heading + g.slice_cols(delta, 2, 1));
  Var rest = obs + g.slice_cols(delta, 3, body);
  return g.concat_cols({x, y, h, rest, act});
}

Tensor WorldModel::predict_values(const ad::ParamStore& store,
                                  const Tensor& state,
                                  const Tensor& action) const {
  Graph g;
  try {
    return g.value(
        predict(g, store, g.constant(state), g.constant(action), false));
  } catch (const NonFiniteError&) {
    throw NonFiniteError("world model predicted non-finite " +
                         nonfinite_field(store, state, action));
  }
}

std::string WorldModel::nonfinite_field(const ad::ParamStore& store,
                                        const Tensor& state,
                                        const Tensor& action) const {
  const std::size_t j = joints();
  const std::size_t body = 3 + 2 * j;
  const Stats st = stats(store);
  Tensor input(state.rows(), body + j);
  for (std::size_t r = 0; r < state.rows(); ++r) {
    for (std::size_t i = 0; i < body; ++i) {
      input(r, i) = (state(r, env::kObservationOffset + i) - st.obs_mean[i]) /
                    st.obs_std[i];
    }
    for (std::size_t i = 0; i < j; ++i) {
      const double a =
          std::clamp(action(r, i), -env::kActionLimit, env::kActionLimit);
      input(r, body + i) = (a - st.act_mean[i]) / st.act_std[i];
    }
  }
  if (!input.all_finite()) return "input";
  const Tensor out = net_.forward_values(store, input);
  std::vector<std::string> names{"delta_x_body", "delta_y_body",
                                 "delta_heading"};
  const std::vector<std::string> fields = state_field_names(j);
  for (std::size_t i = 3; i < delta_size(); ++i) {
    names.push_back("delta_" + fields[i]);
  }
  for (std::size_t r = 0; r < out.rows(); ++r) {
    for (std::size_t i = 0; i < out.cols(); ++i) {
      if (!std::isfinite(out(r, i) * st.delta_std[i])) return names[i];
    }
  }
  return "pose composition";
}

env::RobotState WorldModel::predict_state(
    const ad::ParamStore& store, const env::RobotState& state,
    std::span<const double> action) const {
  const std::vector<double> flat = state.flat();
  Tensor out = predict_values(store, Tensor::row(flat), Tensor::row(action));
  const std::vector<std::string> names = state_field_names(joints());
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (!std::isfinite(out[i])) {
      throw NonFiniteError("world model predicted non-finite " + names[i]);
    }
  }
  return env::RobotState::from_flat(out.values(), joints());
}

Var WorldModel::state_difference(Graph& g, Var a, Var b) {
  Var d = a - b;
  const std::size_t n = d.cols();
  return g.concat_cols({g.slice_cols(d, 0, 2),
                        g.wrap_angle(g.slice_cols(d, 2, 1)),
                        g.slice_cols(d, 3, n - 3)});
}

Var WorldModel::prediction_loss(Graph& g, const ad::ParamStore& store,
                                const trainer::SegmentBatch& batch,
                                bool weighted, bool trainable) const {
  if (batch.length() == 0) {
    throw InvalidArgument("prediction loss needs a segment of length >= 1");
  }
  Var weight;
  if (weighted) weight = g.param(store, stats_prefix() + "loss_weight", false);
  Var s_hat = g.constant(batch.states[0]);
  Var loss;
  for (std::size_t t = 0; t < batch.length(); ++t) {
    s_hat = predict(g, store, s_hat, g.constant(batch.actions[t]), trainable);
    Var d = state_difference(g, s_hat, g.constant(batch.states[t + 1]));
    if (weighted) d = g.mul_row(d, weight);
    Var step = g.mean(g.row_norm(d));
    loss = t == 0 ? step : loss + step;
  }
  return loss;
}

WorldModelTrainResult train_world_model(const WorldModel& model,
                                        ad::ParamStore& store,
                                        const trainer::ReplayBuffer& buffer,
                                        const WorldModelTrainOptions& options,
                                        Rng& rng) {
  WorldModelTrainResult result;
  if (options.updates == 0) return result;
  const std::size_t available = buffer.segment_count(options.horizon);
  if (available < options.batch) {
    throw InvalidArgument(
        "world model training needs " + std::to_string(options.batch) +
        " segments of length " + std::to_string(options.horizon) +
        ", buffer has " + std::to_string(available));
  }
  const std::vector<std::string> prefixes{model.net_prefix()};
  ad::AdamOptions adam{.lr = options.lr,
                       .max_grad_norm = options.max_grad_norm};
  const double decay =
      options.lr_final > 0.0 && options.updates > 1
          ? std::pow(options.lr_final / options.lr,
                     1.0 / static_cast<double>(options.updates - 1))
          : 1.0;
  for (std::size_t u = 0; u < options.updates; ++u) {
    adam.lr = options.lr * std::pow(decay, static_cast<double>(u));
    trainer::SegmentBatch batch =
        buffer.sample(options.batch, options.horizon, rng);
    Graph g;
    Var loss = model.prediction_loss(g, store, batch, /*weighted=*/true);
    g.backward(loss);
    const double value = g.value(loss)[0];
    if (u == 0) result.first_loss = value;
    result.final_loss = value;
    ad::adam_step(store, g.param_grads(store, prefixes), adam);
  }
  return result;
}

}  // namespace wmp::wm
