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

#include "wmp/trainer/trainer.h"

#include <cmath>
#include <cstdio>
#include <exception>
#include <numbers>
#include <stdexcept>
#include <thread>

#include "wmp/autodiff/adam.h"
#include "wmp/autodiff/graph.h"

namespace wmp::trainer {
namespace {

using ad::Graph;
using ad::Tensor;
using ad::Var;
using policy::Trainable;
using policy::VaePolicy;

Tensor row_of(const env::RobotState& s) { return Tensor::row(s.flat()); }

Tensor rows_of(const std::vector<env::RobotState>& states, std::size_t begin,
               std::size_t end) {
  Tensor out(end - begin, states[begin].flat().size());
  for (std::size_t i = begin; i < end; ++i) {
    const std::vector<double> f = states[i].flat();
    std::copy(f.begin(), f.end(), out.row_span(i - begin).begin());
  }
  return out;
}

std::vector<double> first_row(const Tensor& t) {
  return {t.values().begin(), t.values().begin() + t.cols()};
}

// Generates one stored episode of `steps` transitions with the parameters of
// the current iteration.
using EpisodeFn = std::function<StoredTrajectory(
    const ad::ParamStore&, std::size_t iteration, Rng&, std::size_t steps)>;

std::vector<StoredTrajectory> collect(const TrainConfig& config,
                                      const ad::ParamStore& store,
                                      std::size_t iteration,
                                      const EpisodeFn& episode) {
  std::vector<std::vector<StoredTrajectory>> per_agent(config.agents);
  std::vector<std::exception_ptr> errors(config.agents);
  const Rng base = Rng(config.seed).fork(3).fork(iteration);
  auto run = [&](std::size_t a) {
    try {
      Rng rng = base.fork(a);
      std::size_t remaining = config.n_sample;
      while (remaining > 0) {
        StoredTrajectory t = episode(store, iteration, rng,
                                     std::min(config.episode_steps, remaining));
        if (t.steps() == 0) {
          throw NonFiniteError(
              "environment diverged on the first step of an "
              "episode");
        }
        remaining -= t.steps();
        per_agent[a].push_back(std::move(t));
      }
    } catch (...) {
      errors[a] = std::current_exception();
    }
  };
  std::vector<std::thread> threads;
  for (std::size_t a = 1; a < config.agents; ++a) threads.emplace_back(run, a);
  run(0);
  for (auto& t : threads) t.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  std::vector<StoredTrajectory> out;
  for (auto& v : per_agent) {
    for (auto& t : v) out.push_back(std::move(t));
  }
  return out;
}

Tensor decode_mean(const Models& models, const ad::ParamStore& store,
                   const Tensor& state, const std::vector<Tensor>& frames,
                   bool prior_only) {
  if (!prior_only) return models.policy.act_mt(store, state, frames, nullptr);
  Graph g;
  Var obs = models.policy.observation(g, store, g.constant(state));
  return g.value(models.policy.decode(
      g, store, obs, models.policy.prior_mean(g, store, obs, false), false));
}

std::vector<Tensor> window_frames(const env::ReferenceClip& clip,
                                  std::size_t first, std::size_t count) {
  std::vector<Tensor> frames;
  for (std::size_t k = 0; k < count; ++k) {
    frames.push_back(row_of(clip.frames[first + k]));
  }
  return frames;
}

bool stats_are_identity(const Models& models, const ad::ParamStore& store) {
  const wm::Stats s = models.world.stats(store);
  const wm::Stats id = wm::Stats::identity(models.world.joints());
  return s.obs_mean == id.obs_mean && s.obs_std == id.obs_std &&
         s.act_mean == id.act_mean && s.act_std == id.act_std &&
         s.delta_std == id.delta_std;
}

struct PolicyUpdate {
  double loss = 0.0;
  double reg = NAN;
};

// Phase-specific pieces of the shared collect / fit / update / evaluate loop.
struct PhaseHooks {
  // Null when the phase never touches the environment.
  EpisodeFn episode;
  // Fit the world model on iteration 1 only.
  bool fit_world_once = false;
  std::function<PolicyUpdate(ad::ParamStore&, const ReplayBuffer&, Rng&)>
      policy_update;
  std::function<void(const ad::ParamStore&, IterationMetrics&)> evaluate;
};

TrainResult run_phase(const TrainConfig& config, const Models& models,
                      Checkpoint ckpt, ReplayBuffer buffer,
                      const PhaseHooks& hooks,
                      const IterationCallback& on_iteration) {
  config.validate();
  ckpt.phase = config.phase;
  ckpt.iteration = 0;
  ckpt.seed = config.seed;
  ckpt.store.reset_moments();
  TrainResult result;
  Rng root(config.seed);
  Rng wm_rng = root.fork(1);
  Rng pi_rng = root.fork(2);

  IterationMetrics row0;
  hooks.evaluate(ckpt.store, row0);
  result.metrics.push_back(row0);
  if (on_iteration) on_iteration(ckpt, row0);

  std::uint64_t samples = 0;
  for (std::size_t it = 1; it <= config.iterations; ++it) {
    const Checkpoint last_good = ckpt;
    IterationMetrics row;
    row.iteration = it;
    try {
      if (hooks.episode) {
        for (auto& t : collect(config, ckpt.store, it, hooks.episode)) {
          samples += t.steps();
          buffer.add(std::move(t));
        }
        const std::uint64_t expected =
            static_cast<std::uint64_t>(it) * config.n_sample * config.agents;
        if (samples != expected) {
          throw std::logic_error(
              "sample accounting mismatch: " + std::to_string(samples) +
              " collected, " + std::to_string(expected) + " expected");
        }
      }
      row.samples_total = samples;

      if (!hooks.fit_world_once || it == 1) {
        if (stats_are_identity(models, ckpt.store)) {
          models.world.set_stats(ckpt.store, wm::Stats::fit(buffer));
        }
        const wm::WorldModelTrainResult w =
            wm::train_world_model(models.world, ckpt.store, buffer,
                                  {.updates = config.n_w,
                                   .batch = config.batch,
                                   .horizon = config.wm_horizon,
                                   .lr = config.lr_w,
                                   .max_grad_norm = config.max_grad_norm},
                                  wm_rng);
        if (config.n_w > 0) row.loss_w = w.final_loss;
      }

      const PolicyUpdate p = hooks.policy_update(ckpt.store, buffer, pi_rng);
      row.loss_policy = p.loss;
      row.reg_loss = p.reg;
      if (!ckpt.store.all_finite()) {
        throw NonFiniteError("parameters became non-finite");
      }
      hooks.evaluate(ckpt.store, row);
    } catch (const NonFiniteError& e) {
      throw TrainingDiverged("iteration " + std::to_string(it) + " of " +
                                 phase_name(config.phase) +
                                 " diverged: " + e.what(),
                             last_good);
    }
    ckpt.iteration = it;
    result.metrics.push_back(row);
    if (on_iteration) on_iteration(ckpt, row);
  }
  result.checkpoint = std::move(ckpt);
  result.buffer = std::move(buffer);
  return result;
}

ad::AdamOptions policy_adam(const TrainConfig& config) {
  return {.lr = config.lr_pi, .max_grad_norm = config.max_grad_norm};
}

// Random piecewise-constant commands held for U[hold_min, hold_max] seconds.
class CommandSchedule {
 public:
  CommandSchedule(const TrainConfig& config, Rng& rng)
      : config_(config), rng_(rng) {}

  env::Command at(std::size_t t) {
    if (t >= next_change_) {
      current_ = {rng_.uniform(0.0, config_.v_max),
                  rng_.uniform(-config_.omega_max, config_.omega_max)};
      const double hold =
          rng_.uniform(config_.command_hold_min, config_.command_hold_max);
      next_change_ = t + static_cast<std::size_t>(std::lround(hold / env::kDt));
    }
    return current_;
  }

 private:
  const TrainConfig& config_;
  Rng& rng_;
  env::Command current_;
  std::size_t next_change_ = 0;
};

EpisodeFn random_command_episode(const TrainConfig& config,
                                 const Models& models,
                                 const env::PhysicalParams& params) {
  return [&config, &models, &params](const ad::ParamStore& store, std::size_t,
                                     Rng& rng, std::size_t steps) {
    env::RobotState start(models.policy.joints());
    start.heading = rng.uniform(-std::numbers::pi, std::numbers::pi);
    Rng command_rng = rng.fork(rng.index(1ull << 62));
    CommandSchedule schedule(config, command_rng);
    env::Command current;
    const env::Trajectory traj = env::rollout(
        [&](const env::RobotState& s, std::size_t, Rng& r) {
          const Tensor c(ad::Shape{1, 2}, {current.v, current.omega});
          return first_row(models.policy.act_cf(store, row_of(s), c, &r));
        },
        start, params, steps, rng.fork(rng.index(1ull << 62)).seed(),
        [&](const env::RobotState&, std::size_t t) {
          current = schedule.at(t);
          return current;
        });
    return from_trajectory(traj);
  };
}

EpisodeFn path_episode(const Models& models, const env::PhysicalParams& params,
                       const path::Path& route,
                       const path::PursuitConfig& pursuit) {
  return [&models, &params, &route, pursuit](const ad::ParamStore& store,
                                             std::size_t, Rng& rng,
                                             std::size_t steps) {
    const double s0 = rng.uniform(
        0.0, route.closed() ? route.length() : 0.5 * route.length());
    env::RobotState start(models.policy.joints());
    const path::Point p = route.point_at(s0);
    const path::Point tan = route.tangent_at(s0);
    start.x = p.x;
    start.y = p.y;
    start.heading = std::atan2(tan.y, tan.x);
    path::PursuitTracker tracker(route, pursuit, s0);
    env::Command current;
    const env::Trajectory traj = env::rollout(
        [&](const env::RobotState& s, std::size_t, Rng& r) {
          const Tensor c(ad::Shape{1, 2}, {current.v, current.omega});
          return first_row(models.policy.act_cf(store, row_of(s), c, &r));
        },
        start, params, steps, rng.fork(rng.index(1ull << 62)).seed(),
        [&](const env::RobotState& s, std::size_t) {
          current = tracker.command(s);
          return current;
        });
    return from_trajectory(traj);
  };
}

std::function<PolicyUpdate(ad::ParamStore&, const ReplayBuffer&, Rng&)>
cf_update(const TrainConfig& config, const Models& models,
          const Trainable& trainable, double reg_weight) {
  return [&config, &models, trainable, reg_weight](
             ad::ParamStore& store, const ReplayBuffer& buffer, Rng& rng) {
    PolicyUpdate out;
    if (config.n_pi == 0) return out;
    const std::vector<std::string> prefixes = models.policy.prefixes(trainable);
    const double n = static_cast<double>(config.rollout);
    double reg_sum = 0.0;
    for (std::size_t u = 0; u < config.n_pi; ++u) {
      const SegmentBatch batch =
          buffer.sample(config.batch, config.rollout, rng);
      Graph g;
      Var reg;
      Var loss = models.policy.cf_policy_loss(
          g, store, models.world, batch.states[0], batch.commands,
          config.rollout, reg_weight, &rng, trainable,
          reg_weight > 0.0 ? &reg : nullptr);
      g.backward(loss);
      out.loss += g.value(loss)[0] / n;
      if (reg_weight > 0.0) reg_sum += g.value(reg)[0] / n;
      ad::adam_step(store, g.param_grads(store, prefixes), policy_adam(config));
    }
    out.loss /= static_cast<double>(config.n_pi);
    if (reg_weight > 0.0) out.reg = reg_sum / static_cast<double>(config.n_pi);
    return out;
  };
}

std::function<void(const ad::ParamStore&, IterationMetrics&)> path_evaluator(
    const TrainConfig& config, const Models& models,
    const env::PhysicalParams& params, const path::Path& route) {
  return [&config, &models, &params, &route](const ad::ParamStore& store,
                                             IterationMetrics& row) {
    const PathEvaluation e = evaluate_path(
        models, store, params, route, config.eval_pursuit, config.eval_seconds);
    row.e_v = e.metrics.e_v;
    row.e_omega = e.metrics.e_omega;
    row.e_p = e.metrics.e_p;
    row.eval_loss_cf = e.loss_cf;
  };
}

std::string format_value(double v) {
  if (std::isnan(v)) return "";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

}  // namespace

std::string phase_name(Phase phase) {
  switch (phase) {
    case Phase::kMtScratch:
      return "mt-scratch";
    case Phase::kCfScratch:
      return "cf-scratch";
    case Phase::kFinetune:
      return "finetune";
    case Phase::kOffPolicy:
      return "offpolicy";
  }
  return "unknown";
}

Phase phase_from_name(const std::string& name) {
  for (Phase p : {Phase::kMtScratch, Phase::kCfScratch, Phase::kFinetune,
                  Phase::kOffPolicy}) {
    if (phase_name(p) == name) return p;
  }
  throw ConfigError("unknown phase '" + name + "'");
}

void TrainConfig::validate() const {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw ConfigError("train config: " + what);
  };
  require(n_sample >= 1, "n_sample must be at least 1");
  require(agents >= 1, "agents must be at least 1");
  require(batch >= 1, "batch must be at least 1");
  require(rollout >= 1, "rollout must be at least 1");
  require(wm_horizon >= 1, "wm_horizon must be at least 1");
  require(episode_steps >= std::max(rollout, wm_horizon),
          "episode_steps must cover rollout and wm_horizon");
  require(lr_w > 0.0 && lr_pi > 0.0, "learning rates must be positive");
  require(max_grad_norm >= 0.0, "max_grad_norm must be non-negative");
  require(reg_weight >= 0.0, "reg_weight must be non-negative");
  require(bootstrap_noise >= 0.0, "bootstrap_noise must be non-negative");
  require(command_hold_min > 0.0 && command_hold_min <= command_hold_max,
          "command hold range must be positive and ordered");
  require(v_max >= 0.0 && v_max <= 1.5, "v_max must lie in [0, 1.5]");
  require(omega_max >= 0.0 && omega_max <= 1.5,
          "omega_max must lie in [0, 1.5]");
  require(eval_seconds > 0.0, "eval_seconds must be positive");
  require(eval_clips >= 1, "eval_clips must be at least 1");
  try {
    eval_pursuit.validate();
  } catch (const InvalidArgument& e) {
    throw ConfigError(std::string("train config: ") + e.what());
  }
}

std::string metrics_csv_header() {
  return "iteration,samples_total,loss_w,loss_policy,reg_loss,e_v,e_omega,e_p,"
         "tracking_reward,eval_loss_cf";
}

std::string metrics_csv_row(const IterationMetrics& m) {
  return std::to_string(m.iteration) + "," + std::to_string(m.samples_total) +
         "," + format_value(m.loss_w) + "," + format_value(m.loss_policy) +
         "," + format_value(m.reg_loss) + "," + format_value(m.e_v) + "," +
         format_value(m.e_omega) + "," + format_value(m.e_p) + "," +
         format_value(m.tracking_reward) + "," + format_value(m.eval_loss_cf);
}

Checkpoint initialize(const Models& models,
                      const std::vector<env::ReferenceClip>& clips,
                      std::uint64_t seed) {
  Checkpoint c;
  c.seed = seed;
  Rng rng(seed);
  Rng policy_rng = rng.fork(1);
  Rng world_rng = rng.fork(2);
  models.policy.init(c.store, policy_rng);
  if (!clips.empty()) {
    models.policy.set_stats(
        c.store, policy::PolicyStats::fit(clips, models.policy.config()));
  }
  models.world.init(c.store, world_rng);
  return c;
}

TrainResult co_train_mt(const TrainConfig& config, const Models& models,
                        const env::PhysicalParams& params,
                        const std::vector<env::ReferenceClip>& clips,
                        Checkpoint start,
                        const IterationCallback& on_iteration) {
  if (clips.empty()) throw InvalidArgument("motion tracking needs clips");
  const std::size_t window = models.policy.config().window;
  for (const auto& clip : clips) {
    if (clip.frames.size() < config.episode_steps + window + 1) {
      throw InvalidArgument("clip with " + std::to_string(clip.frames.size()) +
                            " frames is shorter than an episode plus the "
                            "reference window");
    }
  }
  const bool fresh = start.iteration == 0 && start.phase == Phase::kMtScratch;
  PhaseHooks hooks;
  hooks.episode = [&](const ad::ParamStore& store, std::size_t iteration,
                      Rng& rng, std::size_t steps) {
    const int clip_id = static_cast<int>(rng.index(clips.size()));
    const env::ReferenceClip& clip = clips[clip_id];
    const std::size_t first =
        rng.index(clip.frames.size() - steps - window + 1);
    const bool bootstrap = fresh && iteration == 1;
    const double noise = config.bootstrap_noise;
    const env::Trajectory traj = env::rollout(
        [&](const env::RobotState& s, std::size_t t, Rng& r) {
          if (bootstrap) {
            std::vector<double> a = clip.frames[first + t + 1].prev_action;
            for (double& v : a) v += r.uniform(-noise, noise);
            return a;
          }
          return first_row(models.policy.act_mt(
              store, row_of(s), window_frames(clip, first + t + 1, window),
              &r));
        },
        clip.frames[first], params, steps,
        rng.fork(rng.index(1ull << 62)).seed());
    return from_trajectory(traj, clip_id, static_cast<int>(first));
  };
  hooks.policy_update = [&](ad::ParamStore& store, const ReplayBuffer& buffer,
                            Rng& rng) {
    PolicyUpdate out;
    if (config.n_pi == 0) return out;
    const Trainable trainable = Trainable::motion_tracking();
    const std::vector<std::string> prefixes = models.policy.prefixes(trainable);
    for (std::size_t u = 0; u < config.n_pi; ++u) {
      const SegmentBatch batch =
          buffer.sample(config.batch, config.rollout, rng);
      std::vector<Tensor> refs;
      const std::size_t count = config.rollout + window;
      for (std::size_t k = 0; k < count; ++k) {
        Tensor r(batch.size(), models.world.state_size());
        for (std::size_t b = 0; b < batch.size(); ++b) {
          const std::vector<double> f =
              clips[batch.clip_ids[b]].frames[batch.clip_frames[b] + k].flat();
          std::copy(f.begin(), f.end(), r.row_span(b).begin());
        }
        refs.push_back(std::move(r));
      }
      Graph g;
      Var loss =
          models.policy.mt_policy_loss(g, store, models.world, batch.states[0],
                                       refs, config.rollout, &rng, trainable);
      g.backward(loss);
      out.loss += g.value(loss)[0] / static_cast<double>(config.rollout);
      ad::adam_step(store, g.param_grads(store, prefixes), policy_adam(config));
    }
    out.loss /= static_cast<double>(config.n_pi);
    return out;
  };
  // Evenly strided over the clip set so every speed and turn is represented.
  std::vector<env::ReferenceClip> eval_clips;
  const std::size_t m = std::min(config.eval_clips, clips.size());
  for (std::size_t i = 0; i < m; ++i) {
    eval_clips.push_back(clips[m == 1 ? 0 : i * (clips.size() - 1) / (m - 1)]);
  }
  hooks.evaluate = [&](const ad::ParamStore& store, IterationMetrics& row) {
    row.tracking_reward = evaluate_tracking(models, store, params, eval_clips,
                                            config.episode_steps);
  };
  return run_phase(config, models, std::move(start), ReplayBuffer(), hooks,
                   on_iteration);
}

TrainResult train_cf(const TrainConfig& config, const Models& models,
                     const env::PhysicalParams& params, Checkpoint mt,
                     const IterationCallback& on_iteration) {
  const path::Path route = path::make_path(config.eval_path);
  PhaseHooks hooks;
  hooks.episode = random_command_episode(config, models, params);
  hooks.policy_update =
      cf_update(config, models, Trainable::command_following(), 0.0);
  hooks.evaluate = path_evaluator(config, models, params, route);
  return run_phase(config, models, std::move(mt), ReplayBuffer(), hooks,
                   on_iteration);
}

TrainResult fine_tune(const TrainConfig& config, const Models& models,
                      const env::PhysicalParams& params, Checkpoint cf,
                      const IterationCallback& on_iteration) {
  if (!models.policy.has_snapshot(cf.store)) {
    models.policy.snapshot_decoder(cf.store);
  }
  const path::Path route = path::make_path(config.eval_path);
  PhaseHooks hooks;
  hooks.episode = config.collect_on_path
                      ? path_episode(models, params, route, config.eval_pursuit)
                      : random_command_episode(config, models, params);
  hooks.policy_update =
      cf_update(config, models, Trainable::fine_tune(), config.reg_weight);
  hooks.evaluate = path_evaluator(config, models, params, route);
  return run_phase(config, models, std::move(cf), ReplayBuffer(), hooks,
                   on_iteration);
}

TrainResult off_policy_finetune(const TrainConfig& config, const Models& models,
                                const ReplayBuffer& stored,
                                const env::PhysicalParams& params,
                                Checkpoint cf,
                                const IterationCallback& on_iteration) {
  if (stored.transitions() == 0) {
    throw InvalidArgument("off-policy fine-tuning needs stored transitions");
  }
  if (!models.policy.has_snapshot(cf.store)) {
    models.policy.snapshot_decoder(cf.store);
  }
  const path::Path route = path::make_path(config.eval_path);
  PhaseHooks hooks;
  hooks.fit_world_once = true;
  hooks.policy_update =
      cf_update(config, models, Trainable::fine_tune(), config.reg_weight);
  hooks.evaluate = path_evaluator(config, models, params, route);
  return run_phase(config, models, std::move(cf), stored, hooks, on_iteration);
}

ReplayBuffer collect_path_data(const Models& models,
                               const ad::ParamStore& store,
                               const env::PhysicalParams& params,
                               const path::Path& route,
                               const std::vector<double>& speeds,
                               double seconds, std::size_t episode_steps,
                               std::uint64_t seed) {
  if (speeds.empty()) throw InvalidArgument("no collection speeds given");
  if (episode_steps == 0)
    throw InvalidArgument("episode_steps must be positive");
  ReplayBuffer buffer;
  Rng root(seed);
  for (std::size_t i = 0; i < speeds.size(); ++i) {
    path::PursuitConfig pursuit;
    pursuit.speed = speeds[i];
    pursuit.validate();
    const EpisodeFn episode = path_episode(models, params, route, pursuit);
    Rng rng = root.fork(i);
    std::size_t remaining =
        static_cast<std::size_t>(std::lround(seconds / env::kDt));
    while (remaining > 0) {
      StoredTrajectory t =
          episode(store, 0, rng, std::min(episode_steps, remaining));
      if (t.steps() == 0) {
        throw NonFiniteError("environment diverged during path collection");
      }
      remaining -= t.steps();
      buffer.add(std::move(t));
    }
  }
  return buffer;
}

PathEvaluation evaluate_path(const Models& models, const ad::ParamStore& store,
                             const env::PhysicalParams& params,
                             const path::Path& route,
                             const path::PursuitConfig& pursuit,
                             double seconds) {
  pursuit.validate();
  const auto steps = static_cast<std::size_t>(std::lround(seconds / env::kDt));
  path::PursuitTracker tracker(route, pursuit);
  env::Command current;
  PathEvaluation out;
  out.trajectory = env::rollout(
      [&](const env::RobotState& s, std::size_t, Rng&) {
        const Tensor c(ad::Shape{1, 2}, {current.v, current.omega});
        return first_row(models.policy.act_cf(store, row_of(s), c, nullptr));
      },
      route.start_state(models.policy.joints()), params, steps, 0,
      [&](const env::RobotState& s, std::size_t) {
        current = tracker.command(s);
        return current;
      });
  const env::Trajectory& traj = out.trajectory;
  if (traj.steps() == 0) {
    throw NonFiniteError("evaluation rollout diverged on the first step");
  }
  const std::vector<env::RobotState> reached(traj.states.begin() + 1,
                                             traj.states.end());
  out.metrics =
      path::tracking_metrics(reached, traj.commands, route, pursuit.speed);
  Tensor cmd(traj.steps(), 2);
  for (std::size_t t = 0; t < traj.steps(); ++t) {
    cmd(t, 0) = traj.commands[t].v;
    cmd(t, 1) = traj.commands[t].omega;
  }
  Graph g;
  out.loss_cf = g.value(g.mean(VaePolicy::cf_loss(
      g, g.constant(rows_of(traj.states, 1, traj.states.size())),
      g.constant(cmd))))[0];
  return out;
}

env::Trajectory run_command(const Models& models, const ad::ParamStore& store,
                            const env::PhysicalParams& params,
                            env::Command command, std::size_t steps) {
  const Tensor c(ad::Shape{1, 2}, {command.v, command.omega});
  return env::rollout(
      [&](const env::RobotState& s, std::size_t, Rng&) {
        return first_row(models.policy.act_cf(store, row_of(s), c, nullptr));
      },
      env::RobotState(models.policy.joints()), params, steps, 0,
      [&](const env::RobotState&, std::size_t) { return command; });
}

double evaluate_tracking(const Models& models, const ad::ParamStore& store,
                         const env::PhysicalParams& params,
                         const std::vector<env::ReferenceClip>& clips,
                         std::size_t steps, bool prior_only) {
  const std::size_t window = models.policy.config().window;
  double total = 0.0;
  std::size_t count = 0;
  for (const env::ReferenceClip& clip : clips) {
    if (clip.frames.size() < window + 2) {
      throw InvalidArgument("clip too short for tracking evaluation");
    }
    const std::size_t n = std::min(steps, clip.frames.size() - window);
    const env::Trajectory traj = env::rollout(
        [&](const env::RobotState& s, std::size_t t, Rng&) {
          return first_row(decode_mean(models, store, row_of(s),
                                       window_frames(clip, t + 1, window),
                                       prior_only));
        },
        clip.frames[0], params, n, 0);
    if (traj.truncated) {
      throw NonFiniteError("tracking evaluation rollout diverged");
    }
    Graph g;
    Var lt =
        VaePolicy::tracking_loss(g, g.constant(rows_of(traj.states, 1, n + 1)),
                                 g.constant(rows_of(clip.frames, 1, n + 1)));
    for (double v : g.value(lt).values()) total += v;
    count += n;
  }
  return 1.0 - total / static_cast<double>(count);
}

}  // namespace wmp::trainer
