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

#include "wmp/expcli/run_config.h"

#include <cstdlib>
#include <fstream>
#include <set>

#include "wmp/common/error.h"
#include "wmp/envsim/reference.h"

namespace wmp::cli {
namespace {

using nlohmann::json;

// Strict reader over one JSON object: every key must be consumed.
class Section {
 public:
  Section(const json& doc, std::string path)
      : doc_(doc), path_(std::move(path)) {
    if (!doc_.is_object()) {
      throw ConfigError("config section '" + display() + "' must be an object");
    }
  }

  template <typename T>
  void get(const std::string& key, T& out) {
    if (!doc_.contains(key)) return;
    seen_.insert(key);
    try {
      out = doc_.at(key).get<T>();
    } catch (const json::exception&) {
      throw ConfigError("config key '" + path_ + key + "' has the wrong type");
    }
  }

  bool has(const std::string& key) const { return doc_.contains(key); }

  Section child(const std::string& key) {
    seen_.insert(key);
    return Section(doc_.at(key), path_ + key + ".");
  }

  void finish() const {
    for (const auto& [key, value] : doc_.items()) {
      if (!seen_.count(key)) {
        throw ConfigError("unknown config key '" + path_ + key + "'");
      }
    }
  }

 private:
  const json& doc_;
  std::string path_;
  std::set<std::string> seen_;

  std::string display() const {
    return path_.empty() ? "<root>" : path_.substr(0, path_.size() - 1);
  }
};

json train_to_json(const trainer::TrainConfig& c) {
  return {{"iterations", c.iterations},
          {"n_sample", c.n_sample},
          {"agents", c.agents},
          {"n_w", c.n_w},
          {"n_pi", c.n_pi},
          {"batch", c.batch},
          {"rollout", c.rollout},
          {"wm_horizon", c.wm_horizon},
          {"lr_w", c.lr_w},
          {"lr_pi", c.lr_pi},
          {"max_grad_norm", c.max_grad_norm},
          {"reg_weight", c.reg_weight},
          {"episode_steps", c.episode_steps},
          {"bootstrap_noise", c.bootstrap_noise},
          {"command_hold_min", c.command_hold_min},
          {"command_hold_max", c.command_hold_max},
          {"v_max", c.v_max},
          {"omega_max", c.omega_max},
          {"eval_clips", c.eval_clips},
          {"collect_on_path", c.collect_on_path}};
}

void train_from_json(Section s, trainer::TrainConfig& c) {
  s.get("iterations", c.iterations);
  s.get("n_sample", c.n_sample);
  s.get("agents", c.agents);
  s.get("n_w", c.n_w);
  s.get("n_pi", c.n_pi);
  s.get("batch", c.batch);
  s.get("rollout", c.rollout);
  s.get("wm_horizon", c.wm_horizon);
  s.get("lr_w", c.lr_w);
  s.get("lr_pi", c.lr_pi);
  s.get("max_grad_norm", c.max_grad_norm);
  s.get("reg_weight", c.reg_weight);
  s.get("episode_steps", c.episode_steps);
  s.get("bootstrap_noise", c.bootstrap_noise);
  s.get("command_hold_min", c.command_hold_min);
  s.get("command_hold_max", c.command_hold_max);
  s.get("v_max", c.v_max);
  s.get("omega_max", c.omega_max);
  s.get("eval_clips", c.eval_clips);
  s.get("collect_on_path", c.collect_on_path);
  s.finish();
}

std::vector<std::string> split_dotted(const std::string& key) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    const std::size_t dot = key.find('.', start);
    parts.push_back(key.substr(start, dot - start));
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  for (const auto& p : parts) {
    if (p.empty()) throw ConfigError("malformed override key '" + key + "'");
  }
  return parts;
}

}  // namespace

trainer::TrainConfig RunConfig::default_mt() {
  trainer::TrainConfig c;
  c.phase = trainer::Phase::kMtScratch;
  c.iterations = 30;
  c.n_sample = 3000;
  c.eval_clips = 35;
  return c;
}

trainer::TrainConfig RunConfig::default_cf() {
  trainer::TrainConfig c;
  c.phase = trainer::Phase::kCfScratch;
  c.iterations = 20;
  c.n_sample = 3000;
  c.collect_on_path = false;
  return c;
}

trainer::TrainConfig RunConfig::default_finetune() {
  trainer::TrainConfig c;
  c.phase = trainer::Phase::kFinetune;
  c.iterations = 4;
  c.n_sample = 1500;
  return c;
}

trainer::TrainConfig RunConfig::default_offpolicy() {
  trainer::TrainConfig c;
  c.phase = trainer::Phase::kOffPolicy;
  c.iterations = 4;
  c.n_sample = 1500;
  c.n_w = 3000;
  return c;
}

trainer::TrainConfig RunConfig::phase_config(trainer::Phase phase) const {
  trainer::TrainConfig c;
  switch (phase) {
    case trainer::Phase::kMtScratch:
      c = mt;
      break;
    case trainer::Phase::kCfScratch:
      c = cf;
      break;
    case trainer::Phase::kFinetune:
      c = finetune;
      break;
    case trainer::Phase::kOffPolicy:
      c = offpolicy_train;
      break;
  }
  c.phase = phase;
  c.seed = seed;
  c.eval_seconds = path.seconds;
  c.eval_path = path::path_kind_from_name(path.kind);
  c.eval_pursuit.speed = path.speed;
  c.eval_pursuit.lookahead = path.lookahead;
  c.eval_pursuit.omega_limit = path.omega_limit;
  if (phase == trainer::Phase::kOffPolicy) {
    c.eval_path = path::path_kind_from_name(offpolicy.eval_path);
    c.eval_pursuit.speed = offpolicy.eval_speed;
  }
  return c;
}

trainer::Models RunConfig::models() const {
  policy::PolicyConfig p;
  p.joints = nets.joints;
  p.z_dim = nets.z_dim;
  p.sigma = nets.sigma;
  p.window = nets.window;
  p.hidden = nets.policy_hidden;
  wm::WorldModelConfig w;
  w.joints = nets.joints;
  w.hidden = nets.world_hidden;
  return {policy::VaePolicy(p), wm::WorldModel(w)};
}

std::vector<env::ReferenceClip> RunConfig::make_clips() const {
  std::vector<env::ReferenceClip> out;
  for (double v : clips.speeds) {
    for (double w : clips.turns) {
      try {
        out.push_back(env::scripted_gait_reference(
            v, w, clips.duration, env::PhysicalParams(), nets.joints));
      } catch (const InvalidArgument&) {
        // Outside the reachable twist set of the scripted gait.
      }
    }
  }
  if (out.empty()) throw ConfigError("clip grid contains no reachable gait");
  return out;
}

void RunConfig::validate() const {
  try {
    env.validate();
    env::validate_joint_count(nets.joints);
    path::path_kind_from_name(path.kind);
    path::path_kind_from_name(offpolicy.collect_path);
    path::path_kind_from_name(offpolicy.eval_path);
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
  if (nets.z_dim == 0 || nets.window == 0 || !(nets.sigma > 0.0)) {
    throw ConfigError("nets: z_dim and window must be positive, sigma > 0");
  }
  if (nets.policy_hidden.empty() || nets.world_hidden.empty()) {
    throw ConfigError("nets: hidden layer lists must be nonempty");
  }
  if (!(clips.duration > 0.0))
    throw ConfigError("clips.duration must be positive");
  if (!(path.seconds > 0.0)) throw ConfigError("path.seconds must be positive");
  if (!(offpolicy.collect_seconds > 0.0) || offpolicy.collect_speeds.empty()) {
    throw ConfigError("offpolicy: collect_speeds and collect_seconds required");
  }
  for (auto phase : {trainer::Phase::kMtScratch, trainer::Phase::kCfScratch,
                     trainer::Phase::kFinetune, trainer::Phase::kOffPolicy}) {
    phase_config(phase).validate();
  }
}

json to_json(const RunConfig& c) {
  return {
      {"seed", c.seed},
      {"output_dir", c.output_dir},
      {"env",
       {{"preset", c.env_preset},
        {"mass", c.env.mass},
        {"kp", c.env.kp},
        {"latency_ms", c.env.latency_ms},
        {"max_torque", c.env.max_torque}}},
      {"nets",
       {{"joints", c.nets.joints},
        {"z_dim", c.nets.z_dim},
        {"sigma", c.nets.sigma},
        {"window", c.nets.window},
        {"policy_hidden", c.nets.policy_hidden},
        {"world_hidden", c.nets.world_hidden}}},
      {"clips",
       {{"speeds", c.clips.speeds},
        {"turns", c.clips.turns},
        {"duration", c.clips.duration}}},
      {"path",
       {{"kind", c.path.kind},
        {"speed", c.path.speed},
        {"lookahead", c.path.lookahead},
        {"omega_limit", c.path.omega_limit},
        {"seconds", c.path.seconds}}},
      {"offpolicy",
       {{"collect_path", c.offpolicy.collect_path},
        {"collect_speeds", c.offpolicy.collect_speeds},
        {"collect_seconds", c.offpolicy.collect_seconds},
        {"eval_path", c.offpolicy.eval_path},
        {"eval_speed", c.offpolicy.eval_speed}}},
      {"train",
       {{"mt", train_to_json(c.mt)},
        {"cf", train_to_json(c.cf)},
        {"finetune", train_to_json(c.finetune)},
        {"offpolicy", train_to_json(c.offpolicy_train)}}},
  };
}

RunConfig run_config_from_json(const json& doc) {
  RunConfig c;
  Section root(doc, "");
  root.get("seed", c.seed);
  root.get("output_dir", c.output_dir);
  if (root.has("env")) {
    Section s = root.child("env");
    s.get("preset", c.env_preset);
    try {
      c.env = env::PhysicalParams::by_name(c.env_preset);
    } catch (const InvalidArgument& e) {
      throw ConfigError(std::string("env.preset: ") + e.what());
    }
    s.get("mass", c.env.mass);
    s.get("kp", c.env.kp);
    s.get("latency_ms", c.env.latency_ms);
    s.get("max_torque", c.env.max_torque);
    s.finish();
  }
  if (root.has("nets")) {
    Section s = root.child("nets");
    s.get("joints", c.nets.joints);
    s.get("z_dim", c.nets.z_dim);
    s.get("sigma", c.nets.sigma);
    s.get("window", c.nets.window);
    s.get("policy_hidden", c.nets.policy_hidden);
    s.get("world_hidden", c.nets.world_hidden);
    s.finish();
  }
  if (root.has("clips")) {
    Section s = root.child("clips");
    s.get("speeds", c.clips.speeds);
    s.get("turns", c.clips.turns);
    s.get("duration", c.clips.duration);
    s.finish();
  }
  if (root.has("path")) {
    Section s = root.child("path");
    s.get("kind", c.path.kind);
    s.get("speed", c.path.speed);
    s.get("lookahead", c.path.lookahead);
    s.get("omega_limit", c.path.omega_limit);
    s.get("seconds", c.path.seconds);
    s.finish();
  }
  if (root.has("offpolicy")) {
    Section s = root.child("offpolicy");
    s.get("collect_path", c.offpolicy.collect_path);
    s.get("collect_speeds", c.offpolicy.collect_speeds);
    s.get("collect_seconds", c.offpolicy.collect_seconds);
    s.get("eval_path", c.offpolicy.eval_path);
    s.get("eval_speed", c.offpolicy.eval_speed);
    s.finish();
  }
  if (root.has("train")) {
    Section s = root.child("train");
    if (s.has("mt")) train_from_json(s.child("mt"), c.mt);
    if (s.has("cf")) train_from_json(s.child("cf"), c.cf);
    if (s.has("finetune")) train_from_json(s.child("finetune"), c.finetune);
    if (s.has("offpolicy")) {
      train_from_json(s.child("offpolicy"), c.offpolicy_train);
    }
    s.finish();
  }
  root.finish();
  c.validate();
  return c;
}

void apply_override(json& doc, const std::string& assignment) {
  const std::size_t eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError("override '" + assignment + "' is not key=value");
  }
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value = json::parse(text, nullptr, /*allow_exceptions=*/false);
  if (value.is_discarded()) value = text;
  json* node = &doc;
  const std::vector<std::string> parts = split_dotted(key);
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
    if (!node->is_object()) {
      throw ConfigError("override key '" + key + "' descends into a value");
    }
    node = &(*node)[parts[i]];
    if (node->is_null()) *node = json::object();
  }
  if (!node->is_object()) {
    throw ConfigError("override key '" + key + "' descends into a value");
  }
  (*node)[parts.back()] = value;
}

RunConfig load_run_config(const std::string& path,
                          const std::vector<std::string>& overrides) {
  json doc = json::object();
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file '" + path + "'");
    try {
      in >> doc;
    } catch (const json::exception& e) {
      throw ConfigError("config file '" + path +
                        "' is not valid JSON: " + e.what());
    }
  }
  for (const std::string& o : overrides) apply_override(doc, o);
  if (const char* seed = std::getenv("WM_POLICY_SEED")) {
    char* end = nullptr;
    const unsigned long long v = std::strtoull(seed, &end, 10);
    if (end == seed || *end != '\0') {
      throw ConfigError("WM_POLICY_SEED must be an unsigned integer");
    }
    doc["seed"] = v;
  }
  return run_config_from_json(doc);
}

}  // namespace wmp::cli
