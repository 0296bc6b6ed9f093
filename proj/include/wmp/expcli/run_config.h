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

#ifndef WMP_EXPCLI_RUN_CONFIG_H_
#define WMP_EXPCLI_RUN_CONFIG_H_

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "wmp/envsim/env.h"
#include "wmp/trainer/trainer.h"

namespace wmp::cli {

struct NetsConfig {
  std::size_t joints = env::kDefaultJoints;
  std::size_t z_dim = 16;
  double sigma = 0.3;
  std::size_t window = 2;
  std::vector<std::size_t> policy_hidden{256, 256};
  std::vector<std::size_t> world_hidden{256, 256};
};

// Scripted reference clips for motion tracking: every reachable
// (speed, turn) pair of the grid.
struct ClipSetConfig {
  std::vector<double> speeds{0.0, 0.25, 0.5, 0.75, 1.0, 1.25, 1.5};
  std::vector<double> turns{-1.0, -0.5, 0.0, 0.5, 1.0};
  double duration = 10.0;
};

struct PathConfig {
  std::string kind = "oblong";
  double speed = 0.9;
  double lookahead = 0.6;
  double omega_limit = 1.5;
  double seconds = 30.0;
};

// Stored data for off-policy fine-tuning and its held-out evaluation.
struct OffPolicyConfig {
  std::string collect_path = "oblong";
  std::vector<double> collect_speeds{0.6, 0.9, 1.2};
  // Seconds of data per speed.
  double collect_seconds = 150.0;
  std::string eval_path = "lemniscate";
  double eval_speed = 0.8;
};

struct RunConfig {
  std::uint64_t seed = 0;
  std::string output_dir = "runs/default";
  std::string env_preset = "original";
  env::PhysicalParams env;
  NetsConfig nets;
  ClipSetConfig clips;
  PathConfig path;
  OffPolicyConfig offpolicy;
  trainer::TrainConfig mt = default_mt();
  trainer::TrainConfig cf = default_cf();
  trainer::TrainConfig finetune = default_finetune();
  trainer::TrainConfig offpolicy_train = default_offpolicy();

  static trainer::TrainConfig default_mt();
  static trainer::TrainConfig default_cf();
  static trainer::TrainConfig default_finetune();
  static trainer::TrainConfig default_offpolicy();

  // The phase config with seed and evaluation path filled in.
  trainer::TrainConfig phase_config(trainer::Phase phase) const;
  trainer::Models models() const;
  std::vector<env::ReferenceClip> make_clips() const;
  void validate() const;
};

// Full document with every default materialized.
nlohmann::json to_json(const RunConfig& config);
// Strict parse: unknown keys and wrong types raise ConfigError naming the
// dotted key. Missing keys keep their defaults; env fields missing from the
// document come from env.preset.
RunConfig run_config_from_json(const nlohmann::json& doc);

// Sets the dotted `key=value` inside `doc`. The value is parsed as JSON when
// possible and taken as a string otherwise.
void apply_override(nlohmann::json& doc, const std::string& assignment);

// Reads `path` (empty for defaults), applies overrides in order, then the
// WM_POLICY_SEED environment variable.
RunConfig load_run_config(const std::string& path,
                          const std::vector<std::string>& overrides);

}  // namespace wmp::cli

#endif  // WMP_EXPCLI_RUN_CONFIG_H_
