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

#ifndef WMP_EXPCLI_CHECKPOINT_H_
#define WMP_EXPCLI_CHECKPOINT_H_

#include <string>

#include "json.hpp"
#include "wmp/trainer/trainer.h"

namespace wmp::cli {

inline constexpr int kCheckpointFormatVersion = 1;

// {format_version, phase, iteration, seed, stats, tensors}; stats holds the
// normalization tensors, tensors every network parameter. Each tensor is
// {shape: [rows, cols], data: [row-major values]}.
nlohmann::json checkpoint_to_json(const trainer::Checkpoint& ckpt);
// Checks the document against the tensors `models` expects. The decoder
// snapshot is optional except for fine-tuning phases.
trainer::Checkpoint checkpoint_from_json(const nlohmann::json& doc,
                                         const trainer::Models& models);

void save_checkpoint(const std::string& path, const trainer::Checkpoint& ckpt);
trainer::Checkpoint load_checkpoint(const std::string& path,
                                    const trainer::Models& models);

// Writes `text` to `path` through a temporary file and a rename.
void write_file_atomic(const std::string& path, const std::string& text);

}  // namespace wmp::cli

#endif  // WMP_EXPCLI_CHECKPOINT_H_
