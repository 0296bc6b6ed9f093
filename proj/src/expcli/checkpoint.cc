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

#include "wmp/expcli/checkpoint.h"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "wmp/common/error.h"

namespace wmp::cli {
namespace {

using nlohmann::json;

bool is_stats(const std::string& name) {
  return name.starts_with(policy::kPolicyStatsPrefix) ||
         name.find("/stats/") != std::string::npos;
}

json tensor_to_json(const ad::Tensor& t) {
  return {{"shape", {t.rows(), t.cols()}}, {"data", t.to_vector()}};
}

ad::Tensor tensor_from_json(const std::string& name, const json& doc) {
  try {
    const auto shape = doc.at("shape").get<std::vector<std::size_t>>();
    const auto data = doc.at("data").get<std::vector<double>>();
    if (shape.size() != 2) {
      throw CheckpointError("tensor '" + name +
                            "' shape must have two entries");
    }
    if (shape[0] * shape[1] != data.size()) {
      throw CheckpointError("tensor '" + name + "' shape [" +
                            std::to_string(shape[0]) + ", " +
                            std::to_string(shape[1]) + "] does not match its " +
                            std::to_string(data.size()) + " values");
    }
    return ad::Tensor(ad::Shape{shape[0], shape[1]}, data);
  } catch (const json::exception& e) {
    throw CheckpointError("tensor '" + name + "' is malformed: " + e.what());
  }
}

std::string shape_text(const ad::Tensor& t) {
  return "[" + std::to_string(t.rows()) + ", " + std::to_string(t.cols()) + "]";
}

}  // namespace

json checkpoint_to_json(const trainer::Checkpoint& ckpt) {
  json stats = json::object();
  json tensors = json::object();
  for (const std::string& name : ckpt.store.names()) {
    (is_stats(name) ? stats : tensors)[name] =
        tensor_to_json(ckpt.store.at(name));
  }
  return {{"format_version", kCheckpointFormatVersion},
          {"phase", trainer::phase_name(ckpt.phase)},
          {"iteration", ckpt.iteration},
          {"seed", ckpt.seed},
          {"stats", stats},
          {"tensors", tensors}};
}

trainer::Checkpoint checkpoint_from_json(const json& doc,
                                         const trainer::Models& models) {
  trainer::Checkpoint ckpt;
  try {
    const int version = doc.at("format_version").get<int>();
    if (version != kCheckpointFormatVersion) {
      throw CheckpointError("checkpoint format_version " +
                            std::to_string(version) +
                            " is not supported (expected " +
                            std::to_string(kCheckpointFormatVersion) + ")");
    }
    try {
      ckpt.phase = trainer::phase_from_name(doc.at("phase").get<std::string>());
    } catch (const ConfigError& e) {
      throw CheckpointError(e.what());
    }
    ckpt.iteration = doc.at("iteration").get<std::size_t>();
    ckpt.seed = doc.at("seed").get<std::uint64_t>();
    for (const char* section : {"stats", "tensors"}) {
      for (const auto& [name, value] : doc.at(section).items()) {
        ckpt.store.set(name, tensor_from_json(name, value));
      }
    }
  } catch (const json::exception& e) {
    throw CheckpointError(std::string("checkpoint is malformed: ") + e.what());
  }

  ad::ParamStore expected;
  Rng rng(0);
  models.policy.init(expected, rng);
  models.world.init(expected, rng);
  for (const std::string& name : expected.names()) {
    if (!ckpt.store.contains(name)) {
      throw CheckpointError("checkpoint is missing tensor '" + name + "'");
    }
    const ad::Tensor& have = ckpt.store.at(name);
    const ad::Tensor& want = expected.at(name);
    if (have.rows() != want.rows() || have.cols() != want.cols()) {
      throw CheckpointError("tensor '" + name + "' has shape " +
                            shape_text(have) + ", expected " +
                            shape_text(want));
    }
  }
  bool snapshot = false;
  for (const std::string& name : ckpt.store.names()) {
    if (expected.contains(name)) continue;
    if (name.starts_with(policy::kDecoderSnapshotPrefix)) {
      snapshot = true;
      const std::string live =
          policy::kDecoderPrefix +
          name.substr(std::string(policy::kDecoderSnapshotPrefix).size());
      if (!expected.contains(live) ||
          ckpt.store.at(name).rows() != expected.at(live).rows() ||
          ckpt.store.at(name).cols() != expected.at(live).cols()) {
        throw CheckpointError("snapshot tensor '" + name +
                              "' does not match the decoder");
      }
      continue;
    }
    throw CheckpointError("checkpoint has unexpected tensor '" + name + "'");
  }
  if (snapshot && !models.policy.has_snapshot(ckpt.store)) {
    throw CheckpointError("checkpoint holds an incomplete decoder snapshot");
  }
  const bool tuning = ckpt.phase == trainer::Phase::kFinetune ||
                      ckpt.phase == trainer::Phase::kOffPolicy;
  if (tuning && !snapshot) {
    throw CheckpointError("fine-tuning checkpoint lacks the decoder snapshot");
  }
  return ckpt;
}

void write_file_atomic(const std::string& path, const std::string& text) {
  const std::filesystem::path target(path);
  if (target.has_parent_path()) {
    std::filesystem::create_directories(target.parent_path());
  }
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("io", "cannot write '" + tmp + "'");
    out << text;
    if (!out) throw Error("io", "failed writing '" + tmp + "'");
  }
  std::filesystem::rename(tmp, target);
}

void save_checkpoint(const std::string& path, const trainer::Checkpoint& ckpt) {
  write_file_atomic(path, checkpoint_to_json(ckpt).dump() + "\n");
}

trainer::Checkpoint load_checkpoint(const std::string& path,
                                    const trainer::Models& models) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot read checkpoint '" + path + "'");
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw CheckpointError("checkpoint '" + path +
                          "' is not valid JSON: " + e.what());
  }
  return checkpoint_from_json(doc, models);
}

}  // namespace wmp::cli
