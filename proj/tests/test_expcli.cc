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

#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "wmp/common/error.h"
#include "wmp/expcli/checkpoint.h"
#include "wmp/expcli/cli.h"
#include "wmp/expcli/run_config.h"

using namespace wmp;
using namespace wmp::cli;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    static int counter = 0;
    path =
        fs::temp_directory_path() / ("wmp_test_" + std::to_string(::getpid()) +
                                     "_" + std::to_string(counter++));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& name) const {
    return (path / name).string();
  }
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct CliRun {
  int code = 0;
  std::string out;
  std::string err;
};

CliRun invoke(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  CliRun r;
  r.code = run_cli(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

const char* kTinyConfig = R"({
  "seed": 4,
  "nets": {"z_dim": 3, "policy_hidden": [8], "world_hidden": [8]},
  "clips": {"speeds": [0.5, 1.0], "turns": [-0.5, 0.5], "duration": 3},
  "path": {"seconds": 2},
  "offpolicy": {"collect_seconds": 2},
  "train": {
    "mt": {"iterations": 1, "n_sample": 60, "n_w": 2, "n_pi": 2, "batch": 4,
           "episode_steps": 40, "eval_clips": 1},
    "cf": {"iterations": 1, "n_sample": 60, "n_w": 2, "n_pi": 2, "batch": 4,
           "episode_steps": 40},
    "finetune": {"iterations": 1, "n_sample": 60, "n_w": 2, "n_pi": 2,
                 "batch": 4, "episode_steps": 40},
    "offpolicy": {"iterations": 1, "n_w": 2, "n_pi": 2, "batch": 4,
                  "episode_steps": 40}
  }
})";

trainer::Checkpoint tiny_checkpoint(const RunConfig& c) {
  return trainer::initialize(c.models(), c.make_clips(), c.seed);
}

}  // namespace

TEST_CASE("config round trip materializes every default") {
  const RunConfig c = run_config_from_json(json::object());
  const json doc = to_json(c);
  CHECK(to_json(run_config_from_json(doc)) == doc);
  CHECK(doc.at("train").at("mt").contains("lr_pi"));
  CHECK(doc.at("env").at("mass") == env::kNominalMass);
}

TEST_CASE("unknown keys and wrong types are rejected by name") {
  try {
    run_config_from_json(json::parse(R"({"train": {"mt": {"lr": 1}}})"));
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("train.mt.lr") != std::string::npos);
  }
  CHECK_THROWS_AS(run_config_from_json(json::parse(R"({"seed": "x"})")),
                  ConfigError);
  CHECK_THROWS_AS(
      run_config_from_json(json::parse(R"({"env": {"preset": "env9"}})")),
      ConfigError);
}

TEST_CASE("env presets fill missing fields and overrides win") {
  json doc = json::object();
  apply_override(doc, "env.preset=env2");
  CHECK(run_config_from_json(doc).env.mass == env::PhysicalParams::env2().mass);
  apply_override(doc, "env.mass=8.74");
  const RunConfig c = run_config_from_json(doc);
  CHECK(c.env.mass == 8.74);
  CHECK(c.env.latency_ms == 6.0);
  apply_override(doc, "path.kind=star");
  CHECK(run_config_from_json(doc).path.kind == "star");
  CHECK_THROWS_AS(apply_override(doc, "novalue"), ConfigError);
}

TEST_CASE("WM_POLICY_SEED overrides the configured seed") {
  ::setenv("WM_POLICY_SEED", "77", 1);
  const RunConfig c = load_run_config("", {"seed=5"});
  ::setenv("WM_POLICY_SEED", "abc", 1);
  CHECK_THROWS_AS(load_run_config("", {}), ConfigError);
  ::unsetenv("WM_POLICY_SEED");
  CHECK(c.seed == 77);
  CHECK(load_run_config("", {"seed=5"}).seed == 5);
}

TEST_CASE("checkpoint save, load, save is byte-identical") {
  TempDir dir;
  const RunConfig c = run_config_from_json(json::parse(kTinyConfig));
  trainer::Checkpoint ck = tiny_checkpoint(c);
  ck.iteration = 3;
  save_checkpoint(dir / "a.json", ck);
  const trainer::Checkpoint back = load_checkpoint(dir / "a.json", c.models());
  CHECK(back.store == ck.store);
  CHECK(back.iteration == 3);
  save_checkpoint(dir / "b.json", back);
  CHECK(slurp(dir / "a.json") == slurp(dir / "b.json"));
  CHECK_FALSE(fs::exists(dir / "a.json.tmp"));
}

TEST_CASE("checkpoint validation errors name the problem") {
  const RunConfig c = run_config_from_json(json::parse(kTinyConfig));
  const json good = checkpoint_to_json(tiny_checkpoint(c));
  auto message = [&](json doc) {
    try {
      checkpoint_from_json(doc, c.models());
    } catch (const CheckpointError& e) {
      return std::string(e.what());
    }
    return std::string();
  };
  json bad = good;
  bad["tensors"]["decoder/l0/w"]["shape"][0] = 1;
  CHECK(message(bad).find("decoder/l0/w") != std::string::npos);
  bad = good;
  bad["format_version"] = 99;
  CHECK(message(bad).find("format_version") != std::string::npos);
  bad = good;
  bad["tensors"].erase("prior/l1/b");
  CHECK(message(bad).find("prior/l1/b") != std::string::npos);
  bad = good;
  bad["tensors"]["extra/w"] = good["tensors"]["prior/l1/b"];
  CHECK(message(bad).find("extra/w") != std::string::npos);
  bad = good;
  bad["phase"] = "finetune";
  CHECK(message(bad).find("snapshot") != std::string::npos);
  const RunConfig wide =
      run_config_from_json(json::parse(R"({"nets": {"policy_hidden": [9]}})"));
  CHECK_THROWS_AS(checkpoint_from_json(good, wide.models()), CheckpointError);
}

TEST_CASE("cli usage and config errors exit 2 with one line") {
  CliRun r = invoke({});
  CHECK(r.code == kExitConfig);
  r = invoke({"train-mt", "--config", "/nonexistent/run.json"});
  CHECK(r.code == kExitConfig);
  CHECK(r.err.rfind("error kind=config message=", 0) == 0);
  CHECK(std::count(r.err.begin(), r.err.end(), '\n') == 1);
  r = invoke({"repro", "fig9"});
  CHECK(r.code == kExitConfig);
  r = invoke({"train-mt", "--override", "train.mt.bogus=1"});
  CHECK(r.code == kExitConfig);
  CHECK(r.err.find("train.mt.bogus") != std::string::npos);
  CHECK(invoke({"--help"}).code == kExitOk);
}

TEST_CASE("cli runtime errors exit 1") {
  TempDir dir;
  const CliRun r = invoke({"train-cf", "--from", dir / "missing.json"});
  CHECK(r.code == kExitRuntime);
  CHECK(r.err.rfind("error kind=checkpoint message=", 0) == 0);
}

TEST_CASE(
    "cli pipeline writes configs, metrics, checkpoints and trajectories") {
  TempDir dir;
  {
    std::ofstream(dir / "run.json") << kTinyConfig;
  }
  const std::string cfg = dir / "run.json";
  REQUIRE(invoke({"train-mt", "--config", cfg, "--out", dir / "mt"}).code == 0);
  CHECK(fs::exists(dir / "mt/checkpoints/iter_0000.json"));
  CHECK(fs::exists(dir / "mt/checkpoints/iter_0001.json"));
  const std::string metrics = slurp(dir / "mt/metrics.csv");
  CHECK(metrics.rfind(trainer::metrics_csv_header() + "\n", 0) == 0);
  CHECK(std::count(metrics.begin(), metrics.end(), '\n') == 3);

  // The saved config reruns the phase without the original command line.
  REQUIRE(invoke({"train-mt", "--config", dir / "mt/config.json", "--out",
                  dir / "mt2"})
              .code == 0);
  CHECK(slurp(dir / "mt2/checkpoint.json") ==
        slurp(dir / "mt/checkpoint.json"));

  CHECK(invoke({"finetune", "--config", cfg, "--from",
                dir / "mt/checkpoint.json", "--out", dir / "bad"})
            .code == kExitConfig);
  REQUIRE(invoke({"train-cf", "--config", cfg, "--from",
                  dir / "mt/checkpoint.json", "--out", dir / "cf"})
              .code == 0);
  REQUIRE(
      invoke({"finetune", "--config", cfg, "--from", dir / "cf/checkpoint.json",
              "--out", dir / "ft", "--override", "env.preset=env2"})
          .code == 0);
  const RunConfig c = run_config_from_json(json::parse(kTinyConfig));
  const trainer::Checkpoint ft =
      load_checkpoint(dir / "ft/checkpoint.json", c.models());
  CHECK(ft.phase == trainer::Phase::kFinetune);
  CHECK(c.models().policy.has_snapshot(ft.store));

  REQUIRE(invoke({"offpolicy-finetune", "--config", cfg, "--from",
                  dir / "cf/checkpoint.json", "--out", dir / "off"})
              .code == 0);

  const CliRun e = invoke({"eval-path", "--config", cfg, "--checkpoint",
                           dir / "ft/checkpoint.json", "--path", "oblong",
                           "--speed", "0.9", "--out", dir / "eval"});
  REQUIRE(e.code == 0);
  CHECK(e.out.rfind("path,speed,e_v,e_omega,e_p,loss_cf\noblong,0.9,", 0) == 0);
  const std::string traj = slurp(dir / "eval/trajectory.csv");
  CHECK(traj.rfind("step,t,x,y,heading,vx,vy,yaw_rate,cmd_v,cmd_omega\n", 0) ==
        0);
  CHECK(std::count(traj.begin(), traj.end(), '\n') == 101);
}

TEST_CASE("gen-ref writes a loadable clip") {
  TempDir dir;
  REQUIRE(invoke({"gen-ref", "--speed", "0.75", "--turn", "0.5", "--duration",
                  "2", "--file", dir / "clip.json"})
              .code == 0);
  const env::ReferenceClip clip =
      env::clip_from_json(json::parse(slurp(dir / "clip.json")));
  CHECK(clip.frames.size() == 100);
  CHECK(clip.speed == 0.75);
  CHECK(invoke({"gen-ref", "--speed", "9", "--file", dir / "x.json"}).code ==
        kExitRuntime);
}

TEST_CASE("repro bundles rerun byte-identically at quick scale") {
  TempDir dir;
  const std::string out = dir / "r";
  REQUIRE(
      invoke({"repro", "fig3c-env2", "--scale", "quick", "--out", out}).code ==
      0);
  const std::string first = slurp(out + "/fig3c-env2/metrics.csv");
  const std::string ckpt = slurp(out + "/fig3c-env2/checkpoint.json");
  fs::remove_all(out);
  REQUIRE(
      invoke({"repro", "fig3c-env2", "--scale", "quick", "--out", out}).code ==
      0);
  CHECK(slurp(out + "/fig3c-env2/metrics.csv") == first);
  CHECK(slurp(out + "/fig3c-env2/checkpoint.json") == ckpt);
}
