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

#include "wmp/expcli/cli.h"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "wmp/common/error.h"
#include "wmp/envsim/reference.h"
#include "wmp/expcli/checkpoint.h"
#include "wmp/expcli/gradient_suite.h"
#include "wmp/expcli/run_config.h"
#include "wmp/pathcmd/path.h"
#include "wmp/trainer/trainer.h"

namespace wmp::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using trainer::Checkpoint;
using trainer::Phase;

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

std::string one_line(std::string s) {
  for (char& c : s) {
    if (c == '\n' || c == '\r') c = ' ';
  }
  return s;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return {};
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string config_text(const RunConfig& config) {
  return to_json(config).dump(2) + "\n";
}

// Persists the metrics CSV and checkpoints of one training phase as
// iterations complete, so an interrupted run leaves consistent files.
class RunWriter {
 public:
  RunWriter(fs::path dir, const RunConfig& config, std::ostream& log)
      : dir_(std::move(dir)), log_(log) {
    write_file_atomic((dir_ / "config.json").string(), config_text(config));
    csv_ = trainer::metrics_csv_header() + "\n";
  }

  trainer::IterationCallback callback() {
    return [this](const Checkpoint& ckpt, const trainer::IterationMetrics& m) {
      csv_ += trainer::metrics_csv_row(m) + "\n";
      char name[32];
      std::snprintf(name, sizeof(name), "iter_%04zu.json", m.iteration);
      save_checkpoint((dir_ / "checkpoints" / name).string(), ckpt);
      save_checkpoint((dir_ / "checkpoint.json").string(), ckpt);
      write_file_atomic((dir_ / "metrics.csv").string(), csv_);
      log_ << dir_.filename().string() << " " << trainer::metrics_csv_row(m)
           << "\n"
           << std::flush;
    };
  }

  const fs::path& dir() const { return dir_; }

 private:
  fs::path dir_;
  std::ostream& log_;
  std::string csv_;
};

std::string trajectory_csv(const env::Trajectory& traj) {
  std::string out = "step,t,x,y,heading,vx,vy,yaw_rate,cmd_v,cmd_omega\n";
  for (std::size_t i = 0; i < traj.steps(); ++i) {
    const env::RobotState& s = traj.states[i];
    const env::Command& c = traj.commands[i];
    out += std::to_string(i) + "," + num(static_cast<double>(i) * env::kDt) +
           "," + num(s.x) + "," + num(s.y) + "," + num(s.heading) + "," +
           num(s.vx) + "," + num(s.vy) + "," + num(s.yaw_rate) + "," +
           num(c.v) + "," + num(c.omega) + "\n";
  }
  return out;
}

path::PursuitConfig pursuit_for(const RunConfig& config, double speed) {
  path::PursuitConfig p;
  p.speed = speed;
  p.lookahead = config.path.lookahead;
  p.omega_limit = config.path.omega_limit;
  return p;
}

// Runs one phase into `dir`. A diverged run keeps its last good checkpoint
// and propagates the error.
trainer::TrainResult run_phase(const RunConfig& config, Phase phase,
                               const env::PhysicalParams& params,
                               Checkpoint start, const fs::path& dir,
                               std::ostream& log,
                               const trainer::ReplayBuffer* stored = nullptr) {
  const trainer::Models models = config.models();
  const trainer::TrainConfig tc = config.phase_config(phase);
  RunWriter writer(dir, config, log);
  try {
    switch (phase) {
      case Phase::kMtScratch:
        return trainer::co_train_mt(tc, models, params, config.make_clips(),
                                    std::move(start), writer.callback());
      case Phase::kCfScratch:
        return trainer::train_cf(tc, models, params, std::move(start),
                                 writer.callback());
      case Phase::kFinetune:
        return trainer::fine_tune(tc, models, params, std::move(start),
                                  writer.callback());
      case Phase::kOffPolicy:
        return trainer::off_policy_finetune(
            tc, models, *stored, params, std::move(start), writer.callback());
    }
  } catch (const trainer::TrainingDiverged& e) {
    save_checkpoint((dir / "checkpoint.json").string(), e.last_good());
    throw;
  }
  throw std::logic_error("unhandled phase");
}

Checkpoint fresh_mt_start(const RunConfig& config) {
  return trainer::initialize(config.models(), config.make_clips(), config.seed);
}

trainer::ReplayBuffer collect_stored(const RunConfig& config,
                                     const Checkpoint& from,
                                     const env::PhysicalParams& params) {
  const trainer::TrainConfig tc = config.phase_config(Phase::kOffPolicy);
  return trainer::collect_path_data(
      config.models(), from.store, params,
      path::make_path(path::path_kind_from_name(config.offpolicy.collect_path)),
      config.offpolicy.collect_speeds, config.offpolicy.collect_seconds,
      tc.episode_steps, Rng(config.seed).fork(7).seed());
}

double parse_field(const std::string& text) {
  return text.empty() ? NAN : std::stod(text);
}

// Inverse of metrics_csv_row for files written by RunWriter.
std::vector<trainer::IterationMetrics> read_metrics(const fs::path& path) {
  std::istringstream in(read_file(path));
  std::string line;
  std::getline(in, line);
  std::vector<trainer::IterationMetrics> rows;
  while (std::getline(in, line)) {
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    f.resize(10);
    trainer::IterationMetrics m;
    m.iteration = std::stoull(f[0]);
    m.samples_total = std::stoull(f[1]);
    m.loss_w = parse_field(f[2]);
    m.loss_policy = parse_field(f[3]);
    m.reg_loss = parse_field(f[4]);
    m.e_v = parse_field(f[5]);
    m.e_omega = parse_field(f[6]);
    m.e_p = parse_field(f[7]);
    m.tracking_reward = parse_field(f[8]);
    m.eval_loss_cf = parse_field(f[9]);
    rows.push_back(m);
  }
  return rows;
}

// ---- repro bundles ----

// Reduced budgets for smoke runs and determinism checks.
const std::vector<std::string> kQuickOverrides = {
    "nets.policy_hidden=[16]",
    "nets.world_hidden=[16]",
    "nets.z_dim=4",
    "clips.speeds=[0.5,1.0]",
    "clips.turns=[0.0]",
    "clips.duration=4",
    "path.seconds=4",
    "offpolicy.collect_seconds=4",
    "train.mt.iterations=2",
    "train.mt.n_sample=200",
    "train.mt.n_w=10",
    "train.mt.n_pi=5",
    "train.mt.batch=8",
    "train.mt.episode_steps=60",
    "train.mt.eval_clips=2",
    "train.cf.iterations=2",
    "train.cf.n_sample=200",
    "train.cf.n_w=10",
    "train.cf.n_pi=5",
    "train.cf.batch=8",
    "train.cf.episode_steps=60",
    "train.finetune.iterations=2",
    "train.finetune.n_sample=200",
    "train.finetune.n_w=10",
    "train.finetune.n_pi=5",
    "train.finetune.batch=8",
    "train.finetune.episode_steps=60",
    "train.offpolicy.iterations=2",
    "train.offpolicy.n_w=10",
    "train.offpolicy.n_pi=5",
    "train.offpolicy.batch=8",
    "train.offpolicy.episode_steps=60",
};

struct Bundle {
  std::string name;
  std::string env;
  // Fine-tuning iterations: the 4/6/8 budget plus two.
  std::size_t iterations = 0;
};

const std::vector<Bundle>& fig3c_bundles() {
  static const std::vector<Bundle> b = {{"fig3c-env2", "env2", 6},
                                        {"fig3c-env3", "env3", 8},
                                        {"fig3c-env4", "env4", 10}};
  return b;
}

const std::vector<double> kRealSpeeds = {0.6, 0.9, 1.2};
const std::vector<double> kUnseenSpeeds = {0.7, 0.8, 1.0};
const std::string kRealEnv = "env2";

class Repro {
 public:
  Repro(RunConfig config, fs::path root, std::ostream& log)
      : config_(std::move(config)), root_(std::move(root)), log_(log) {}

  void run(const std::string& bundle) {
    if (bundle == "fig3a") return fig3a();
    for (const Bundle& b : fig3c_bundles()) {
      if (bundle == b.name) return fig3c(b);
    }
    if (bundle == "fig3d-analog" || bundle == "table2-analog") {
      return real_adaptation(bundle);
    }
    if (bundle == "table4-analog") return table4();
    throw ConfigError("unknown repro bundle '" + bundle + "'");
  }

 private:
  // Runs a phase into `dir` unless a completed run with the same
  // configuration is already there.
  trainer::TrainResult cached(const RunConfig& cfg, Phase phase,
                              const env::PhysicalParams& params,
                              const fs::path& dir,
                              const std::function<Checkpoint()>& start) {
    if (read_file(dir / "config.json") == config_text(cfg) &&
        fs::exists(dir / "complete")) {
      trainer::TrainResult r;
      r.checkpoint =
          load_checkpoint((dir / "checkpoint.json").string(), cfg.models());
      r.metrics = read_metrics(dir / "metrics.csv");
      return r;
    }
    trainer::TrainResult r = run_phase(cfg, phase, params, start(), dir, log_);
    write_file_atomic((dir / "complete").string(), "");
    return r;
  }

  // MT and CF checkpoints trained under the configured environment, shared
  // by every bundle.
  Checkpoint base(Phase phase) {
    return cached(config_, phase, config_.env,
                  root_ / "base" / trainer::phase_name(phase),
                  [&] {
                    return phase == Phase::kMtScratch ? fresh_mt_start(config_)
                                                      : base(Phase::kMtScratch);
                  })
        .checkpoint;
  }

  void fig3a() {
    base(Phase::kMtScratch);
    copy_outputs(root_ / "base" / "mt-scratch", root_ / "fig3a");
  }

  void fig3c(const Bundle& b) {
    RunConfig cfg = config_;
    cfg.finetune.iterations = b.iterations;
    run_phase(cfg, Phase::kFinetune, env::PhysicalParams::by_name(b.env),
              base(Phase::kCfScratch), root_ / b.name, log_);
  }

  void real_adaptation(const std::string& bundle) {
    const Checkpoint cf = base(Phase::kCfScratch);
    std::string summary = bundle == "fig3d-analog"
                              ? "speed,iteration,eval_loss_cf\n"
                              : "speed,iteration,e_v,e_omega\n";
    for (double speed : kRealSpeeds) {
      RunConfig cfg = config_;
      cfg.path.speed = speed;
      const trainer::TrainResult r =
          cached(cfg, Phase::kFinetune, env::PhysicalParams::by_name(kRealEnv),
                 root_ / "real-adaptation" / ("speed_" + num(speed)),
                 [&] { return cf; });
      for (const trainer::IterationMetrics& m : r.metrics) {
        summary += num(speed) + "," + std::to_string(m.iteration) + ",";
        summary += bundle == "fig3d-analog" ? num(m.eval_loss_cf)
                                            : num(m.e_v) + "," + num(m.e_omega);
        summary += "\n";
      }
    }
    write_file_atomic((root_ / bundle / "summary.csv").string(), summary);
  }

  void table4() {
    const fs::path dir = root_ / "table4-analog";
    const env::PhysicalParams params = env::PhysicalParams::by_name(kRealEnv);
    const Checkpoint cf = base(Phase::kCfScratch);
    const trainer::ReplayBuffer stored = collect_stored(config_, cf, params);
    const trainer::TrainResult r = run_phase(config_, Phase::kOffPolicy, params,
                                             cf, dir / "train", log_, &stored);

    const trainer::Models models = config_.models();
    std::string detail = "path,speed,stage,e_v,e_omega,e_p\n";
    std::string table = "path,stage,e_v,e_omega,e_p\n";
    for (path::PathKind kind :
         {path::PathKind::kOblong, path::PathKind::kLemniscate,
          path::PathKind::kUShape, path::PathKind::kStar}) {
      const path::Path p = path::make_path(kind);
      for (const auto& [stage, ckpt] :
           {std::pair<std::string, const Checkpoint*>{"origin", &cf},
            {"adapted", &r.checkpoint}}) {
        double sv = 0.0, sw = 0.0, sp = 0.0;
        for (double speed : kUnseenSpeeds) {
          const trainer::PathEvaluation e = trainer::evaluate_path(
              models, ckpt->store, params, p, pursuit_for(config_, speed),
              config_.path.seconds);
          detail += path::path_kind_name(kind) + "," + num(speed) + "," +
                    stage + "," + num(e.metrics.e_v) + "," +
                    num(e.metrics.e_omega) + "," + num(e.metrics.e_p) + "\n";
          sv += e.metrics.e_v;
          sw += e.metrics.e_omega;
          sp += e.metrics.e_p;
        }
        const double n = static_cast<double>(kUnseenSpeeds.size());
        table += path::path_kind_name(kind) + "," + stage + "," + num(sv / n) +
                 "," + num(sw / n) + "," + num(sp / n) + "\n";
      }
    }
    write_file_atomic((dir / "unseen_detail.csv").string(), detail);
    write_file_atomic((dir / "table.csv").string(), table);
  }

  void copy_outputs(const fs::path& from, const fs::path& to) {
    for (const char* name : {"config.json", "metrics.csv", "checkpoint.json"}) {
      write_file_atomic((to / name).string(), read_file(from / name));
    }
  }

  RunConfig config_;
  fs::path root_;
  std::ostream& log_;
};

// ---- subcommands ----

struct Common {
  std::string config_path;
  std::vector<std::string> overrides;
  std::string out;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--config", config_path, "JSON run configuration");
    cmd->add_option("--override", overrides, "dotted key=value")
        ->take_all()
        ->allow_extra_args(false);
    cmd->add_option("--out", out, "output directory (default: output_dir)");
  }

  RunConfig load(const std::vector<std::string>& extra = {}) const {
    std::vector<std::string> all = extra;
    all.insert(all.end(), overrides.begin(), overrides.end());
    RunConfig c = load_run_config(config_path, all);
    if (!out.empty()) c.output_dir = out;
    return c;
  }
};

Checkpoint load_from(const RunConfig& config, const std::string& path,
                     Phase expected) {
  Checkpoint c = load_checkpoint(path, config.models());
  if (c.phase != expected) {
    throw ConfigError("checkpoint '" + path + "' is from phase " +
                      trainer::phase_name(c.phase) + ", expected " +
                      trainer::phase_name(expected));
  }
  return c;
}

}  // namespace

std::vector<std::string> repro_bundles() {
  std::vector<std::string> names = {"fig3a"};
  for (const Bundle& b : fig3c_bundles()) names.push_back(b.name);
  names.insert(names.end(), {"fig3d-analog", "table2-analog", "table4-analog"});
  return names;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out,
            std::ostream& err) {
  CLI::App app{"World-model policy training experiments", "wmp"};
  app.require_subcommand(1);

  Common common;
  std::string from;

  CLI::App* gen_ref = app.add_subcommand("gen-ref", "write a reference clip");
  double ref_speed = 0.5, ref_turn = 0.0, ref_duration = 10.0;
  std::string ref_file;
  gen_ref->add_option("--speed", ref_speed, "forward speed (m/s)");
  gen_ref->add_option("--turn", ref_turn, "yaw rate (rad/s)");
  gen_ref->add_option("--duration", ref_duration, "seconds");
  gen_ref->add_option("--file", ref_file, "output clip JSON")->required();

  CLI::App* train_mt = app.add_subcommand("train-mt", "motion tracking");
  CLI::App* train_cf = app.add_subcommand("train-cf", "command following");
  train_cf->add_option("--from", from, "motion-tracking checkpoint")
      ->required();
  CLI::App* finetune = app.add_subcommand("finetune", "online fine-tuning");
  finetune->add_option("--from", from, "command-following checkpoint")
      ->required();
  CLI::App* offpolicy =
      app.add_subcommand("offpolicy-finetune", "fine-tuning on stored data");
  offpolicy->add_option("--from", from, "command-following checkpoint")
      ->required();

  CLI::App* eval = app.add_subcommand("eval-path", "path-following rollout");
  std::string eval_path;
  double eval_speed = -1.0;
  eval->add_option("--checkpoint", from, "checkpoint to evaluate")->required();
  eval->add_option("--path", eval_path,
                   "oblong, lemniscate, u_shape or star (default: path.kind)");
  eval->add_option("--speed", eval_speed, "target speed (default: path.speed)");

  CLI::App* gradcheck =
      app.add_subcommand("gradcheck", "finite-difference gradient suite");
  std::size_t seeds = 5;
  gradcheck->add_option("--seeds", seeds, "number of random seeds");

  CLI::App* repro = app.add_subcommand("repro", "named experiment bundle");
  std::string bundle, scale = "full";
  repro->add_option("bundle", bundle, "bundle name")
      ->required()
      ->check(CLI::IsMember(repro_bundles()));
  repro->add_option("--scale", scale, "full or quick")
      ->check(CLI::IsMember({"full", "quick"}));

  for (CLI::App* cmd :
       {gen_ref, train_mt, train_cf, finetune, offpolicy, eval, repro}) {
    common.add_to(cmd);
  }

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error kind=usage message=" << one_line(e.what()) << "\n";
    return kExitConfig;
  }

  try {
    if (gen_ref->parsed()) {
      const RunConfig c = common.load();
      const env::ReferenceClip clip = env::scripted_gait_reference(
          ref_speed, ref_turn, ref_duration, c.env, c.nets.joints);
      write_file_atomic(ref_file, env::clip_to_json(clip).dump() + "\n");
      out << "wrote " << ref_file << " (" << clip.frames.size() << " frames)\n";
    } else if (train_mt->parsed()) {
      const RunConfig c = common.load();
      run_phase(c, Phase::kMtScratch, c.env, fresh_mt_start(c), c.output_dir,
                out);
    } else if (train_cf->parsed()) {
      const RunConfig c = common.load();
      run_phase(c, Phase::kCfScratch, c.env,
                load_from(c, from, Phase::kMtScratch), c.output_dir, out);
    } else if (finetune->parsed()) {
      const RunConfig c = common.load();
      Checkpoint start = load_checkpoint(from, c.models());
      if (start.phase == Phase::kMtScratch) {
        throw ConfigError("finetune needs a command-following checkpoint");
      }
      run_phase(c, Phase::kFinetune, c.env, std::move(start), c.output_dir,
                out);
    } else if (offpolicy->parsed()) {
      const RunConfig c = common.load();
      Checkpoint start = load_checkpoint(from, c.models());
      if (start.phase == Phase::kMtScratch) {
        throw ConfigError(
            "offpolicy-finetune needs a command-following checkpoint");
      }
      const trainer::ReplayBuffer stored = collect_stored(c, start, c.env);
      run_phase(c, Phase::kOffPolicy, c.env, std::move(start), c.output_dir,
                out, &stored);
    } else if (eval->parsed()) {
      const RunConfig c = common.load();
      const std::string kind = eval_path.empty() ? c.path.kind : eval_path;
      const double speed = eval_speed < 0.0 ? c.path.speed : eval_speed;
      const path::PathKind pk = path::path_kind_from_name(kind);
      const Checkpoint ckpt = load_checkpoint(from, c.models());
      const trainer::PathEvaluation e = trainer::evaluate_path(
          c.models(), ckpt.store, c.env, path::make_path(pk),
          pursuit_for(c, speed), c.path.seconds);
      const fs::path dir = c.output_dir;
      write_file_atomic((dir / "config.json").string(), config_text(c));
      write_file_atomic((dir / "trajectory.csv").string(),
                        trajectory_csv(e.trajectory));
      const std::string metrics =
          "path,speed,e_v,e_omega,e_p,loss_cf\n" + kind + "," + num(speed) +
          "," + num(e.metrics.e_v) + "," + num(e.metrics.e_omega) + "," +
          num(e.metrics.e_p) + "," + num(e.loss_cf) + "\n";
      write_file_atomic((dir / "metrics.csv").string(), metrics);
      out << metrics;
    } else if (gradcheck->parsed()) {
      bool ok = true;
      for (const GradientCase& g : run_gradient_suite(seeds)) {
        out << g.name << " seed=" << g.seed << " "
            << (g.report.passed() ? "PASS" : "FAIL")
            << " max_rel_error=" << g.report.max_rel_error
            << " checked=" << g.report.checked << "\n";
        ok = ok && g.report.passed();
      }
      if (!ok) {
        err << "error kind=gradcheck message=gradient mismatch\n";
        return kExitRuntime;
      }
    } else if (repro->parsed()) {
      const RunConfig c = common.load(
          scale == "quick" ? kQuickOverrides : std::vector<std::string>{});
      Repro(c, c.output_dir, out).run(bundle);
    }
  } catch (const ConfigError& e) {
    err << "error kind=" << e.kind() << " message=" << one_line(e.what())
        << "\n";
    return kExitConfig;
  } catch (const Error& e) {
    err << "error kind=" << e.kind() << " message=" << one_line(e.what())
        << "\n";
    return kExitRuntime;
  } catch (const std::exception& e) {
    err << "error kind=runtime message=" << one_line(e.what()) << "\n";
    return kExitRuntime;
  }
  return kExitOk;
}

}  // namespace wmp::cli
