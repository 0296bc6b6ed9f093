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

#ifndef WMP_PATHCMD_PATH_H_
#define WMP_PATHCMD_PATH_H_

#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "wmp/envsim/env.h"

namespace wmp::path {

struct Point {
  double x = 0.0;
  double y = 0.0;
};

inline constexpr double kMaxSpacing = 0.05;

// World-frame polyline densified to at most kMaxSpacing between waypoints.
// Closed paths include the segment from the last waypoint back to the first.
class Path {
 public:
  Path(std::vector<Point> points, bool closed);

  const std::vector<Point>& points() const { return points_; }
  // arc()[i] is the arc length at points()[i].
  const std::vector<double>& arc() const { return arc_; }
  bool closed() const { return closed_; }
  double length() const { return length_; }
  std::size_t segment_count() const;

  // Point and unit tangent at arc length s; wraps on closed paths and clamps
  // on open ones.
  Point point_at(double s) const;
  Point tangent_at(double s) const;
  // Arc length of the closest point. With a hint, only the stretch
  // [hint - back, hint + ahead] is searched.
  double nearest_arc(const Point& p, std::optional<double> hint = std::nullopt,
                     double back = 0.5, double ahead = 1.5) const;
  // Pose at the start of the path, heading along the tangent.
  env::RobotState start_state(std::size_t joints = env::kDefaultJoints) const;

  nlohmann::json to_json() const;

 private:
  std::vector<Point> points_;
  std::vector<double> arc_;
  bool closed_;
  double length_ = 0.0;

  double wrap_arc(double s) const;
  std::size_t segment_at(double s) const;
  Point segment_end(std::size_t i) const;
};

enum class PathKind { kOblong, kLemniscate, kUShape, kStar };

PathKind path_kind_from_name(const std::string& name);
std::string path_kind_name(PathKind kind);

// Oblong: 3 m straights joined by 1 m semicircles. Lemniscate: Bernoulli
// lemniscate of half-width 2 m. U-shape: three 3 m straights joined by 0.5 m
// quarter arcs (open). Star: five points on a 2 m circumradius with 0.2 m
// rounding. Every path starts at its leftmost point and runs
// counterclockwise there.
Path make_path(PathKind kind, double scale = 1.0);

struct PursuitConfig {
  double lookahead = 0.6;
  double speed = 0.9;
  double omega_limit = 1.5;
  // An open path counts as finished once the nearest point is this close to
  // its end.
  double finish_tolerance = 0.1;

  void validate() const;
};

struct PursuitResult {
  env::Command command;
  double progress = 0.0;
  bool complete = false;
};

PursuitResult pure_pursuit(double x, double y, double heading, const Path& path,
                           const PursuitConfig& config,
                           std::optional<double> hint = std::nullopt);

// Stateful wrapper that restricts the nearest-point search to the stretch
// after the previous progress, which keeps self-crossing paths unambiguous.
class PursuitTracker {
 public:
  PursuitTracker(const Path& path, PursuitConfig config,
                 std::optional<double> start_progress = std::nullopt)
      : path_(&path), config_(config), progress_hint_(start_progress) {}

  env::Command command(const env::RobotState& state);
  bool complete() const { return complete_; }
  double progress() const { return progress_; }

 private:
  const Path* path_;
  PursuitConfig config_;
  std::optional<double> progress_hint_;
  double progress_ = 0.0;
  bool complete_ = false;
};

struct TrackingMetrics {
  double e_v = 0.0;
  double e_omega = 0.0;
  double e_p = 0.0;
};

// states[i] is the state reached after following commands[i] for one step of
// `dt`; the reference point for sample i lies target_speed * (i + 1) * dt
// along the path from its start.
TrackingMetrics tracking_metrics(const std::vector<env::RobotState>& states,
                                 const std::vector<env::Command>& commands,
                                 const Path& path, double target_speed,
                                 double dt = env::kDt);

}  // namespace wmp::path

#endif  // WMP_PATHCMD_PATH_H_
