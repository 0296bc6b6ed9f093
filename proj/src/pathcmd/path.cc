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

#include "wmp/pathcmd/path.h"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "wmp/common/error.h"

namespace wmp::path {
namespace {

using std::numbers::pi;

double distance(const Point& a, const Point& b) {
  return std::hypot(b.x - a.x, b.y - a.y);
}

std::vector<Point> densify(const std::vector<Point>& raw, bool closed) {
  std::vector<Point> out;
  auto push = [&](const Point& p) {
    if (out.empty() || distance(out.back(), p) > 1e-9) out.push_back(p);
  };
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (!std::isfinite(raw[i].x) || !std::isfinite(raw[i].y)) {
      throw InvalidArgument("path waypoint " + std::to_string(i) +
                            " is not finite");
    }
    if (i == 0) {
      push(raw[0]);
      continue;
    }
    const Point a = out.back();
    const Point& b = raw[i];
    const auto pieces = static_cast<std::size_t>(
        std::ceil(distance(a, b) / kMaxSpacing - 1e-9));
    for (std::size_t k = 1; k <= pieces; ++k) {
      const double f = static_cast<double>(k) / pieces;
      push({a.x + f * (b.x - a.x), a.y + f * (b.y - a.y)});
    }
  }
  if (closed) {
    while (out.size() > 1 && distance(out.back(), out.front()) <= 1e-9) {
      out.pop_back();
    }
    if (out.size() > 1) {
      const Point a = out.back();
      const Point b = out.front();
      const auto pieces = static_cast<std::size_t>(
          std::ceil(distance(a, b) / kMaxSpacing - 1e-9));
      for (std::size_t k = 1; k < pieces; ++k) {
        const double f = static_cast<double>(k) / pieces;
        out.push_back({a.x + f * (b.x - a.x), a.y + f * (b.y - a.y)});
      }
    }
  }
  return out;
}

// Polyline through `vertices` with every interior corner (every corner when
// closed) replaced by a circular arc of `radius`.
std::vector<Point> rounded(const std::vector<Point>& vertices, double radius,
                           bool closed) {
  const std::size_t n = vertices.size();
  std::vector<Point> out;
  for (std::size_t i = 0; i < n; ++i) {
    const Point& v = vertices[i];
    if (!closed && (i == 0 || i + 1 == n)) {
      out.push_back(v);
      continue;
    }
    const Point& prev = vertices[(i + n - 1) % n];
    const Point& next = vertices[(i + 1) % n];
    const double lin = distance(prev, v);
    const double lout = distance(v, next);
    const Point uin{(v.x - prev.x) / lin, (v.y - prev.y) / lin};
    const Point uout{(next.x - v.x) / lout, (next.y - v.y) / lout};
    const double turn = std::atan2(uin.x * uout.y - uin.y * uout.x,
                                   uin.x * uout.x + uin.y * uout.y);
    if (std::fabs(turn) < 1e-12) {
      out.push_back(v);
      continue;
    }
    const double d = radius * std::tan(std::fabs(turn) / 2.0);
    const Point t1{v.x - d * uin.x, v.y - d * uin.y};
    const double side = turn > 0 ? 1.0 : -1.0;
    const Point c{t1.x - side * radius * uin.y, t1.y + side * radius * uin.x};
    const double a0 = std::atan2(t1.y - c.y, t1.x - c.x);
    const auto m = static_cast<std::size_t>(
        std::ceil(radius * std::fabs(turn) / (0.25 * kMaxSpacing)));
    for (std::size_t k = 0; k <= m; ++k) {
      const double a = a0 + turn * static_cast<double>(k) / m;
      out.push_back({c.x + radius * std::cos(a), c.y + radius * std::sin(a)});
    }
  }
  return out;
}

// Rotates a closed loop to start at its leftmost point and orients it so the
// start is traversed downwards (counterclockwise around that point).
std::vector<Point> normalize_loop(std::vector<Point> pts) {
  const auto left = std::min_element(
      pts.begin(), pts.end(), [](const Point& a, const Point& b) {
        return a.x < b.x || (a.x == b.x && a.y < b.y);
      });
  std::rotate(pts.begin(), left, pts.end());
  const Point& next = pts[1];
  const Point& prev = pts.back();
  if (next.y - pts[0].y > prev.y - pts[0].y) {
    std::reverse(pts.begin() + 1, pts.end());
  }
  return pts;
}

std::vector<Point> lemniscate(double a) {
  const std::size_t n = 4000;
  std::vector<Point> pts;
  for (std::size_t k = 0; k < n; ++k) {
    const double t = 2.0 * pi * static_cast<double>(k) / n;
    const double s = std::sin(t);
    const double den = 1.0 + s * s;
    pts.push_back({a * std::cos(t) / den, a * s * std::cos(t) / den});
  }
  return pts;
}

std::vector<Point> star(double outer, double rounding) {
  const double inner = outer * std::cos(2.0 * pi / 5.0) / std::cos(pi / 5.0);
  std::vector<Point> v;
  for (int k = 0; k < 10; ++k) {
    const double r = k % 2 == 0 ? outer : inner;
    const double a = pi / 2.0 + k * pi / 5.0;
    v.push_back({r * std::cos(a), r * std::sin(a)});
  }
  return rounded(v, rounding, true);
}

}  // namespace

Path::Path(std::vector<Point> points, bool closed) : closed_(closed) {
  points_ = densify(points, closed);
  if (points_.size() < 2) {
    throw InvalidArgument("path needs at least two distinct waypoints");
  }
  arc_.assign(points_.size(), 0.0);
  for (std::size_t i = 1; i < points_.size(); ++i) {
    arc_[i] = arc_[i - 1] + distance(points_[i - 1], points_[i]);
  }
  length_ =
      arc_.back() + (closed_ ? distance(points_.back(), points_.front()) : 0.0);
}

std::size_t Path::segment_count() const {
  return closed_ ? points_.size() : points_.size() - 1;
}

Point Path::segment_end(std::size_t i) const {
  return points_[(i + 1) % points_.size()];
}

double Path::wrap_arc(double s) const {
  if (closed_) {
    s = std::fmod(s, length_);
    if (s < 0) s += length_;
    return s;
  }
  return std::clamp(s, 0.0, length_);
}

std::size_t Path::segment_at(double s) const {
  const auto it = std::upper_bound(arc_.begin(), arc_.end(), s);
  const std::size_t i = static_cast<std::size_t>(it - arc_.begin()) - 1;
  return std::min(i, segment_count() - 1);
}

Point Path::point_at(double s) const {
  s = wrap_arc(s);
  const std::size_t i = segment_at(s);
  const Point& a = points_[i];
  const Point b = segment_end(i);
  const double len = distance(a, b);
  const double f = std::clamp((s - arc_[i]) / len, 0.0, 1.0);
  return {a.x + f * (b.x - a.x), a.y + f * (b.y - a.y)};
}

Point Path::tangent_at(double s) const {
  const std::size_t i = segment_at(wrap_arc(s));
  const Point& a = points_[i];
  const Point b = segment_end(i);
  const double len = distance(a, b);
  return {(b.x - a.x) / len, (b.y - a.y) / len};
}

double Path::nearest_arc(const Point& p, std::optional<double> hint,
                         double back, double ahead) const {
  double best_s = 0.0;
  double best_d = INFINITY;
  bool found = false;
  for (int pass = 0; pass < 2 && !found; ++pass) {
    const bool restrict = hint.has_value() && pass == 0;
    for (std::size_t i = 0; i < segment_count(); ++i) {
      const Point& a = points_[i];
      const Point b = segment_end(i);
      const double dx = b.x - a.x, dy = b.y - a.y;
      const double len2 = dx * dx + dy * dy;
      const double t =
          std::clamp(((p.x - a.x) * dx + (p.y - a.y) * dy) / len2, 0.0, 1.0);
      const double s = arc_[i] + t * std::sqrt(len2);
      if (restrict) {
        double ds = s - *hint;
        if (closed_) ds = std::remainder(ds, length_);
        if (ds < -back || ds > ahead) continue;
      }
      const double d = std::hypot(a.x + t * dx - p.x, a.y + t * dy - p.y);
      if (d < best_d) {
        best_d = d;
        best_s = s;
        found = true;
      }
    }
  }
  return wrap_arc(best_s);
}

env::RobotState Path::start_state(std::size_t joints) const {
  env::RobotState s(joints);
  s.x = points_[0].x;
  s.y = points_[0].y;
  const Point t = tangent_at(0.0);
  s.heading = std::atan2(t.y, t.x);
  return s;
}

nlohmann::json Path::to_json() const {
  nlohmann::json pts = nlohmann::json::array();
  for (const Point& p : points_) pts.push_back({p.x, p.y});
  return {{"closed", closed_}, {"length", length_}, {"points", pts}};
}

PathKind path_kind_from_name(const std::string& name) {
  if (name == "oblong") return PathKind::kOblong;
  if (name == "lemniscate") return PathKind::kLemniscate;
  if (name == "u_shape") return PathKind::kUShape;
  if (name == "star") return PathKind::kStar;
  throw InvalidArgument("unknown path kind '" + name +
                        "' (expected oblong, lemniscate, u_shape or star)");
}

std::string path_kind_name(PathKind kind) {
  switch (kind) {
    case PathKind::kOblong:
      return "oblong";
    case PathKind::kLemniscate:
      return "lemniscate";
    case PathKind::kUShape:
      return "u_shape";
    case PathKind::kStar:
      return "star";
  }
  return "unknown";
}

Path make_path(PathKind kind, double scale) {
  if (!(scale > 0.0) || !std::isfinite(scale)) {
    throw InvalidArgument("path scale must be positive");
  }
  std::vector<Point> pts;
  bool closed = true;
  switch (kind) {
    case PathKind::kOblong:
      pts = rounded({{-2.5, -1}, {2.5, -1}, {2.5, 1}, {-2.5, 1}}, 1.0, true);
      break;
    case PathKind::kLemniscate:
      pts = lemniscate(2.0);
      break;
    case PathKind::kUShape:
      pts = rounded({{0, 3.5}, {0, 0}, {4, 0}, {4, 3.5}}, 0.5, false);
      closed = false;
      break;
    case PathKind::kStar:
      pts = star(2.0, 0.2);
      break;
  }
  for (Point& p : pts) {
    p.x *= scale;
    p.y *= scale;
  }
  if (closed) pts = normalize_loop(densify(pts, true));
  return Path(std::move(pts), closed);
}

void PursuitConfig::validate() const {
  if (!(lookahead > kMaxSpacing)) {
    throw InvalidArgument("pursuit lookahead must exceed the waypoint spacing");
  }
  if (!(speed >= 0.0 && speed <= 1.5)) {
    throw InvalidArgument("pursuit speed must lie in [0, 1.5] m/s");
  }
  if (!(omega_limit > 0.0)) {
    throw InvalidArgument("pursuit omega limit must be positive");
  }
}

PursuitResult pure_pursuit(double x, double y, double heading, const Path& path,
                           const PursuitConfig& config,
                           std::optional<double> hint) {
  PursuitResult out;
  out.progress = path.nearest_arc({x, y}, hint);
  if (!path.closed() &&
      path.length() - out.progress < config.finish_tolerance) {
    out.complete = true;
    return out;
  }
  const Point target = path.point_at(out.progress + config.lookahead);
  const double dx = target.x - x;
  const double dy = target.y - y;
  const double c = std::cos(heading), s = std::sin(heading);
  const double yl = -s * dx + c * dy;
  const double kappa = 2.0 * yl / (config.lookahead * config.lookahead);
  out.command.v = config.speed;
  out.command.omega =
      std::clamp(kappa * config.speed, -config.omega_limit, config.omega_limit);
  return out;
}

env::Command PursuitTracker::command(const env::RobotState& state) {
  if (complete_) return {};
  const PursuitResult r = pure_pursuit(state.x, state.y, state.heading, *path_,
                                       config_, progress_hint_);
  progress_hint_ = r.progress;
  progress_ = r.progress;
  complete_ = r.complete;
  return r.command;
}

TrackingMetrics tracking_metrics(const std::vector<env::RobotState>& states,
                                 const std::vector<env::Command>& commands,
                                 const Path& path, double target_speed,
                                 double dt) {
  if (states.size() != commands.size()) {
    throw InvalidArgument("metrics need one command per state, got " +
                          std::to_string(states.size()) + " states and " +
                          std::to_string(commands.size()) + " commands");
  }
  if (states.empty())
    throw InvalidArgument("metrics need a nonempty trajectory");
  TrackingMetrics m;
  for (std::size_t i = 0; i < states.size(); ++i) {
    const env::RobotState& s = states[i];
    m.e_v += std::fabs(commands[i].v - s.vx);
    m.e_omega += std::fabs(commands[i].omega - s.yaw_rate);
    const Point ref =
        path.point_at(target_speed * static_cast<double>(i + 1) * dt);
    m.e_p += std::hypot(s.x - ref.x, s.y - ref.y);
  }
  const double n = static_cast<double>(states.size());
  m.e_v /= n;
  m.e_omega /= n;
  m.e_p /= n;
  return m;
}

}  // namespace wmp::path
