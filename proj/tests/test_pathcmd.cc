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

#include <cmath>
#include <numbers>

#include "doctest.h"
#include "wmp/common/error.h"
#include "wmp/pathcmd/path.h"

using namespace wmp;
using namespace wmp::path;
using std::numbers::pi;

namespace {

const PathKind kAllKinds[] = {PathKind::kOblong, PathKind::kLemniscate,
                              PathKind::kUShape, PathKind::kStar};

// Fine numerical arc length of the parametric lemniscate.
double lemniscate_length(double a) {
  const int n = 200000;
  double len = 0.0;
  double px = a, py = 0.0;
  for (int k = 1; k <= n; ++k) {
    const double t = 2.0 * pi * k / n;
    const double s = std::sin(t);
    const double den = 1.0 + s * s;
    const double x = a * std::cos(t) / den, y = a * s * std::cos(t) / den;
    len += std::hypot(x - px, y - py);
    px = x;
    py = y;
  }
  return len;
}

// Kinematic unicycle executing each command exactly for one step.
struct UnicycleRun {
  std::vector<env::RobotState> states;
  std::vector<env::Command> commands;
};

UnicycleRun unicycle(const Path& path, const PursuitConfig& cfg,
                     std::size_t steps) {
  UnicycleRun run;
  env::RobotState s = path.start_state();
  PursuitTracker tracker(path, cfg);
  for (std::size_t t = 0; t < steps; ++t) {
    const env::Command c = tracker.command(s);
    s.heading = env::wrap_angle(s.heading + c.omega * env::kDt);
    s.x += c.v * std::cos(s.heading) * env::kDt;
    s.y += c.v * std::sin(s.heading) * env::kDt;
    s.vx = c.v;
    s.yaw_rate = c.omega;
    run.states.push_back(s);
    run.commands.push_back(c);
  }
  return run;
}

}  // namespace

TEST_CASE("path lengths") {
  CHECK(make_path(PathKind::kOblong).length() ==
        doctest::Approx(6.0 + 2.0 * pi).epsilon(1e-4));
  CHECK(make_path(PathKind::kUShape).length() ==
        doctest::Approx(9.0 + 0.5 * pi).epsilon(1e-4));
  CHECK(make_path(PathKind::kLemniscate).length() ==
        doctest::Approx(lemniscate_length(2.0)).epsilon(1e-5));
  // Star: ten straight edges shortened by the fillets plus the arcs.
  const double inner = 2.0 * std::cos(2 * pi / 5) / std::cos(pi / 5);
  const double edge =
      std::hypot(2.0 * std::cos(pi / 2) - inner * std::cos(pi / 2 + pi / 5),
                 2.0 - inner * std::sin(pi / 2 + pi / 5));
  const double tip_turn = pi - pi / 5, valley_turn = 2 * pi / 5;
  const double expected = 10 * edge - 5 * 2 * 0.2 * std::tan(tip_turn / 2) -
                          5 * 2 * 0.2 * std::tan(valley_turn / 2) +
                          5 * 0.2 * tip_turn + 5 * 0.2 * valley_turn;
  CHECK(make_path(PathKind::kStar).length() ==
        doctest::Approx(expected).epsilon(1e-4));
}

TEST_CASE("path structure") {
  for (PathKind kind : kAllKinds) {
    CAPTURE(path_kind_name(kind));
    const Path p = make_path(kind);
    CHECK(p.closed() == (kind != PathKind::kUShape));
    for (std::size_t i = 1; i < p.points().size(); ++i) {
      CHECK(p.arc()[i] > p.arc()[i - 1]);
      CHECK(p.arc()[i] - p.arc()[i - 1] <= kMaxSpacing + 1e-12);
    }
    if (p.closed()) CHECK(p.length() - p.arc().back() <= kMaxSpacing + 1e-12);
    double min_x = INFINITY;
    for (const Point& q : p.points()) min_x = std::min(min_x, q.x);
    CHECK(p.points()[0].x == min_x);
    // Counterclockwise around the leftmost point: heading downwards.
    CHECK(p.tangent_at(0.0).y < 0.0);
    CHECK(path_kind_from_name(path_kind_name(kind)) == kind);
  }
  CHECK_THROWS_AS(path_kind_from_name("circle"), InvalidArgument);
  CHECK_THROWS_AS(make_path(PathKind::kStar, 0.0), InvalidArgument);
}

TEST_CASE("scaling multiplies every arc length") {
  for (PathKind kind : kAllKinds) {
    const Path a = make_path(kind);
    const Path b = make_path(kind, 2.0);
    CHECK(b.length() == doctest::Approx(2.0 * a.length()).epsilon(1e-4));
    CHECK(b.points()[0].x == doctest::Approx(2.0 * a.points()[0].x));
  }
}

TEST_CASE("pure pursuit geometry") {
  const Path line({{0, 0}, {10, 0}}, false);
  PursuitConfig cfg;
  SUBCASE("dead ahead") {
    const PursuitResult r = pure_pursuit(1.0, 0.0, 0.0, line, cfg);
    CHECK(r.command.omega == 0.0);
    CHECK(r.command.v == cfg.speed);
    CHECK_FALSE(r.complete);
  }
  SUBCASE("lookahead point on the body y axis") {
    // A vertical path: from (0, 0) heading along +x the nearest point is the
    // origin and the lookahead point is (0, L).
    const Path up({{0, 0}, {0, 10}}, false);
    cfg.omega_limit = 100.0;
    const PursuitResult r = pure_pursuit(0.0, 0.0, 0.0, up, cfg);
    CHECK(r.command.omega / r.command.v ==
          doctest::Approx(2.0 / cfg.lookahead));
    const Path down({{0, 0}, {0, -10}}, false);
    const PursuitResult m = pure_pursuit(0.0, 0.0, 0.0, down, cfg);
    CHECK(m.command.omega == doctest::Approx(-r.command.omega));
    CHECK(m.command.v == r.command.v);
  }
  SUBCASE("turn rate is clamped") {
    cfg.omega_limit = 0.5;
    const PursuitResult r = pure_pursuit(5.0, 0.0, pi / 2, line, cfg);
    CHECK(std::fabs(r.command.omega) == 0.5);
  }
  SUBCASE("open path completion") {
    const PursuitResult r = pure_pursuit(10.0, 0.2, 0.0, line, cfg);
    CHECK(r.complete);
    CHECK(r.command == env::Command{});
  }
  SUBCASE("closed path wraps") {
    const Path loop = make_path(PathKind::kOblong);
    const Point end = loop.point_at(loop.length() - 0.1);
    const PursuitResult r = pure_pursuit(end.x, end.y, -pi / 2, loop, cfg);
    CHECK_FALSE(r.complete);
    CHECK(r.progress > loop.length() - 0.2);
  }
  CHECK_THROWS_AS((PursuitConfig{.lookahead = 0.01}.validate()),
                  InvalidArgument);
}

TEST_CASE("pure pursuit is continuous along a pose sweep") {
  const Path loop = make_path(PathKind::kOblong);
  PursuitConfig cfg;
  double prev = pure_pursuit(-2.0, -1.2, 0.0, loop, cfg).command.omega;
  for (int k = 1; k <= 400; ++k) {
    const double x = -2.0 + 3.0 * k / 400.0;
    const double w = pure_pursuit(x, -1.2, 0.0, loop, cfg).command.omega;
    CHECK(std::fabs(w - prev) < 0.05);
    prev = w;
  }
}

TEST_CASE("metrics") {
  const Path line({{0, 0}, {20, 0}}, false);
  std::vector<env::RobotState> states;
  std::vector<env::Command> cmds;
  for (int i = 0; i < 100; ++i) {
    env::RobotState s;
    s.x = 0.9 * (i + 1) * env::kDt;
    s.vx = 0.9;
    states.push_back(s);
    cmds.push_back({0.9, 0.0});
  }
  TrackingMetrics m = tracking_metrics(states, cmds, line, 0.9);
  CHECK(m.e_v == 0.0);
  CHECK(m.e_omega == 0.0);
  CHECK(m.e_p < 1e-12);
  for (auto& s : states) s.x -= 0.5;
  CHECK(tracking_metrics(states, cmds, line, 0.9).e_p == doctest::Approx(0.5));
  states.pop_back();
  CHECK_THROWS_AS(tracking_metrics(states, cmds, line, 0.9), InvalidArgument);
}

TEST_CASE("metrics are invariant to a joint rigid motion") {
  const Path loop = make_path(PathKind::kStar);
  const UnicycleRun run = unicycle(loop, {}, 600);
  const TrackingMetrics a =
      tracking_metrics(run.states, run.commands, loop, 0.9);
  const double c = std::cos(0.7), s = std::sin(0.7);
  auto move = [&](Point p) {
    return Point{c * p.x - s * p.y + 3.0, s * p.x + c * p.y - 1.0};
  };
  std::vector<Point> pts;
  for (const Point& p : loop.points()) pts.push_back(move(p));
  const Path moved(pts, true);
  std::vector<env::RobotState> states = run.states;
  for (auto& st : states) {
    const Point q = move({st.x, st.y});
    st.x = q.x;
    st.y = q.y;
    st.heading += 0.7;
  }
  const TrackingMetrics b = tracking_metrics(states, run.commands, moved, 0.9);
  CHECK(b.e_v == a.e_v);
  CHECK(b.e_omega == a.e_omega);
  CHECK(b.e_p == doctest::Approx(a.e_p).epsilon(1e-9));
}

TEST_CASE("kinematic unicycle stays within one lookahead on every path") {
  PursuitConfig cfg;
  for (PathKind kind : kAllKinds) {
    const Path p = make_path(kind);
    const UnicycleRun run = unicycle(p, cfg, 1500);
    const TrackingMetrics m =
        tracking_metrics(run.states, run.commands, p, 0.9);
    MESSAGE(path_kind_name(kind) << " e_p " << m.e_p);
    CHECK(m.e_p < cfg.lookahead);
  }
}

TEST_CASE("path JSON lists every waypoint") {
  const Path p = make_path(PathKind::kUShape);
  const nlohmann::json j = p.to_json();
  CHECK(j["closed"] == false);
  CHECK(j["points"].size() == p.points().size());
}
