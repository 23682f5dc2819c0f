#pragma once

// Path tracking: pure pursuit on spatial paths, schedule tracking on timed plans.

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "socnav/agent.hpp"
#include "socnav/grid_search.hpp"

namespace socnav::planning {

struct ControlLimits {
  double v_max = 0.3;
  double a_max = 0.3;
};

struct ControlParams {
  double lookahead = 0.3;          // m, pure-pursuit lookahead distance
  double lookahead_time = 0.5;     // s, schedule lookahead for timed plans
  double goal_tolerance = 0.02;    // m
  double wait_tolerance = 0.1;     // m, how close to a wait cell counts as waiting there
  double replan_threshold = 0.3;   // m
};

struct ControlCommand {
  Vec2 velocity;
  bool replan_needed = false;
};

namespace detail {

struct Projection {
  std::size_t segment = 0;
  Point2D point;
  double distance = std::numeric_limits<double>::infinity();
};

inline Projection project(std::span<const Point2D> path, Point2D p) {
  Projection best;
  if (path.size() == 1) {
    best.point = path[0];
    best.distance = distance(p, path[0]);
    return best;
  }
  for (std::size_t i = 0; i + 1 < path.size(); ++i) {
    const Vec2 seg = path[i + 1] - path[i];
    const double len2 = seg.squared_norm();
    const double u = len2 > 0 ? std::clamp((p - path[i]).dot(seg) / len2, 0.0, 1.0) : 0.0;
    const Point2D q = path[i] + seg * u;
    const double d = distance(p, q);
    if (d < best.distance) best = {i, q, d};
  }
  return best;
}

/// Walks `along` meters from the projection; returns the reached point and the
/// remaining path length after the projection.
inline std::pair<Point2D, double> advance(std::span<const Point2D> path, const Projection& from, double along) {
  double remaining = 0.0;
  Point2D target = path.back();
  bool placed = false;
  Point2D cur = from.point;
  double budget = along;
  for (std::size_t i = from.segment + 1; i < path.size(); ++i) {
    const double len = distance(cur, path[i]);
    remaining += len;
    if (!placed) {
      if (len >= budget && len > 0) {
        target = cur + (path[i] - cur) * (budget / len);
        placed = true;
      } else {
        budget -= len;
      }
    }
    cur = path[i];
  }
  return {target, remaining};
}

}  // namespace detail

/// Pure pursuit toward a lookahead point, slowing so the robot can stop at the
/// end of the path under `a_max`.
inline ControlCommand local_control(std::span<const Point2D> path, const AgentState& robot,
                                    const ControlLimits& limits, const ControlParams& params = {}) {
  if (path.empty()) throw std::invalid_argument("local_control: empty path");
  const auto proj = detail::project(path, robot.position);
  if (proj.distance > params.replan_threshold) return {{}, true};
  const auto [target, remaining] = detail::advance(path, proj, params.lookahead);
  const double to_goal = distance(robot.position, path.back());
  if (to_goal <= params.goal_tolerance) return {};
  const Vec2 dir = target - robot.position;
  const double dn = dir.norm();
  if (dn < 1e-9) return {};
  const double stop_speed = std::sqrt(2.0 * limits.a_max * std::max(remaining, to_goal));
  const double speed = std::min(limits.v_max, stop_speed);
  return {dir * (speed / dn), false};
}

/// Scheduled position of `plan` at `elapsed` seconds, linearly interpolated.
inline Point2D plan_position(const TimedPlan& plan, const Costmap& map, double elapsed) {
  if (plan.states.empty()) throw std::invalid_argument("plan_position: empty plan");
  if (elapsed <= 0 || plan.states.size() == 1) return map.center(plan.states.front().cell);
  const double f = elapsed / plan.tick;
  const auto i = static_cast<std::size_t>(std::floor(f));
  if (i + 1 >= plan.states.size()) return map.center(plan.states.back().cell);
  const double u = f - static_cast<double>(i);
  const Point2D a = map.center(plan.states[i].cell);
  const Point2D b = map.center(plan.states[i + 1].cell);
  return a + (b - a) * u;
}

/// Tracks the schedule of a timed plan. Inside a wait state the command is zero
/// once the robot is at the wait cell; otherwise it heads for the scheduled
/// position `lookahead_time` ahead. `goal` replaces the final cell center.
inline ControlCommand local_control(const TimedPlan& plan, const Costmap& map, double elapsed, Point2D goal,
                                    const AgentState& robot, const ControlLimits& limits,
                                    const ControlParams& params = {}) {
  if (plan.states.empty()) throw std::invalid_argument("local_control: empty plan");
  const Point2D now = plan_position(plan, map, elapsed);
  if (distance(robot.position, now) > params.replan_threshold) return {{}, true};
  const auto i = static_cast<std::size_t>(std::max(0.0, std::floor(elapsed / plan.tick + 1e-9)));
  if (i < plan.states.size() && plan.is_wait(i) &&
      distance(robot.position, map.center(plan.states[i].cell)) <= params.wait_tolerance)
    return {};
  const double ahead = elapsed + params.lookahead_time;
  const bool past_end = ahead / plan.tick >= static_cast<double>(plan.states.size() - 1);
  const Point2D target = past_end ? goal : plan_position(plan, map, ahead);
  const Vec2 dir = target - robot.position;
  const double dn = dir.norm();
  if (dn <= params.goal_tolerance) return {};
  Vec2 v = dir / params.lookahead_time;
  if (past_end) v = dir * (std::min(limits.v_max, std::sqrt(2.0 * limits.a_max * dn)) / dn);
  return {clamp_norm(v, limits.v_max), false};
}

}  // namespace socnav::planning
