#pragma once

#include "socnav/geometry.hpp"

namespace socnav {

/// Kinematic state of one agent. `speed` is always |velocity|.
struct AgentState {
  Point2D position;
  double heading = 0.0;  // radians, (-pi, pi]
  double speed = 0.0;
  Vec2 velocity;

  bool operator==(const AgentState&) const = default;

  static AgentState at(Point2D p, double heading = 0.0) { return {p, heading, 0.0, {}}; }
  static AgentState moving(Point2D p, Vec2 v) {
    return {p, v.norm() > 1e-6 ? std::atan2(v.y, v.x) : 0.0, v.norm(), v};
  }
};

}  // namespace socnav
