#pragma once

// Navigation policies behind one tick interface: MB (plain costmap planning),
// SNL (social Gaussian layer), TDP (time-dependent planning with
// constant-velocity prediction), HH (scripted walker) and external plug-ins.

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "socnav/control.hpp"
#include "socnav/costmap.hpp"
#include "socnav/grid_search.hpp"
#include "socnav/scenario.hpp"
#include "socnav/wire.hpp"

namespace socnav {

struct Observation {
  double t = 0.0;
  AgentState robot;
  std::vector<AgentState> humans;
  Point2D goal;
};

/// One instance per trial. Implementations must be deterministic.
class Policy {
 public:
  virtual ~Policy() = default;
  /// Desired robot velocity for this tick.
  virtual Vec2 command(const Observation& obs) = 0;
  virtual std::string name() const = 0;
};

struct PlannerParams {
  double resolution = 0.05;    // m/cell
  double cost_weight = 10.0;
  double replan_period = 0.5;  // s (2 Hz)
  planning::SocialLayerParams social{};
  planning::ControlParams control{};
  double tdp_layer_dt = 0.5;
  double tdp_horizon = 5.0;
  double hh_stop_margin = 0.15;  // m beyond contact where HH halts for a person ahead
};

namespace detail {

/// Shared replanning loop for the costmap planners.
class CostmapPolicyBase : public Policy {
 public:
  CostmapPolicyBase(const ScenarioConfig& cfg, const PlannerParams& params)
      : cfg_(cfg), params_(params), static_map_(planning::build_static_costmap(cfg, params.resolution)),
        limits_{cfg.v_max_robot, cfg.a_max_robot} {}

  Vec2 command(const Observation& obs) override {
    const bool goal_changed = !last_goal_ || !(*last_goal_ == obs.goal);
    if (!goal_changed && has_plan() && obs.t + 1e-9 < next_replan_) {
      const auto cmd = track(obs);
      if (!cmd.replan_needed) return cmd.velocity;
    }
    last_goal_ = obs.goal;
    next_replan_ = obs.t + params_.replan_period;
    replan(obs);
    if (!has_plan()) return {};
    const auto cmd = track(obs);
    return cmd.replan_needed ? Vec2{} : cmd.velocity;
  }

 protected:
  virtual bool has_plan() const = 0;
  virtual void replan(const Observation& obs) = 0;
  virtual planning::ControlCommand track(const Observation& obs) const = 0;

  double human_lethal_radius() const { return cfg_.r_human + cfg_.r_robot; }

  ScenarioConfig cfg_;
  PlannerParams params_;
  planning::Costmap static_map_;
  planning::ControlLimits limits_;
  std::optional<Point2D> last_goal_;
  double next_replan_ = 0.0;
};

class GridPolicy final : public CostmapPolicyBase {
 public:
  GridPolicy(const ScenarioConfig& cfg, const PlannerParams& params, bool social)
      : CostmapPolicyBase(cfg, params), social_(social) {}

  std::string name() const override { return social_ ? "SNL" : "MB"; }

  /// Cost map the planner sees for the given humans.
  planning::Costmap working_map(const std::vector<AgentState>& humans) const {
    planning::Costmap map = static_map_;
    for (const auto& h : humans) {
      if (social_) planning::add_social_layer(map, h, params_.social);
      planning::stamp_lethal_disc(map, h.position, human_lethal_radius());
    }
    return map;
  }

 protected:
  bool has_plan() const override { return !path_.empty(); }

  void replan(const Observation& obs) override {
    path_.clear();
    const auto map = working_map(obs.humans);
    try {
      const auto plan = planning::plan_grid(map, obs.robot.position, obs.goal, {params_.cost_weight});
      path_ = plan.points(map);
      path_.back() = obs.goal;
      if (path_.size() == 1) path_.insert(path_.begin(), obs.robot.position);
    } catch (const planning::PlanningError&) {
      // Blocked for now (e.g. a person stands on the goal); hold position.
    }
  }

  planning::ControlCommand track(const Observation& obs) const override {
    return planning::local_control(path_, obs.robot, limits_, params_.control);
  }

 private:
  bool social_;
  std::vector<Point2D> path_;
};

class TimeDependentPolicy final : public CostmapPolicyBase {
 public:
  TimeDependentPolicy(const ScenarioConfig& cfg, const PlannerParams& params)
      : CostmapPolicyBase(cfg, params) {
    prediction_.layer_dt = params.tdp_layer_dt;
    prediction_.horizon = params.tdp_horizon;
    prediction_.v_max = cfg.v_max_robot;
    prediction_.lethal_radius = human_lethal_radius();
    prediction_.social = params.social;
    prediction_.search.cost_weight = params.cost_weight;
    ticks_per_layer_ = planning::ticks_per_layer(params.resolution, prediction_);
  }

  std::string name() const override { return "TDP"; }

 protected:
  bool has_plan() const override { return plan_.has_value(); }

  void replan(const Observation& obs) override {
    plan_.reset();
    const auto layers = planning::predict_layers(static_map_, obs.humans, prediction_);
    try {
      plan_ = planning::plan_time_expanded(layers, ticks_per_layer_, prediction_.layer_dt / ticks_per_layer_,
                                           static_map_.cell_at(obs.robot.position),
                                           static_map_.cell_at(obs.goal), prediction_.search);
      plan_start_ = obs.t;
    } catch (const planning::PlanningError&) {
    }
  }

  planning::ControlCommand track(const Observation& obs) const override {
    return planning::local_control(*plan_, static_map_, obs.t - plan_start_, obs.goal, obs.robot, limits_,
                                   params_.control);
  }

 private:
  planning::PredictionParams prediction_;
  int ticks_per_layer_ = 1;
  std::optional<planning::TimedPlan> plan_;
  double plan_start_ = 0.0;
};

/// A person doing the robot's task: walks straight at v_human, halting when
/// someone stands in front within contact distance plus a margin.
class HumanWalkerPolicy final : public Policy {
 public:
  HumanWalkerPolicy(const ScenarioConfig& cfg, const PlannerParams& params)
      : speed_(cfg.v_human), a_max_(cfg.a_max_robot),
        stop_distance_(cfg.r_robot + cfg.r_human + params.hh_stop_margin) {}

  std::string name() const override { return "HH"; }
  double speed() const { return speed_; }

  Vec2 command(const Observation& obs) override {
    const Vec2 to_goal = obs.goal - obs.robot.position;
    const double d = to_goal.norm();
    if (d < 1e-3) return {};
    const Vec2 dir = to_goal / d;
    for (const auto& h : obs.humans) {
      const Vec2 rel = h.position - obs.robot.position;
      if (rel.norm() < stop_distance_ && rel.dot(dir) > 0) return {};
    }
    // Full walking speed until the approach ramp toward the waypoint.
    return dir * std::min(speed_, std::sqrt(2.0 * a_max_ * d));
  }

 private:
  double speed_;
  double a_max_;
  double stop_distance_;
};

}  // namespace detail

/// Transport for an external policy: observation message in, input message out.
using JsonTransport = std::function<nlohmann::json(const nlohmann::json&)>;

/// Adapter speaking the wire schema: each tick sends a `state` message with
/// {t, robot, humans, goal} and expects an `input` message with {vx, vy}.
class ExternalPolicy final : public Policy {
 public:
  ExternalPolicy(std::string name, JsonTransport transport)
      : name_(std::move(name)), transport_(std::move(transport)) {}

  std::string name() const override { return name_; }

  Vec2 command(const Observation& obs) override {
    nlohmann::json humans = nlohmann::json::array();
    for (const auto& h : obs.humans) humans.push_back(wire::to_json(h));
    wire::WireMessage out{wire::MessageType::state, ++seq_,
                          {{"t", obs.t},
                           {"robot", wire::to_json(obs.robot)},
                           {"humans", humans},
                           {"goal", {{"x", obs.goal.x}, {"y", obs.goal.y}}}}};
    const auto reply = wire::parse_message(transport_(wire::to_json(out)));
    if (reply.type != wire::MessageType::input)
      throw wire::WireError("external policy '" + name_ + "' replied with " + wire::to_string(reply.type));
    return wire::velocity_from_payload(reply.payload);
  }

 private:
  std::string name_;
  JsonTransport transport_;
  std::uint64_t seq_ = 0;
};

using PolicyFactory = std::function<std::unique_ptr<Policy>(const ScenarioConfig&)>;

/// Built-in methods plus named external plug-ins.
class PolicyRegistry {
 public:
  void register_external(const std::string& name, PolicyFactory factory) {
    if (MethodId::parse(name).kind != MethodId::Kind::External)
      throw ValidationError("method", "'" + name + "' is a built-in method name");
    external_[name] = std::move(factory);
  }
  bool registered(const MethodId& m) const {
    return m.kind != MethodId::Kind::External || external_.count(m.name) > 0;
  }

  PlannerParams planner{};

  std::unique_ptr<Policy> make(const MethodId& method, const ScenarioConfig& cfg) const {
    switch (method.kind) {
      case MethodId::Kind::MB: return std::make_unique<detail::GridPolicy>(cfg, planner, false);
      case MethodId::Kind::SNL: return std::make_unique<detail::GridPolicy>(cfg, planner, true);
      case MethodId::Kind::TDP: return std::make_unique<detail::TimeDependentPolicy>(cfg, planner);
      case MethodId::Kind::HH: return std::make_unique<detail::HumanWalkerPolicy>(cfg, planner);
      case MethodId::Kind::External: break;
    }
    const auto it = external_.find(method.name);
    if (it == external_.end())
      throw ValidationError("method", "no external policy registered as '" + method.name + "'");
    return it->second(cfg);
  }

 private:
  std::map<std::string, PolicyFactory> external_;
};

inline std::unique_ptr<Policy> make_policy(const MethodId& method, const ScenarioConfig& cfg,
                                           const PolicyRegistry& registry = {}) {
  return registry.make(method, cfg);
}

}  // namespace socnav
