#pragma once

// Deterministic fixed-step simulation of one trial: the robot driven by a
// policy under velocity/acceleration caps, one pedestrian driven by a script
// (or live input), contact detection and full tick logging.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <memory>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "socnav/agent.hpp"
#include "socnav/policy.hpp"
#include "socnav/scenario.hpp"

namespace socnav::sim {

struct KinematicLimits {
  double v_max = 0.3;
  double a_max = 0.3;
};

/// Advances the robot one step. The velocity change is capped at a_max * dt in
/// norm and the speed at v_max; the heading follows the velocity when moving.
inline AgentState step(const AgentState& s, Vec2 commanded, double dt, const KinematicLimits& limits) {
  if (!commanded.finite()) throw std::invalid_argument("step: non-finite velocity command");
  if (!(dt > 0)) throw std::invalid_argument("step: dt must be > 0");
  if (!(limits.v_max > 0) || !(limits.a_max > 0)) throw std::invalid_argument("step: limits must be > 0");
  const Vec2 target = clamp_norm(commanded, limits.v_max);
  const Vec2 dv = clamp_norm(target - s.velocity, limits.a_max * dt);
  const Vec2 v = clamp_norm(s.velocity + dv, limits.v_max);
  AgentState out;
  out.velocity = v;
  out.speed = v.norm();
  out.position = s.position + v * dt;
  out.heading = out.speed > 1e-6 ? std::atan2(v.y, v.x) : s.heading;
  return out;
}

struct Radii {
  double r_robot = 0.25;
  double r_human = 0.25;
  bool operator==(const Radii&) const = default;
};

/// Contact iff the centroid distance is strictly below the radius sum.
inline bool detect_contact(const AgentState& robot, const AgentState& human, const Radii& radii) {
  if (!(radii.r_robot > 0) || !(radii.r_human > 0)) throw std::invalid_argument("detect_contact: radii must be > 0");
  return distance(robot.position, human.position) < radii.r_robot + radii.r_human;
}

/// Body clearance between robot and person: centroid distance minus both radii.
inline double clearance(Point2D robot, Point2D human, double r_robot, double r_human) {
  return distance(robot, human) - r_robot - r_human;
}

struct PedestrianMode {
  enum class Kind { oblivious, reactive, live };
  Kind kind = Kind::oblivious;
  double avoidance_gain = 0.8;  // reactive only, fraction of script speed

  static PedestrianMode oblivious() { return {Kind::oblivious, 0.8}; }
  static PedestrianMode reactive(double gain = 0.8) { return {Kind::reactive, gain}; }
  static PedestrianMode live() { return {Kind::live, 0.8}; }
};

inline std::string to_string(PedestrianMode::Kind k) {
  switch (k) {
    case PedestrianMode::Kind::oblivious: return "oblivious";
    case PedestrianMode::Kind::reactive: return "reactive";
    case PedestrianMode::Kind::live: return "live";
  }
  return "oblivious";
}

inline PedestrianMode parse_ped_mode(const std::string& s) {
  if (s == "oblivious") return PedestrianMode::oblivious();
  if (s == "reactive") return PedestrianMode::reactive();
  if (s == "live") return PedestrianMode::live();
  throw ValidationError("ped_mode", "unknown pedestrian mode '" + s + "'");
}

inline constexpr double kArrivalTolerance = 0.05;       // pedestrian waypoint arrival, m
inline constexpr double kRobotArrivalTolerance = 0.1;   // robot waypoint arrival, m
inline constexpr double kLiveCartonRadius = 0.3;        // live pick/drop trigger, m
inline constexpr double kStaleInputAge = 0.5;           // s

/// Where the scripted pedestrian is in its task.
struct PedestrianProgress {
  std::size_t next = 0;           // index of the step being walked to
  double pause_left = 0.0;        // remaining pause at the current waypoint
  bool pausing = false;
  bool done = false;
};

struct PedestrianOutcome {
  Vec2 velocity;
  CartonEvent event = CartonEvent::none;
};

/// Scripted pedestrian command for one tick. Heads for the current waypoint
/// at script speed (never overshooting it), holds still while pausing, and in
/// reactive mode sidesteps a robot ahead closer than `d_social` (clearance),
/// keeping the total at or below script speed, and waits while the robot
/// occupies the waypoint.
inline PedestrianOutcome pedestrian_command(const AgentScript& script, PedestrianProgress& progress,
                                            const AgentState& self, const PedestrianMode& mode,
                                            const AgentState* robot, double dt, double d_social,
                                            const Radii& radii = {}) {
  PedestrianOutcome out;
  if (progress.done || script.steps.empty()) return out;
  if (progress.pausing) {
    progress.pause_left -= dt;
    if (progress.pause_left > 1e-9) return out;
    progress.pausing = false;
    out.event = script.steps[progress.next].event;
    if (++progress.next >= script.steps.size()) progress.done = true;
    return out;
  }
  const ScriptStep& target = script.steps[progress.next];
  const Vec2 to = target.point - self.position;
  const double d = to.norm();
  if (d <= kArrivalTolerance) {
    if (target.pause > 0) {
      progress.pausing = true;
      progress.pause_left = target.pause;
      return out;
    }
    out.event = target.event;
    if (++progress.next >= script.steps.size()) progress.done = true;
    return out;
  }
  Vec2 v = to * (std::min(script.speed, d / dt) / d);
  if (mode.kind == PedestrianMode::Kind::reactive && robot != nullptr) {
    // Sidestep: push perpendicular to the walking direction, away from a
    // robot ahead. Pushing straight back would stall the walker whenever
    // the robot waits near its waypoint.
    const Vec2 dir = to / d;
    const Vec2 rel = robot->position - self.position;
    const double gap = rel.norm() - radii.r_robot - radii.r_human;
    // Yield: a robot standing on the waypoint is waited out at social
    // distance, backing off if already closer.
    if (gap < d_social && distance(robot->position, target.point) < radii.r_robot) {
      const double n = rel.norm();
      if (n > 1e-9) out.velocity = rel * (-std::min(script.speed, (d_social - gap) / dt) / n);
      return out;
    }
    // Within reach of the station the walker heads straight in; a sideways
    // push there would overshoot the arrival tolerance every tick.
    const bool at_station = d < radii.r_robot + radii.r_human;
    if (gap < d_social && rel.dot(dir) > 0 && !at_station) {
      Vec2 side{dir.y, -dir.x};  // right-hand side
      if (side.dot(rel) > 0) side = side * -1.0;
      const double strength = mode.avoidance_gain * script.speed * std::clamp(1.0 - gap / d_social, 0.0, 1.0);
      v = clamp_norm(v + side * strength, script.speed);
    }
  }
  out.velocity = v;
  return out;
}

/// One externally supplied steering command, applied from tick `tick` on.
struct LiveInput {
  std::uint64_t tick = 0;
  Vec2 velocity;
  bool operator==(const LiveInput&) const = default;
};

using InputTrace = std::vector<LiveInput>;

struct Sample {
  double t = 0.0;
  AgentState robot;
  std::vector<AgentState> humans;
  CartonEvent carton_event = CartonEvent::none;

  bool operator==(const Sample&) const = default;
};

struct TrialLog {
  std::string method;
  std::string layout;
  std::string ped_mode;
  std::uint64_t seed = 0;
  std::string config_hash;
  double dt = 0.1;
  Radii radii{};
  bool has_robot = true;
  std::vector<Sample> samples;
  int collision_count = 0;
  bool completed = false;
  double robot_task_time = 0.0;
  std::optional<double> human_task_time;  // measured from the pedestrian's departure
  double human_start_time = 0.0;
  double robot_path_length = 0.0;
  std::optional<double> min_human_distance;  // body clearance

  bool operator==(const TrialLog&) const = default;
  std::size_t human_count() const { return samples.empty() ? 0 : samples.front().humans.size(); }
};

/// FNV-1a over the canonical JSON form of the scenario.
inline std::string config_hash(const ScenarioConfig& cfg) {
  const std::string text = to_json(cfg).dump();
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

/// Pedestrian departure delay drawn from the trial seed, uniform in [0, max_start_delay).
inline double start_delay(std::uint64_t seed, double max_start_delay) {
  std::mt19937_64 rng(seed ^ 0x5eed5eedULL);
  const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  return u * max_start_delay;
}

struct TrialSetup {
  bool with_robot = true;
  bool with_human = true;
  PedestrianMode ped_mode = PedestrianMode::oblivious();
};

/// Tick-by-tick trial. Batch runs and live sessions drive the same object, so
/// a recorded input trace replays into an identical log.
class TrialRunner {
 public:
  TrialRunner(const ScenarioConfig& cfg, const MethodId& method, const TrialSetup& setup, std::uint64_t seed,
              const PolicyRegistry& registry = {})
      : cfg_(cfg), setup_(setup), robot_script_(robot_script(cfg)), human_script_(human_script(cfg)),
        exit_script_{{{"exit", cfg.waypoints.HS, 0.0, CartonEvent::none}}, cfg.v_human},
        radii_{cfg.r_robot, cfg.r_human} {
    validate(cfg);
    if (setup.with_robot) policy_ = make_policy(method, cfg, registry);
    log_.method = method.str();
    log_.layout = to_string(cfg.layout);
    log_.ped_mode = setup.with_human ? to_string(setup.ped_mode.kind) : "none";
    log_.seed = seed;
    log_.config_hash = config_hash(cfg);
    log_.dt = cfg.control_dt;
    log_.radii = radii_;
    log_.has_robot = setup.with_robot;

    Sample s0;
    s0.t = 0.0;
    if (setup.with_robot) {
      const Vec2 first = robot_script_.steps[1].point - cfg.waypoints.RS;
      robot_ = AgentState::at(cfg.waypoints.RS, std::atan2(first.y, first.x));
      robot_next_ = 1;
    }
    s0.robot = robot_;
    if (setup.with_human) {
      human_ = AgentState::at(cfg.waypoints.HS, 0.0);
      s0.humans.push_back(human_);
      if (setup.ped_mode.kind != PedestrianMode::Kind::live)
        log_.human_start_time = start_delay(seed, cfg.max_start_delay);
      live_cartons_left_ = cfg.cartons;
    }
    log_.samples.push_back(std::move(s0));
    if (setup.with_human) update_distance(log_.samples.back());
  }

  bool done() const { return done_; }
  std::uint64_t ticks() const { return tick_; }
  double time() const { return log_.samples.back().t; }
  const TrialLog& log() const { return log_; }
  const InputTrace& input_trace() const { return trace_; }
  const AgentState& robot() const { return robot_; }
  std::optional<AgentState> human() const {
    if (!setup_.with_human) return std::nullopt;
    return human_;
  }
  bool carrying() const { return live_carrying_; }
  int cartons_left() const { return live_cartons_left_; }
  /// Robot waypoint currently targeted.
  std::size_t robot_step() const { return robot_next_; }

  /// Registers a live steering command; takes effect from the current tick.
  void set_live_input(Vec2 v) {
    live_input_ = clamp_norm(v, cfg_.v_human);
    live_input_time_ = time();
    trace_.push_back({tick_, v});
  }

  /// Advances one control_dt.
  void tick() {
    if (done_) return;
    const double dt = cfg_.control_dt;
    const double t = time();
    Sample next;
    next.t = static_cast<double>(tick_ + 1) * dt;

    // Robot.
    if (setup_.with_robot) {
      Observation obs{t, robot_, {}, robot_script_.steps[robot_next_].point};
      if (setup_.with_human) obs.humans.push_back(human_);
      const Vec2 cmd = policy_->command(obs);
      const AgentState moved = step(robot_, cmd, dt, {cfg_.v_max_robot, cfg_.a_max_robot});
      robot_ = moved;
      robot_.position = keep_inside(moved.position, cfg_.r_robot);
      log_.robot_path_length += distance(log_.samples.back().robot.position, robot_.position);
    }
    next.robot = robot_;

    // Pedestrian.
    if (setup_.with_human) {
      Vec2 v;
      CartonEvent ev = CartonEvent::none;
      if (setup_.ped_mode.kind == PedestrianMode::Kind::live) {
        if (live_input_ && t - live_input_time_ <= kStaleInputAge + 1e-9) v = *live_input_;
        ev = live_carton_event();
      } else if (t + 1e-9 >= log_.human_start_time) {
        // Task finished: leave the shared space by walking back to the start.
        const bool leaving = ped_progress_.done;
        const auto out = pedestrian_command(leaving ? exit_script_ : human_script_, leaving ? exit_progress_ : ped_progress_,
                                            human_, setup_.ped_mode, setup_.with_robot ? &robot_ : nullptr, dt,
                                            cfg_.d_social, radii_);
        v = out.velocity;
        if (!leaving) ev = out.event;
      }
      if (ev == CartonEvent::drop) drops_++;
      next.carton_event = ev;
      human_.velocity = v;
      human_.speed = v.norm();
      if (human_.speed > 1e-6) human_.heading = std::atan2(v.y, v.x);
      human_.position = keep_inside(human_.position + v * dt, cfg_.r_human);
      next.humans.push_back(human_);
      if (!log_.human_task_time && human_finished())
        log_.human_task_time = next.t - log_.human_start_time;
    }

    ++tick_;
    log_.samples.push_back(std::move(next));
    if (setup_.with_human) update_distance(log_.samples.back());

    if (setup_.with_robot) {
      if (distance(robot_.position, robot_script_.steps[robot_next_].point) <= kRobotArrivalTolerance) {
        if (++robot_next_ >= robot_script_.steps.size()) {
          done_ = true;
          log_.completed = true;
          log_.robot_task_time = log_.samples.back().t;
        }
      }
    } else if (!setup_.with_human || log_.human_task_time) {
      done_ = true;
      log_.completed = true;
    }
    if (!done_ && log_.samples.back().t + 1e-9 >= cfg_.timeout) {
      done_ = true;
      log_.completed = false;
      log_.robot_task_time = log_.samples.back().t;
    }
  }

  TrialLog finish() && { return std::move(log_); }

 private:
  bool human_finished() const {
    if (setup_.ped_mode.kind == PedestrianMode::Kind::live) return live_cartons_left_ == 0 && !live_carrying_;
    return drops_ >= cfg_.cartons;
  }

  CartonEvent live_carton_event() {
    const auto& w = cfg_.waypoints;
    if (!live_carrying_ && live_cartons_left_ > 0 && distance(human_.position, w.H2) <= kLiveCartonRadius) {
      live_carrying_ = true;
      return CartonEvent::pick;
    }
    if (live_carrying_ && distance(human_.position, w.H1) <= kLiveCartonRadius) {
      live_carrying_ = false;
      --live_cartons_left_;
      return CartonEvent::drop;
    }
    return CartonEvent::none;
  }

  Point2D keep_inside(Point2D p, double r) const {
    return {std::clamp(p.x, r, cfg_.room_width - r), std::clamp(p.y, r, cfg_.room_length - r)};
  }

  void update_distance(const Sample& s) {
    if (!setup_.with_robot) return;
    bool contact = false;
    for (const auto& h : s.humans) {
      const double gap = clearance(s.robot.position, h.position, radii_.r_robot, radii_.r_human);
      if (!log_.min_human_distance || gap < *log_.min_human_distance) log_.min_human_distance = gap;
      contact = contact || detect_contact(s.robot, h, radii_);
    }
    if (contact && !in_contact_) ++log_.collision_count;
    in_contact_ = contact;
  }

  ScenarioConfig cfg_;
  TrialSetup setup_;
  AgentScript robot_script_;
  AgentScript human_script_;
  AgentScript exit_script_;
  Radii radii_;
  std::unique_ptr<Policy> policy_;
  TrialLog log_;
  AgentState robot_;
  AgentState human_;
  std::size_t robot_next_ = 0;
  PedestrianProgress ped_progress_;
  PedestrianProgress exit_progress_;
  int drops_ = 0;
  bool in_contact_ = false;
  bool done_ = false;
  std::uint64_t tick_ = 0;
  std::optional<Vec2> live_input_;
  double live_input_time_ = 0.0;
  bool live_carrying_ = false;
  int live_cartons_left_ = 0;
  InputTrace trace_;
};

/// Runs a trial to completion. In live mode `inputs` supplies the steering
/// trace (tick index -> command); it is ignored otherwise.
inline TrialLog run_trial(const ScenarioConfig& cfg, const MethodId& method, const PedestrianMode& ped_mode,
                          std::uint64_t seed, const PolicyRegistry& registry = {}, const InputTrace& inputs = {}) {
  if (!registry.registered(method))
    throw ValidationError("method", "no external policy registered as '" + method.name + "'");
  TrialRunner runner(cfg, method, {true, true, ped_mode}, seed, registry);
  std::size_t next_input = 0;
  while (!runner.done()) {
    while (ped_mode.kind == PedestrianMode::Kind::live && next_input < inputs.size() &&
           inputs[next_input].tick <= runner.ticks())
      runner.set_live_input(inputs[next_input++].velocity);
    runner.tick();
  }
  return std::move(runner).finish();
}

/// Human-free run of the robot task; yields T^r and D^r.
inline TrialLog run_baseline(const ScenarioConfig& cfg, const MethodId& method, std::uint64_t seed,
                             const PolicyRegistry& registry = {}) {
  if (!registry.registered(method))
    throw ValidationError("method", "no external policy registered as '" + method.name + "'");
  TrialRunner runner(cfg, method, {true, false, PedestrianMode::oblivious()}, seed, registry);
  while (!runner.done()) runner.tick();
  return std::move(runner).finish();
}

/// Robot-free run of the pedestrian script; its task time is T^h.
inline TrialLog run_human_baseline(const ScenarioConfig& cfg, std::uint64_t seed) {
  TrialRunner runner(cfg, MethodId::mb(), {false, true, PedestrianMode::oblivious()}, seed);
  while (!runner.done()) runner.tick();
  return std::move(runner).finish();
}

}  // namespace socnav::sim
