#pragma once

// Experiment protocol as data: room, waypoints, agent task scripts, layout
// variants and counterbalanced method orderings.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "socnav/geometry.hpp"

namespace socnav {

enum class Layout { coinciding, perpendicular };

inline std::string to_string(Layout l) {
  return l == Layout::coinciding ? "coinciding" : "perpendicular";
}

inline Layout parse_layout(std::string_view s) {
  if (s == "coinciding") return Layout::coinciding;
  if (s == "perpendicular") return Layout::perpendicular;
  throw ValidationError("layout", "unknown layout '" + std::string(s) + "'");
}

/// Navigation method under test. Anything not built in is an external
/// policy addressed by name.
struct MethodId {
  enum class Kind { MB, SNL, TDP, HH, External };
  Kind kind = Kind::MB;
  std::string name;  // only meaningful for External

  static MethodId mb() { return {Kind::MB, {}}; }
  static MethodId snl() { return {Kind::SNL, {}}; }
  static MethodId tdp() { return {Kind::TDP, {}}; }
  static MethodId hh() { return {Kind::HH, {}}; }
  static MethodId external(std::string n) { return {Kind::External, std::move(n)}; }

  bool operator==(const MethodId&) const = default;
  auto operator<=>(const MethodId& o) const { return str() <=> o.str(); }

  std::string str() const {
    switch (kind) {
      case Kind::MB: return "MB";
      case Kind::SNL: return "SNL";
      case Kind::TDP: return "TDP";
      case Kind::HH: return "HH";
      case Kind::External: return name;
    }
    return name;
  }

  static MethodId parse(std::string_view s) {
    if (s == "MB") return mb();
    if (s == "SNL") return snl();
    if (s == "TDP") return tdp();
    if (s == "HH") return hh();
    if (s.empty()) throw ValidationError("method", "empty method id");
    return external(std::string(s));
  }
};

struct Waypoints {
  Point2D HS{0.5, 0.3};
  Point2D H1{1.25, 1.0};
  Point2D H2{1.25, 3.0};
  Point2D RS{2.2, 3.7};
  Point2D R1{1.25, 3.0};
  Point2D R2{1.25, 1.0};

  bool operator==(const Waypoints&) const = default;
};

struct ScenarioConfig {
  double room_width = 2.5;
  double room_length = 4.0;
  Layout layout = Layout::coinciding;
  Waypoints waypoints{};
  int robot_loops = 4;
  int cartons = 3;
  double v_max_robot = 0.3;
  double a_max_robot = 0.3;
  double v_human = 1.0;
  double pick_drop_pause = 1.5;
  double d_safe = 0.2;
  double d_social = 0.4;
  double control_dt = 0.1;
  std::uint64_t seed = 0;
  // Collision envelope and run bounds.
  double r_robot = 0.25;
  double r_human = 0.25;
  double timeout = 300.0;
  // Upper bound of the seeded pedestrian departure delay.
  double max_start_delay = 6.0;

  bool operator==(const ScenarioConfig&) const = default;
};

enum class CartonEvent { none, pick, drop };

inline std::string to_string(CartonEvent e) {
  switch (e) {
    case CartonEvent::pick: return "pick";
    case CartonEvent::drop: return "drop";
    case CartonEvent::none: break;
  }
  return "";
}

struct ScriptStep {
  std::string label;
  Point2D point;
  double pause = 0.0;  // seconds spent at the waypoint after arrival
  CartonEvent event = CartonEvent::none;

  bool operator==(const ScriptStep&) const = default;
};

struct AgentScript {
  std::vector<ScriptStep> steps;
  double speed = 0.0;

  std::size_t count_visits(std::string_view label) const {
    std::size_t n = 0;
    for (const auto& s : steps) n += s.label == label ? 1 : 0;
    return n;
  }
};

namespace detail {

inline Point2D& waypoint_ref(Waypoints& w, std::string_view key) {
  if (key == "HS") return w.HS;
  if (key == "H1") return w.H1;
  if (key == "H2") return w.H2;
  if (key == "RS") return w.RS;
  if (key == "R1") return w.R1;
  if (key == "R2") return w.R2;
  throw ValidationError("waypoints." + std::string(key), "unknown waypoint");
}

inline constexpr std::string_view kWaypointNames[] = {"HS", "H1", "H2", "RS", "R1", "R2"};

inline double number_field(const nlohmann::json& j, const std::string& key) {
  if (!j.is_number()) throw ValidationError(key, "expected a number");
  return j.get<double>();
}

inline int count_field(const nlohmann::json& j, const std::string& key) {
  if (!j.is_number_integer()) throw ValidationError(key, "expected an integer");
  return j.get<int>();
}

}  // namespace detail

inline Waypoints default_waypoints(Layout layout) {
  Waypoints w;
  if (layout == Layout::perpendicular) {
    w.R1 = {0.5, 2.0};
    w.R2 = {2.0, 2.0};
  }
  return w;
}

/// Checks every ScenarioConfig invariant; throws ValidationError naming the field.
inline void validate(const ScenarioConfig& c) {
  if (!(c.room_width > 0)) throw ValidationError("room_width", "must be > 0");
  if (!(c.room_length > 0)) throw ValidationError("room_length", "must be > 0");
  Waypoints w = c.waypoints;
  for (auto name : detail::kWaypointNames) {
    const Point2D p = detail::waypoint_ref(w, name);
    if (!p.finite() || p.x < 0 || p.x > c.room_width || p.y < 0 || p.y > c.room_length)
      throw ValidationError("waypoints." + std::string(name), "outside the room");
  }
  if (c.layout == Layout::coinciding) {
    if ((c.waypoints.R1 - c.waypoints.H2).norm() > 1e-9)
      throw ValidationError("waypoints.R1", "coinciding layout requires R1 == H2");
    if ((c.waypoints.R2 - c.waypoints.H1).norm() > 1e-9)
      throw ValidationError("waypoints.R2", "coinciding layout requires R2 == H1");
  }
  if (!(c.d_safe > 0)) throw ValidationError("d_safe", "must be > 0");
  if (!(c.d_safe < c.d_social)) throw ValidationError("d_safe", "d_safe must be < d_social");
  if (!(c.v_max_robot > 0)) throw ValidationError("v_max_robot", "must be > 0");
  if (!(c.a_max_robot > 0)) throw ValidationError("a_max_robot", "must be > 0");
  if (!(c.v_human > 0)) throw ValidationError("v_human", "must be > 0");
  if (!(c.control_dt > 0)) throw ValidationError("control_dt", "must be > 0");
  if (!(c.pick_drop_pause >= 0)) throw ValidationError("pick_drop_pause", "must be >= 0");
  if (c.cartons < 1) throw ValidationError("cartons", "must be >= 1");
  if (c.robot_loops < 1) throw ValidationError("robot_loops", "must be >= 1");
  if (!(c.r_robot > 0)) throw ValidationError("r_robot", "must be > 0");
  if (!(c.r_human > 0)) throw ValidationError("r_human", "must be > 0");
  if (!(c.timeout > 0)) throw ValidationError("timeout", "must be > 0");
  if (!(c.max_start_delay >= 0)) throw ValidationError("max_start_delay", "must be >= 0");
}

/// Merges `overrides` (a JSON object keyed by ScenarioConfig field names) over
/// the layout defaults. Unknown keys are rejected. For the coinciding layout
/// R1/R2 follow H2/H1 unless explicitly overridden (and then must match).
inline ScenarioConfig build_scenario(Layout layout,
                                     const nlohmann::json& overrides = nlohmann::json::object()) {
  using detail::count_field;
  using detail::number_field;
  if (!overrides.is_object()) throw ValidationError("config", "expected an object");

  ScenarioConfig c;
  c.layout = layout;
  if (auto it = overrides.find("layout"); it != overrides.end()) {
    if (!it->is_string()) throw ValidationError("layout", "expected a string");
    c.layout = parse_layout(it->get<std::string>());
  }
  c.waypoints = default_waypoints(c.layout);

  bool r1_set = false;
  bool r2_set = false;
  for (const auto& [key, val] : overrides.items()) {
    if (key == "layout") continue;
    if (key == "room_width") c.room_width = number_field(val, key);
    else if (key == "room_length") c.room_length = number_field(val, key);
    else if (key == "robot_loops") c.robot_loops = count_field(val, key);
    else if (key == "cartons") c.cartons = count_field(val, key);
    else if (key == "v_max_robot") c.v_max_robot = number_field(val, key);
    else if (key == "a_max_robot") c.a_max_robot = number_field(val, key);
    else if (key == "v_human") c.v_human = number_field(val, key);
    else if (key == "pick_drop_pause") c.pick_drop_pause = number_field(val, key);
    else if (key == "d_safe") c.d_safe = number_field(val, key);
    else if (key == "d_social") c.d_social = number_field(val, key);
    else if (key == "control_dt") c.control_dt = number_field(val, key);
    else if (key == "r_robot") c.r_robot = number_field(val, key);
    else if (key == "r_human") c.r_human = number_field(val, key);
    else if (key == "timeout") c.timeout = number_field(val, key);
    else if (key == "max_start_delay") c.max_start_delay = number_field(val, key);
    else if (key == "seed") {
      if (!val.is_number_unsigned() && !(val.is_number_integer() && val.get<long long>() >= 0))
        throw ValidationError("seed", "expected a non-negative integer");
      c.seed = val.get<std::uint64_t>();
    } else if (key == "waypoints") {
      if (!val.is_object()) throw ValidationError("waypoints", "expected an object");
      for (const auto& [wname, wval] : val.items()) {
        const std::string field = "waypoints." + wname;
        Point2D& p = detail::waypoint_ref(c.waypoints, wname);
        if (!wval.is_array() || wval.size() != 2 || !wval[0].is_number() || !wval[1].is_number())
          throw ValidationError(field, "expected [x, y]");
        p = {wval[0].get<double>(), wval[1].get<double>()};
        r1_set |= wname == "R1";
        r2_set |= wname == "R2";
      }
    } else {
      throw ValidationError(key, "unknown configuration key");
    }
  }
  if (c.layout == Layout::coinciding) {
    if (!r1_set) c.waypoints.R1 = c.waypoints.H2;
    if (!r2_set) c.waypoints.R2 = c.waypoints.H1;
  }
  validate(c);
  return c;
}

inline nlohmann::json to_json(const ScenarioConfig& c) {
  nlohmann::json wp = nlohmann::json::object();
  Waypoints w = c.waypoints;
  for (auto name : detail::kWaypointNames) {
    const Point2D p = detail::waypoint_ref(w, name);
    wp[std::string(name)] = {p.x, p.y};
  }
  return {
      {"room_width", c.room_width},     {"room_length", c.room_length},
      {"layout", to_string(c.layout)},  {"waypoints", wp},
      {"robot_loops", c.robot_loops},   {"cartons", c.cartons},
      {"v_max_robot", c.v_max_robot},   {"a_max_robot", c.a_max_robot},
      {"v_human", c.v_human},           {"pick_drop_pause", c.pick_drop_pause},
      {"d_safe", c.d_safe},             {"d_social", c.d_social},
      {"control_dt", c.control_dt},     {"seed", c.seed},
      {"r_robot", c.r_robot},           {"r_human", c.r_human},
      {"timeout", c.timeout},           {"max_start_delay", c.max_start_delay},
  };
}

/// Parses a full scenario document (as written by to_json or by hand).
inline ScenarioConfig scenario_from_json(const nlohmann::json& j) {
  Layout layout = Layout::coinciding;
  if (j.is_object() && j.contains("layout") && j["layout"].is_string())
    layout = parse_layout(j["layout"].get<std::string>());
  return build_scenario(layout, j);
}

/// Pedestrian task: HS -> H1, then H2 (pick) -> H1 (drop) once per carton.
inline AgentScript human_script(const ScenarioConfig& cfg) {
  const auto& w = cfg.waypoints;
  AgentScript s;
  s.speed = cfg.v_human;
  s.steps.push_back({"HS", w.HS, 0.0, CartonEvent::none});
  s.steps.push_back({"H1", w.H1, 0.0, CartonEvent::none});
  for (int i = 0; i < cfg.cartons; ++i) {
    s.steps.push_back({"H2", w.H2, cfg.pick_drop_pause, CartonEvent::pick});
    s.steps.push_back({"H1", w.H1, cfg.pick_drop_pause, CartonEvent::drop});
  }
  return s;
}

/// Robot task: RS -> R1, then R1 <-> R2 `robot_loops` times, ending at R1.
inline AgentScript robot_script(const ScenarioConfig& cfg) {
  const auto& w = cfg.waypoints;
  AgentScript s;
  s.speed = cfg.v_max_robot;
  s.steps.push_back({"RS", w.RS, 0.0, CartonEvent::none});
  s.steps.push_back({"R1", w.R1, 0.0, CartonEvent::none});
  for (int i = 0; i < cfg.robot_loops; ++i) {
    s.steps.push_back({"R2", w.R2, 0.0, CartonEvent::none});
    s.steps.push_back({"R1", w.R1, 0.0, CartonEvent::none});
  }
  return s;
}

using OrderingMatrix = std::vector<std::vector<int>>;

/// Cyclic Latin square: participant row i uses square row (i mod n), whose
/// entries are (i + j) mod n.
inline OrderingMatrix latin_square_order(int n_methods, int n_participants) {
  if (n_methods < 1) throw ValidationError("n_methods", "must be >= 1");
  if (n_participants < 1) throw ValidationError("n_participants", "must be >= 1");
  OrderingMatrix rows(static_cast<std::size_t>(n_participants));
  for (int i = 0; i < n_participants; ++i) {
    const int r = i % n_methods;
    auto& row = rows[static_cast<std::size_t>(i)];
    row.reserve(static_cast<std::size_t>(n_methods));
    for (int j = 0; j < n_methods; ++j) row.push_back((r + j) % n_methods);
  }
  return rows;
}

}  // namespace socnav
