#pragma once

// Occupancy-cost grid over the room plus the layers the planners stack on it:
// wall inflation, lethal human discs and the proxemic Gaussian social layer.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "socnav/agent.hpp"
#include "socnav/geometry.hpp"
#include "socnav/scenario.hpp"

namespace socnav::planning {

inline constexpr std::uint8_t kFreeCost = 0;
inline constexpr std::uint8_t kInscribedCost = 253;
inline constexpr std::uint8_t kMaxNonLethalCost = 254;
inline constexpr std::uint8_t kLethalCost = 255;

struct Cell {
  int x = 0;
  int y = 0;
  bool operator==(const Cell&) const = default;
};

struct Costmap {
  double resolution = 0.05;  // meters per cell
  int width = 0;
  int height = 0;
  Point2D origin;  // world coordinates of the lower-left corner
  std::vector<std::uint8_t> cost;

  Costmap() = default;
  Costmap(int w, int h, double res, Point2D org = {}, std::uint8_t fill = kFreeCost)
      : resolution(res), width(w), height(h), origin(org),
        cost(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), fill) {}

  bool operator==(const Costmap&) const = default;

  bool contains(Cell c) const { return c.x >= 0 && c.y >= 0 && c.x < width && c.y < height; }
  std::size_t index(Cell c) const {
    return static_cast<std::size_t>(c.y) * static_cast<std::size_t>(width) +
           static_cast<std::size_t>(c.x);
  }
  Cell cell_of(std::size_t idx) const {
    return {static_cast<int>(idx % static_cast<std::size_t>(width)),
            static_cast<int>(idx / static_cast<std::size_t>(width))};
  }
  std::uint8_t at(Cell c) const { return cost[index(c)]; }
  std::uint8_t& at(Cell c) { return cost[index(c)]; }
  bool lethal(Cell c) const { return !contains(c) || at(c) == kLethalCost; }

  Point2D center(Cell c) const {
    return {origin.x + (c.x + 0.5) * resolution, origin.y + (c.y + 0.5) * resolution};
  }
  /// Cell containing `p`; may lie outside the map.
  Cell cell_at(Point2D p) const {
    return {static_cast<int>(std::floor((p.x - origin.x) / resolution + 1e-9)),
            static_cast<int>(std::floor((p.y - origin.y) / resolution + 1e-9))};
  }
  /// Nearest in-map cell to `p`.
  Cell clamp_cell(Point2D p) const {
    Cell c = cell_at(p);
    c.x = std::clamp(c.x, 0, width - 1);
    c.y = std::clamp(c.y, 0, height - 1);
    return c;
  }

  /// FNV-1a over dimensions and cells; used to verify layers never mutate inputs.
  std::uint64_t hash() const {
    std::uint64_t h = 1469598103934665603ULL;
    auto mix = [&h](std::uint64_t v) {
      for (int i = 0; i < 8; ++i) {
        h ^= (v >> (8 * i)) & 0xffU;
        h *= 1099511628211ULL;
      }
    };
    mix(static_cast<std::uint64_t>(width));
    mix(static_cast<std::uint64_t>(height));
    for (auto v : cost) mix(v);
    return h;
  }
};

/// Wall inflation: lethal while the robot footprint would overlap the wall,
/// then exponential decay `kInscribedCost * exp(-decay * (d - r_robot))` up to
/// `r_robot + band`.
struct InflationParams {
  double decay = 10.0;  // 1/m
  double band = 0.5;    // m beyond the lethal radius
};

inline std::uint8_t inflation_cost(double wall_distance, double r_robot,
                                   const InflationParams& p = {}) {
  if (wall_distance < r_robot) return kLethalCost;
  const double beyond = wall_distance - r_robot;
  if (beyond >= p.band) return kFreeCost;
  return static_cast<std::uint8_t>(std::lround(kInscribedCost * std::exp(-p.decay * beyond)));
}

inline Costmap build_static_costmap(const ScenarioConfig& cfg, double resolution,
                                    const InflationParams& inflation = {}) {
  if (!(resolution > 0)) throw ValidationError("resolution", "must be > 0");
  const int w = static_cast<int>(std::lround(cfg.room_width / resolution));
  const int h = static_cast<int>(std::lround(cfg.room_length / resolution));
  if (w < 1 || h < 1) throw ValidationError("resolution", "larger than the room");
  Costmap map(w, h, resolution);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const Point2D c = map.center({x, y});
      const double d = std::min({c.x, cfg.room_width - c.x, c.y, cfg.room_length - c.y});
      map.at({x, y}) = inflation_cost(d, cfg.r_robot, inflation);
    }
  }
  return map;
}

/// Marks every cell whose center lies strictly within `radius` of `center` as lethal.
inline void stamp_lethal_disc(Costmap& map, Point2D center, double radius) {
  const Cell lo = map.clamp_cell(center - Vec2{radius, radius});
  const Cell hi = map.clamp_cell(center + Vec2{radius, radius});
  for (int y = lo.y; y <= hi.y; ++y)
    for (int x = lo.x; x <= hi.x; ++x)
      if (distance(map.center({x, y}), center) < radius) map.at({x, y}) = kLethalCost;
}

struct SocialLayerParams {
  double amplitude = 200.0;
  double sigma_base = 0.2;                // m
  double velocity_elongation_gain = 1.0;  // s
  double cutoff_radius = 1.2;             // m
};

inline void validate(const SocialLayerParams& p) {
  if (!(p.amplitude > 0 && p.amplitude <= 254))
    throw ValidationError("amplitude", "must be in (0, 254]");
  if (!(p.sigma_base > 0)) throw ValidationError("sigma_base", "must be > 0");
  if (!(p.cutoff_radius >= p.sigma_base))
    throw ValidationError("cutoff_radius", "must be >= sigma_base");
  if (!(p.velocity_elongation_gain >= 0))
    throw ValidationError("velocity_elongation_gain", "must be >= 0");
}

/// Unquantized social cost added at `p` by a person in `human` state. In front
/// of a moving person the Gaussian stretches to sigma_base * (1 + gain * speed);
/// sideways and behind it keeps sigma_base.
inline double social_cost(Point2D p, const AgentState& human, const SocialLayerParams& params) {
  const Vec2 d = p - human.position;
  const double r2 = d.squared_norm();
  if (r2 > params.cutoff_radius * params.cutoff_radius) return 0.0;
  const double sigma_s = params.sigma_base;
  double front = 0.0;
  double side = std::sqrt(r2);
  double sigma_f = sigma_s;
  if (human.speed > 1e-6) {
    const Vec2 dir = human.velocity / human.speed;
    front = d.dot(dir);
    side = dir.cross(d);
    if (front > 0) sigma_f = sigma_s * (1.0 + params.velocity_elongation_gain * human.speed);
  }
  const double e = front * front / (2 * sigma_f * sigma_f) + side * side / (2 * sigma_s * sigma_s);
  return params.amplitude * std::exp(-e);
}

/// Adds one person's social Gaussian in place. Lethal cells stay lethal and
/// everything else saturates at kMaxNonLethalCost.
inline void add_social_layer(Costmap& map, const AgentState& human, const SocialLayerParams& params) {
  const double r = params.cutoff_radius;
  const Cell lo = map.clamp_cell(human.position - Vec2{r, r});
  const Cell hi = map.clamp_cell(human.position + Vec2{r, r});
  for (int y = lo.y; y <= hi.y; ++y) {
    for (int x = lo.x; x <= hi.x; ++x) {
      std::uint8_t& c = map.at({x, y});
      if (c == kLethalCost) continue;
      const long add = std::lround(social_cost(map.center({x, y}), human, params));
      c = static_cast<std::uint8_t>(std::min<long>(kMaxNonLethalCost, c + add));
    }
  }
}

/// Pure variant: returns `base` with the social layer of `human` applied.
inline Costmap apply_social_layer(const Costmap& base, const AgentState& human,
                                  const SocialLayerParams& params) {
  validate(params);
  Costmap out = base;
  add_social_layer(out, human, params);
  return out;
}

}  // namespace socnav::planning
