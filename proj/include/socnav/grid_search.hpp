#pragma once

// 8-connected A* on a Costmap and its time-expanded variant over predicted
// cost layers (with a wait action).
//
// Edge costs are integers: round(kCostScale * step * (1 + w * c / 255)) where
// step is 1 (cardinal) or sqrt(2) (diagonal) in cells and c is the cost of the
// cell being entered. Lethal cells cannot be entered, and a diagonal move may
// not cut the corner of a lethal cardinal neighbour. The start cell is exempt
// from the lethal check (the robot is already there).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <queue>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include "socnav/costmap.hpp"

namespace socnav::planning {

inline constexpr std::int64_t kCostScale = 1000000;

enum class PlanFailure { unreachable, blocked, horizon_too_short };

inline std::string to_string(PlanFailure f) {
  switch (f) {
    case PlanFailure::unreachable: return "unreachable";
    case PlanFailure::blocked: return "blocked";
    case PlanFailure::horizon_too_short: return "horizon too short";
  }
  return "unknown";
}

class PlanningError : public std::runtime_error {
 public:
  explicit PlanningError(PlanFailure reason, const std::string& detail = {})
      : std::runtime_error(to_string(reason) + (detail.empty() ? "" : ": " + detail)),
        reason_(reason) {}
  PlanFailure reason() const noexcept { return reason_; }

 private:
  PlanFailure reason_;
};

struct SearchParams {
  double cost_weight = 10.0;
};

struct GridPath {
  std::vector<Cell> cells;
  std::int64_t cost = 0;

  /// Polyline through cell centers, in meters.
  std::vector<Point2D> points(const Costmap& map) const {
    std::vector<Point2D> out;
    out.reserve(cells.size());
    for (Cell c : cells) out.push_back(map.center(c));
    return out;
  }
  double length(const Costmap& map) const {
    double len = 0.0;
    for (std::size_t i = 1; i < cells.size(); ++i)
      len += distance(map.center(cells[i - 1]), map.center(cells[i]));
    return len;
  }
};

namespace detail {

struct Move {
  int dx;
  int dy;
  bool diagonal;
};

inline constexpr Move kMoves[8] = {{1, 0, false},  {-1, 0, false}, {0, 1, false},  {0, -1, false},
                                   {1, 1, true},   {1, -1, true},  {-1, 1, true},  {-1, -1, true}};

inline std::int64_t edge_cost(bool diagonal, std::uint8_t cell_cost, double weight) {
  const double step = diagonal ? std::numbers::sqrt2 : 1.0;
  return std::llround(static_cast<double>(kCostScale) * step * (1.0 + weight * cell_cost / 255.0));
}

inline const std::int64_t kCardinalMin = edge_cost(false, 0, 0.0);
inline const std::int64_t kDiagonalMin = edge_cost(true, 0, 0.0);

/// Octile distance at zero cell cost: admissible and consistent for edge_cost.
inline std::int64_t octile(Cell a, Cell b) {
  const std::int64_t dx = std::abs(a.x - b.x);
  const std::int64_t dy = std::abs(a.y - b.y);
  const std::int64_t lo = std::min(dx, dy);
  const std::int64_t hi = std::max(dx, dy);
  return (hi - lo) * kCardinalMin + lo * kDiagonalMin;
}

/// Whether the move from `from` by `m` is legal on `map`.
inline bool can_move(const Costmap& map, Cell from, const Move& m) {
  const Cell to{from.x + m.dx, from.y + m.dy};
  if (map.lethal(to)) return false;
  if (m.diagonal && (map.lethal({from.x + m.dx, from.y}) || map.lethal({from.x, from.y + m.dy})))
    return false;
  return true;
}

// Open-list entry ordered by f, then lower heuristic, then row-major cell.
struct OpenEntry {
  std::int64_t f;
  std::int64_t h;
  std::size_t cell;
  std::size_t state;
  bool operator>(const OpenEntry& o) const {
    return std::tie(f, h, cell, state) > std::tie(o.f, o.h, o.cell, o.state);
  }
};

using OpenList = std::priority_queue<OpenEntry, std::vector<OpenEntry>, std::greater<>>;

}  // namespace detail

/// Optimal 8-connected path from `start` to `goal` under the integer edge cost.
inline GridPath plan_grid(const Costmap& map, Cell start, Cell goal, const SearchParams& params = {}) {
  if (!map.contains(start)) throw PlanningError(PlanFailure::unreachable, "start outside map");
  if (map.lethal(goal)) throw PlanningError(PlanFailure::unreachable, "goal in lethal region");

  constexpr auto kInf = std::numeric_limits<std::int64_t>::max();
  const std::size_t n = map.cost.size();
  std::vector<std::int64_t> g(n, kInf);
  std::vector<std::int64_t> parent(n, -1);
  std::vector<bool> closed(n, false);
  detail::OpenList open;

  const std::size_t s = map.index(start);
  const std::size_t t = map.index(goal);
  g[s] = 0;
  open.push({detail::octile(start, goal), detail::octile(start, goal), s, s});
  while (!open.empty()) {
    const auto top = open.top();
    open.pop();
    if (closed[top.cell]) continue;
    closed[top.cell] = true;
    if (top.cell == t) break;
    const Cell c = map.cell_of(top.cell);
    for (const auto& m : detail::kMoves) {
      if (!detail::can_move(map, c, m)) continue;
      const Cell nb{c.x + m.dx, c.y + m.dy};
      const std::size_t ni = map.index(nb);
      if (closed[ni]) continue;
      const std::int64_t ng = g[top.cell] + detail::edge_cost(m.diagonal, map.at(nb), params.cost_weight);
      if (ng < g[ni]) {
        g[ni] = ng;
        parent[ni] = static_cast<std::int64_t>(top.cell);
        const std::int64_t h = detail::octile(nb, goal);
        open.push({ng + h, h, ni, ni});
      }
    }
  }
  if (g[t] == kInf) throw PlanningError(PlanFailure::unreachable, "no path to goal");

  GridPath path;
  path.cost = g[t];
  for (std::int64_t i = static_cast<std::int64_t>(t); i != -1; i = parent[static_cast<std::size_t>(i)])
    path.cells.push_back(map.cell_of(static_cast<std::size_t>(i)));
  std::reverse(path.cells.begin(), path.cells.end());
  return path;
}

inline GridPath plan_grid(const Costmap& map, Point2D start, Point2D goal, const SearchParams& params = {}) {
  return plan_grid(map, map.cell_at(start), map.cell_at(goal), params);
}

// ---------------------------------------------------------------------------
// Time-expanded search

struct TimedState {
  double t = 0.0;  // seconds since plan start
  Cell cell;
  bool operator==(const TimedState&) const = default;
};

struct TimedPlan {
  std::vector<TimedState> states;  // one per tick
  double tick = 0.0;               // seconds between consecutive states
  double horizon = 0.0;
  std::int64_t cost = 0;

  bool is_wait(std::size_t i) const {
    return i + 1 < states.size() && states[i].cell == states[i + 1].cell;
  }
  std::size_t wait_count() const {
    std::size_t n = 0;
    for (std::size_t i = 0; i + 1 < states.size(); ++i) n += is_wait(i) ? 1 : 0;
    return n;
  }
  /// Spatial projection with consecutive duplicates (waits) removed.
  std::vector<Cell> spatial_cells() const {
    std::vector<Cell> out;
    for (const auto& s : states)
      if (out.empty() || !(out.back() == s.cell)) out.push_back(s.cell);
    return out;
  }
};

struct TimeExpandedParams {
  double cost_weight = 10.0;
  /// Cost of waiting one tick, in cardinal-step units scaled by the cell cost.
  double wait_weight = 1.0;
};

/// Time-expanded A* over states (cell, tick). `layers[k]` is the cost map in
/// force during ticks [k * ticks_per_layer, (k + 1) * ticks_per_layer); the
/// last layer holds forever after. Every edge (move or wait) advances one tick
/// and is checked against the layer of the tick it arrives in.
inline TimedPlan plan_time_expanded(const std::vector<Costmap>& layers, int ticks_per_layer, double tick,
                                    Cell start, Cell goal, const TimeExpandedParams& params = {}) {
  if (layers.empty()) throw std::invalid_argument("plan_time_expanded: no layers");
  if (ticks_per_layer < 1) throw std::invalid_argument("plan_time_expanded: ticks_per_layer < 1");
  const Costmap& last = layers.back();
  for (const auto& l : layers)
    if (l.width != last.width || l.height != last.height)
      throw std::invalid_argument("plan_time_expanded: layer dimensions differ");
  if (!last.contains(start)) throw PlanningError(PlanFailure::blocked, "start outside map");

  const std::size_t n = last.cost.size();
  const std::size_t k_max = (layers.size() - 1) * static_cast<std::size_t>(ticks_per_layer);
  auto layer_of = [&](std::size_t k) -> const Costmap& {
    return layers[std::min(k / static_cast<std::size_t>(ticks_per_layer), layers.size() - 1)];
  };

  constexpr auto kInf = std::numeric_limits<std::int64_t>::max();
  const std::size_t total = (k_max + 1) * n;
  std::vector<std::int64_t> g(total, kInf);
  std::vector<std::int64_t> parent(total, -1);
  std::vector<bool> closed(total, false);
  detail::OpenList open;

  const std::size_t s0 = last.index(start);
  g[s0] = 0;
  const std::int64_t h0 = detail::octile(start, goal);
  open.push({h0, h0, s0, s0});
  std::int64_t found = -1;
  while (!open.empty()) {
    const auto top = open.top();
    open.pop();
    if (closed[top.state]) continue;
    closed[top.state] = true;
    const std::size_t k = top.state / n;
    const Cell c = last.cell_of(top.cell);
    if (c == goal) {
      found = static_cast<std::int64_t>(top.state);
      break;
    }
    const std::size_t nk = std::min(k + 1, k_max);
    const Costmap& next = layer_of(nk);
    auto relax = [&](Cell nb, std::int64_t edge) {
      const std::size_t ci = next.index(nb);
      const std::size_t ns = nk * n + ci;
      if (closed[ns]) return;
      const std::int64_t ng = g[top.state] + edge;
      if (ng < g[ns]) {
        g[ns] = ng;
        parent[ns] = static_cast<std::int64_t>(top.state);
        const std::int64_t h = detail::octile(nb, goal);
        open.push({ng + h, h, ci, ns});
      }
    };
    if (!next.lethal(c)) {
      const auto wait = std::llround(static_cast<double>(kCostScale) * params.wait_weight *
                                     (1.0 + params.cost_weight * next.at(c) / 255.0));
      relax(c, std::max<std::int64_t>(1, wait));
    }
    for (const auto& m : detail::kMoves) {
      if (!detail::can_move(next, c, m)) continue;
      const Cell nb{c.x + m.dx, c.y + m.dy};
      relax(nb, detail::edge_cost(m.diagonal, next.at(nb), params.cost_weight));
    }
  }

  if (found < 0) {
    if (last.lethal(goal)) throw PlanningError(PlanFailure::blocked, "goal lethal in final layer");
    try {
      (void)plan_grid(last, start, goal, {params.cost_weight});
    } catch (const PlanningError&) {
      throw PlanningError(PlanFailure::blocked, "goal disconnected in final layer");
    }
    throw PlanningError(PlanFailure::horizon_too_short, "no time-feasible path");
  }

  TimedPlan plan;
  plan.tick = tick;
  plan.horizon = tick * static_cast<double>(k_max);
  plan.cost = g[static_cast<std::size_t>(found)];
  std::vector<Cell> rev;
  for (std::int64_t i = found; i != -1; i = parent[static_cast<std::size_t>(i)])
    rev.push_back(last.cell_of(static_cast<std::size_t>(i) % n));
  std::reverse(rev.begin(), rev.end());
  plan.states.reserve(rev.size());
  for (std::size_t i = 0; i < rev.size(); ++i) plan.states.push_back({static_cast<double>(i) * tick, rev[i]});
  return plan;
}

/// Parameters of the constant-velocity prediction used by time-dependent planning.
struct PredictionParams {
  double layer_dt = 0.5;  // s
  double horizon = 5.0;   // s
  double v_max = 0.3;     // m/s, robot speed bound per tick
  double lethal_radius = 0.5;  // human footprint inflated by the robot radius
  SocialLayerParams social{};
  TimeExpandedParams search{};
};

/// Number of ticks per layer such that one diagonal step per tick stays within v_max.
inline int ticks_per_layer(double resolution, const PredictionParams& p) {
  const double min_tick = resolution * std::numbers::sqrt2 / p.v_max;
  const int tpl = static_cast<int>(std::floor(p.layer_dt / min_tick + 1e-9));
  if (tpl < 1) throw std::invalid_argument("layer_dt shorter than one diagonal step at v_max");
  return tpl;
}

/// Layer k: `base` plus each human's lethal disc and social Gaussian centered
/// at position + velocity * k * layer_dt. Layers cover [0, horizon].
inline std::vector<Costmap> predict_layers(const Costmap& base, const std::vector<AgentState>& humans,
                                           const PredictionParams& p) {
  if (!(p.layer_dt > 0) || !(p.horizon >= p.layer_dt))
    throw std::invalid_argument("predict_layers: require horizon >= layer_dt > 0");
  const auto n_layers = static_cast<std::size_t>(std::floor(p.horizon / p.layer_dt + 1e-9)) + 1;
  std::vector<Costmap> layers;
  layers.reserve(n_layers);
  for (std::size_t k = 0; k < n_layers; ++k) {
    Costmap layer = base;
    for (const auto& h : humans) {
      AgentState predicted = h;
      predicted.position = h.position + h.velocity * (static_cast<double>(k) * p.layer_dt);
      add_social_layer(layer, predicted, p.social);
      stamp_lethal_disc(layer, predicted.position, p.lethal_radius);
    }
    layers.push_back(std::move(layer));
  }
  return layers;
}

/// Time-dependent plan around one constant-velocity human.
inline TimedPlan plan_time_astar(const Costmap& map, const AgentState& human, Point2D start, Point2D goal,
                                 const PredictionParams& p) {
  const auto layers = predict_layers(map, {human}, p);
  const int tpl = ticks_per_layer(map.resolution, p);
  auto plan = plan_time_expanded(layers, tpl, p.layer_dt / tpl, map.cell_at(start), map.cell_at(goal), p.search);
  plan.horizon = p.horizon;
  return plan;
}

}  // namespace socnav::planning
