// Acceptance run: one PASS/FAIL line per criterion. Exit status is nonzero when
// a blocking criterion fails; the qualitative trend line is informational only.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "oracles/anova_oracle.hpp"
#include "oracles/metric_oracle.hpp"
#include "oracles/search_oracle.hpp"
#include "socnav/bench.hpp"
#include "socnav/grid_search.hpp"
#include "socnav/session.hpp"

using namespace socnav;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

// Collects failures; the first few are kept for the report line.
struct Checker {
  int failures = 0;
  std::vector<std::string> notes;
  void expect(bool ok, const std::string& what) {
    if (ok) return;
    ++failures;
    if (notes.size() < 3) notes.push_back(what);
  }
  Outcome outcome(const std::string& summary) const {
    std::string d = summary;
    for (const auto& n : notes) d += "; " + n;
    if (failures > 3) d += "; +" + std::to_string(failures - 3) + " more";
    return {failures == 0, d};
  }
};

std::string num(double v) {
  std::ostringstream o;
  o.precision(4);
  o << v;
  return o.str();
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("socnav_accept_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(dir);
  return dir;
}

const fs::path kSource = SOCNAV_SOURCE_DIR;

// --- metrics ----------------------------------------------------------------

sim::TrialLog line_log(const std::vector<double>& gaps, const std::vector<double>& speeds) {
  sim::TrialLog log;
  log.dt = 0.1;
  for (std::size_t k = 0; k < gaps.size(); ++k) {
    sim::Sample s;
    s.t = 0.1 * k;
    s.robot = AgentState::at({0.0, 0.0});
    s.robot.speed = speeds[k];
    s.humans.push_back(AgentState::at({gaps[k] + 0.5, 0.0}));
    log.samples.push_back(s);
  }
  log.completed = true;
  log.robot_task_time = 1.0;
  log.robot_path_length = 1.0;
  return log;
}

sim::TrialLog synthetic(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> x(0.25, 2.25), y(0.25, 3.75), sp(0.0, 0.3), u(0.0, 1.0);
  sim::TrialLog log;
  const int n = 20 + static_cast<int>(u(rng) * 200);
  for (int k = 0; k < n; ++k) {
    sim::Sample s;
    s.t = 0.1 * k;
    s.robot = AgentState::at({x(rng), y(rng)});
    s.robot.speed = sp(rng);
    s.humans.push_back(AgentState::at({x(rng), y(rng)}));
    if (u(rng) < 0.5) s.humans[0].position = s.robot.position + Vec2{0.5 + u(rng) * 0.5, 0.0};
    log.samples.push_back(s);
  }
  log.completed = u(rng) < 0.8;
  log.collision_count = u(rng) < 0.5 ? 0 : 1 + static_cast<int>(u(rng) * 3);
  log.robot_task_time = 50 + 100 * u(rng);
  log.robot_path_length = 10 + 5 * u(rng);
  if (u(rng) < 0.8) log.human_task_time = 20 + 10 * u(rng);
  return log;
}

Outcome metric_oracle() {
  const auto t0 = std::chrono::steady_clock::now();
  Checker c;
  std::mt19937_64 rng(2024);
  const auto cfg = build_scenario(Layout::coinciding);
  sim::TrialLog base;
  base.robot_task_time = 47.0;
  base.robot_path_length = 9.5;
  int logs = 0;
  double worst = 0.0;
  for (int set = 0; set < 100; ++set) {
    std::vector<sim::TrialLog> trials;
    const int n = 1 + set % 7;
    for (int i = 0; i < n; ++i) trials.push_back(synthetic(rng));
    logs += n;
    const auto got = metrics::compute_rcm(trials, base, 18.0, cfg);
    const auto want = oracle::rcm(trials, base, 18.0, cfg.d_safe, cfg.d_social, cfg.v_max_robot);
    for (auto [a, b] : {std::pair{got.r_haza, want.haza}, {got.r_dist, want.dist}, {got.r_dec, want.dec},
                        {got.r_extra_robot, want.extra_robot}, {got.r_succ, want.succ}})
      worst = std::max(worst, std::abs(a - b));
    c.expect(got.r_extra_human.has_value() == want.has_human, "R^h_extra presence differs in set " + std::to_string(set));
    if (want.has_human && got.r_extra_human) worst = std::max(worst, std::abs(*got.r_extra_human - want.extra_human));
  }
  c.expect(worst <= 1e-12, "max deviation " + num(worst));

  std::vector<double> gaps(20, 1.0);
  for (int k = 0; k < 10; ++k) gaps[k] = k < 5 ? 0.1 : 0.3;
  c.expect(metrics::hazard_ratio(line_log(gaps, std::vector<double>(20, 0.3)), 0.2, 0.4) == 0.5, "hazard hand case");
  const double dec = metrics::deceleration_ratio(line_log({0.3, 0.3, 0.3, 1.0}, {0.3, 0.2, 0.1, 0.0}), 0.4, 0.3);
  c.expect(std::abs(dec - 2.0 / 3.0) < 1e-15, "deceleration hand case " + num(dec));
  c.expect(metrics::robot_extra_time_ratio(30.0, 40.0) == 0.75, "extra-time hand case");
  const double secs = seconds_since(t0);
  c.expect(secs < 10.0, "runtime " + num(secs) + " s");
  return c.outcome(std::to_string(logs) + " synthetic logs, max deviation " + num(worst) + ", hand cases 0.5/" +
                   num(dec) + "/0.75, " + num(secs) + " s");
}

// --- kinematics over the full grid --------------------------------------------

struct Grid {
  fs::path dir;
  bench::BenchmarkReport report;
  double seconds = 0.0;
};

Grid run_grid() {
  Grid g;
  g.dir = scratch("grid");
  auto plan = bench::plan_from_json(json::parse(io::read_file(kSource / "configs" / "default_plan.json")));
  plan.output_dir = g.dir;
  const auto t0 = std::chrono::steady_clock::now();
  g.report = bench::run_benchmark(plan);
  g.seconds = seconds_since(t0);
  return g;
}

Outcome kinematics(const Grid& g) {
  Checker c;
  c.expect(!g.report.partial(), "grid run had failed cells");
  const auto t0 = std::chrono::steady_clock::now();
  const auto logs = bench::logs_dir(g.dir);
  std::size_t trials = 0, ticks = 0;
  double v_max = 0.0, a_max = 0.0;
  for (const auto& entry : fs::directory_iterator(logs)) {
    if (entry.path().extension() != ".json") continue;
    const auto stem = entry.path().stem().string();
    if (stem.rfind("human_", 0) == 0) continue;  // robot-free reference runs
    const auto log = io::load_trial(logs, stem);
    ++trials;
    for (std::size_t k = 0; k < log.samples.size(); ++k) {
      const auto& r = log.samples[k].robot;
      v_max = std::max({v_max, r.speed, r.velocity.norm()});
      if (k > 0) a_max = std::max(a_max, (r.velocity - log.samples[k - 1].robot.velocity).norm() / log.dt);
      ++ticks;
    }
  }
  c.expect(trials == 4 * 2 * 21, "expected 168 robot logs, found " + std::to_string(trials));
  c.expect(v_max <= 0.3 + 1e-6, "speed " + num(v_max));
  c.expect(a_max <= 0.3 + 1e-6, "acceleration " + num(a_max));
  const double secs = g.seconds + seconds_since(t0);
  c.expect(secs < 300.0, "runtime " + num(secs) + " s");
  return c.outcome(std::to_string(trials) + " robot logs, " + std::to_string(ticks) + " ticks, max speed " +
                   num(v_max) + " m/s, max |dv|/dt " + num(a_max) + " m/s^2, " + num(secs) + " s");
}

// --- determinism and replay --------------------------------------------------

struct Walker {
  bool to_h2 = true;
  Vec2 command(const ScenarioConfig& cfg, Point2D at) {
    const Point2D goal = to_h2 ? cfg.waypoints.H2 : cfg.waypoints.H1;
    const Vec2 d = goal - at;
    if (d.norm() < 0.2) to_h2 = !to_h2;
    return d.norm() < 1e-9 ? Vec2{} : d * (cfg.v_human / d.norm());
  }
};

Outcome determinism() {
  Checker c;
  const std::array<MethodId, 4> methods{MethodId::mb(), MethodId::snl(), MethodId::tdp(), MethodId::hh()};
  int pairs = 0;
  for (auto layout : {Layout::coinciding, Layout::perpendicular}) {
    const auto cfg = build_scenario(layout);
    for (const auto& m : methods)
      for (std::uint64_t seed : {0u, 11u}) {
        const auto a = sim::run_trial(cfg, m, sim::PedestrianMode::oblivious(), seed);
        const auto b = sim::run_trial(cfg, m, sim::PedestrianMode::oblivious(), seed);
        c.expect(io::trial_csv(a) == io::trial_csv(b) && io::trial_summary(a).dump() == io::trial_summary(b).dump(),
                 m.str() + "/" + to_string(layout) + " seed " + std::to_string(seed) + " differs");
        ++pairs;
      }
  }

  // three steered interactive trials, each replayed from its recorded input trace
  gateway::SessionManager mgr(scratch("replay"));
  int replays = 0;
  const std::array<MethodId, 3> live_methods{MethodId::mb(), MethodId::snl(), MethodId::tdp()};
  for (std::size_t i = 0; i < live_methods.size(); ++i) {
    gateway::SessionSpec spec;
    spec.participant_id = "P0" + std::to_string(i + 1);
    spec.methods = {live_methods[i]};
    auto s = mgr.create(spec);
    Walker w;
    Point2D human = s->scenario().waypoints.HS;
    s->start();
    for (int k = 0; k < 10000 && s->phase() == gateway::Phase::trial; ++k) {
      s->set_input(w.command(s->scenario(), human));
      for (const auto& msg : s->tick())
        if (msg.type == wire::MessageType::state)
          human = {msg.payload["humans"][0]["x"].get<double>(), msg.payload["humans"][0]["y"].get<double>()};
    }
    const auto live = s->live_log(0);
    const auto trace = s->input_trace(0);
    const auto again = sim::run_trial(s->scenario(), live_methods[i], sim::PedestrianMode::live(), live.seed, {}, trace);
    c.expect(!trace.empty(), "empty trace for " + live_methods[i].str());
    c.expect(io::trial_csv(again) == io::trial_csv(live) && io::trial_summary(again) == io::trial_summary(live),
             "replay of " + live_methods[i].str() + " differs");
    ++replays;
  }
  return c.outcome(std::to_string(pairs) + " repeated trials byte-identical, " + std::to_string(replays) +
                   " recorded interactive traces replayed");
}

// --- planners ----------------------------------------------------------------

planning::Costmap random_map(std::mt19937_64& rng, int w, int h, double lethal_p) {
  planning::Costmap m(w, h, 0.05);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<int> cost(0, 254);
  for (auto& v : m.cost) v = u(rng) < lethal_p ? planning::kLethalCost : static_cast<std::uint8_t>(cost(rng));
  return m;
}

planning::Cell free_cell(std::mt19937_64& rng, const planning::Costmap& m) {
  std::uniform_int_distribution<int> x(0, m.width - 1), y(0, m.height - 1);
  for (;;) {
    const planning::Cell c{x(rng), y(rng)};
    if (!m.lethal(c)) return c;
  }
}

Outcome planners() {
  Checker c;
  std::mt19937_64 rng(42);
  int solved = 0, unreachable = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const auto m = random_map(rng, 6, 6, 0.25);
    const auto s = free_cell(rng, m), t = free_cell(rng, m);
    const double w = trial % 2 ? 10.0 : 2.5;
    const auto want = oracle::shortest_cost(m, s, t, w);
    try {
      const auto got = planning::plan_grid(m, s, t, {w}).cost;
      c.expect(want < oracle::kInf && got == want, "A* map " + std::to_string(trial));
      ++solved;
    } catch (const planning::PlanningError&) {
      c.expect(want >= oracle::kInf, "A* missed a path on map " + std::to_string(trial));
      ++unreachable;
    }
  }
  int timed = 0;
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<planning::Costmap> layers;
    for (int k = 0; k < 5; ++k) layers.push_back(random_map(rng, 6, 6, 0.2));
    const auto s = free_cell(rng, layers.front()), t = free_cell(rng, layers.back());
    const auto want = oracle::shortest_timed_cost(layers, 2, s, t, 10.0, 1.0);
    try {
      const auto got = planning::plan_time_expanded(layers, 2, 0.25, s, t).cost;
      c.expect(want < oracle::kInf && got == want, "time-expanded instance " + std::to_string(trial));
      ++timed;
    } catch (const planning::PlanningError&) {
      c.expect(want >= oracle::kInf, "time-expanded missed a path on instance " + std::to_string(trial));
    }
  }
  return c.outcome("A* = Dijkstra on 100 maps (" + std::to_string(solved) + " solvable, " +
                   std::to_string(unreachable) + " unreachable agreed); time-expanded = brute force on 20 instances (" +
                   std::to_string(timed) + " solvable)");
}

// --- social layer -------------------------------------------------------------

Outcome social_layer() {
  Checker c;
  const planning::Costmap base(61, 61, 0.05);
  const planning::Cell centre{30, 30};
  const planning::SocialLayerParams p;
  const auto still = planning::apply_social_layer(base, AgentState::at(base.center(centre), 0.9), p);
  // cells at equal squared offset from the person must agree within one unit
  std::map<int, std::pair<int, int>> range;
  for (int y = 0; y < base.height; ++y)
    for (int x = 0; x < base.width; ++x) {
      const int d2 = (x - centre.x) * (x - centre.x) + (y - centre.y) * (y - centre.y);
      const int v = still.at({x, y});
      auto [it, fresh] = range.try_emplace(d2, v, v);
      it->second.first = std::min(it->second.first, v);
      it->second.second = std::max(it->second.second, v);
    }
  int spread = 0;
  for (const auto& [d2, mm] : range) spread = std::max(spread, mm.second - mm.first);
  c.expect(spread <= 1, "radial spread " + std::to_string(spread));

  const auto walking = AgentState::moving(base.center(centre), {0.3, 0.0});
  const auto moving = planning::apply_social_layer(base, walking, p);
  const planning::Cell ahead{centre.x + 8, centre.y}, abeam{centre.x, centre.y + 8};  // 0.4 m
  const int front = moving.at(ahead), side = moving.at(abeam);
  const Point2D h = base.center(centre);
  const double front_c = planning::social_cost({h.x + 0.4, h.y}, walking, p);
  const double side_c = planning::social_cost({h.x, h.y + 0.4}, walking, p);
  c.expect(front > side, "grid ahead " + std::to_string(front) + " vs abeam " + std::to_string(side));
  c.expect(front_c > side_c, "continuous ahead " + num(front_c) + " vs abeam " + num(side_c));
  return c.outcome("max radial spread " + std::to_string(spread) + " unit(s); at 0.4 m ahead " + std::to_string(front) +
                   " > abeam " + std::to_string(side));
}

// --- behaviour ----------------------------------------------------------------

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const auto n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

Outcome clearance() {
  Checker c;
  const auto cfg = build_scenario(Layout::coinciding);
  std::map<std::string, std::vector<double>> mins;
  for (const auto& m : {MethodId::mb(), MethodId::snl()})
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const auto log = sim::run_trial(cfg, m, sim::PedestrianMode::oblivious(), seed);
      c.expect(log.min_human_distance.has_value(), "no distance for " + m.str());
      if (log.min_human_distance) mins[m.str()].push_back(*log.min_human_distance);
    }
  const double mb = median(mins["MB"]), snl = median(mins["SNL"]);
  c.expect(snl >= mb, "SNL median below MB");
  return c.outcome("median min clearance over 20 seeds: SNL " + num(snl) + " m, MB " + num(mb) + " m");
}

Outcome trend(const Grid& g) {
  std::string d;
  bool all = !g.report.trend.empty();
  for (const auto& t : g.report.trend) {
    all = all && t.holds;
    d += (d.empty() ? "" : "; ") + t.name + (t.holds ? " holds (" : " diverges (") + t.observed + ")";
  }
  if (g.report.trend.empty()) d = "no trend section in report";
  return {all, d};
}

// --- statistics -----------------------------------------------------------------

Outcome stats_oracles() {
  Checker c;
  std::mt19937_64 rng(99);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::uniform_int_distribution<int> groups(2, 5), size(2, 25);
  double worst = 0.0;
  for (int set = 0; set < 50; ++set) {
    std::vector<std::vector<double>> g(groups(rng));
    for (std::size_t i = 0; i < g.size(); ++i) {
      g[i].resize(size(rng));
      for (auto& x : g[i]) x = 0.4 * i * (set % 3) + noise(rng);
    }
    const auto got = stats::one_way_anova(g);
    const auto want = oracle::anova(g);
    worst = std::max({worst, std::abs(got.ss_between - want.ssb), std::abs(got.ss_within - want.ssw),
                      std::abs(got.f_value - want.f) / std::max(1.0, want.f), std::abs(got.p_value - want.p)});
  }
  c.expect(worst <= 1e-9, "ANOVA deviation " + num(worst));
  const auto equal = stats::one_way_anova({{1, 2, 3}, {1, 2, 3}, {1, 2, 3}});
  c.expect(equal.f_value == 0.0 && equal.p_value == 1.0, "equal-mean groups F " + num(equal.f_value));

  const std::vector<double> x{1, 2, 3, 4, 5};
  c.expect(stats::pearson(x, {2, 4, 6, 8, 10}) == 1.0, "Pearson +1");
  c.expect(stats::pearson(x, {9, 7, 5, 3, 1}) == -1.0, "Pearson -1");

  std::vector<std::vector<double>> same;
  for (int i = 1; i <= 9; ++i) same.push_back(std::vector<double>(6, i));
  const double a1 = rosas::cronbach_alpha(same);
  c.expect(std::abs(a1 - 1.0) < 1e-12, "alpha on identical columns " + num(a1));
  std::mt19937_64 noise_rng(5);
  std::uniform_int_distribution<int> score(1, 9);
  std::vector<std::vector<double>> rows(200, std::vector<double>(6));
  for (auto& r : rows)
    for (auto& v : r) v = score(noise_rng);
  const double a0 = rosas::cronbach_alpha(rows);
  c.expect(std::abs(a0) <= 0.15, "alpha on noise " + num(a0));
  c.expect(!rosas::high_internal_consistency(0.90) && !rosas::high_internal_consistency(0.85) &&
               rosas::high_internal_consistency(0.9001) && rosas::high_internal_consistency(a1),
           "high-consistency flag");
  return c.outcome("ANOVA 50 sets max deviation " + num(worst) + "; Pearson +/-1; alpha " + num(a1) + " and " +
                   num(a0) + "; flag strict at 0.90");
}

Outcome rosas_fixture() {
  Checker c;
  const auto responses = rosas::load_responses(kSource / "tests" / "fixtures" / "rosas_responses.csv");
  const auto want = json::parse(io::read_file(kSource / "tests" / "fixtures" / "rosas_expected.json"));
  c.expect(responses.size() == want["responses"].get<std::size_t>(), "response count");
  const auto got = rosas::aggregate_hcm(responses);
  double worst = 0.0;
  c.expect(got.size() == want["methods"].size(), "method count");
  for (const auto& [name, w] : want["methods"].items()) {
    const auto it = got.find(MethodId::parse(name));
    if (it == got.end()) {
      c.expect(false, "missing " + name);
      continue;
    }
    c.expect(it->second.n == w["n"].get<std::size_t>(), "n for " + name);
    for (auto f : rosas::kFactors) {
      const auto& ms = it->second.get(f);
      const auto& e = w[rosas::to_string(f)];
      worst = std::max(worst, std::abs(ms.mean - e["mean"].get<double>()));
      c.expect(ms.se.has_value(), "SE for " + name);
      if (ms.se) worst = std::max(worst, std::abs(*ms.se - e["se"].get<double>()));
    }
  }
  for (auto f : rosas::kFactors)
    worst = std::max(worst, std::abs(rosas::factor_alpha(responses, f) - want["alpha"][rosas::to_string(f)].get<double>()));
  c.expect(worst <= 1e-9, "max deviation " + num(worst));
  c.expect(rosas::normalize_factor(1.0) == 0.0 && rosas::normalize_factor(9.0) == 1.0, "normalization endpoints");
  return c.outcome(std::to_string(responses.size()) + " responses, " + std::to_string(got.size()) +
                   " methods, max deviation from fixture " + num(worst) + "; 1 -> 0, 9 -> 1");
}

Outcome latin_square() {
  Checker c;
  for (int n = 2; n <= 8; ++n) {
    const auto sq = latin_square_order(n, n);
    for (int i = 0; i < n; ++i) {
      std::set<int> row, col;
      for (int j = 0; j < n; ++j) {
        row.insert(sq[i][j]);
        col.insert(sq[j][i]);
      }
      c.expect(static_cast<int>(row.size()) == n && static_cast<int>(col.size()) == n && *row.rbegin() == n - 1 &&
                   *col.rbegin() == n - 1,
               "n=" + std::to_string(n) + " line " + std::to_string(i));
    }
  }
  const auto rows = latin_square_order(4, 20);
  std::map<std::pair<int, int>, int> count;
  for (const auto& r : rows)
    for (int pos = 0; pos < 4; ++pos) ++count[{r[pos], pos}];
  bool balanced = count.size() == 16;
  for (const auto& [k, n] : count) balanced = balanced && n == 5;
  c.expect(balanced, "20-participant positions unbalanced");

  // the session gateway hands out the same rows
  gateway::SessionManager mgr(scratch("latin"));
  std::map<std::pair<std::string, std::size_t>, int> served;
  for (int p = 0; p < 20; ++p) {
    gateway::SessionSpec spec;
    char id[8];
    std::snprintf(id, sizeof id, "P%02d", p + 1);
    spec.participant_id = id;
    const auto order = mgr.create(spec)->state().order;
    for (std::size_t pos = 0; pos < order.size(); ++pos) ++served[{order[pos].str(), pos}];
  }
  bool sessions_ok = served.size() == 16;
  for (const auto& [k, n] : served) sessions_ok = sessions_ok && n == 5;
  c.expect(sessions_ok, "session orders unbalanced");
  return c.outcome("n = 2..8 rows and columns are permutations; 20 participants give each method 5x per position");
}

// --- command line -------------------------------------------------------------

Outcome cli_end_to_end() {
  Checker c;
  const auto root = scratch("cli");
  const auto out = root / "run", other = root / "regen";
  const std::string bin = SOCNAV_BENCH_BIN;
  const std::string quiet = "SOCNAV_LOG=quiet ";
  const auto t0 = std::chrono::steady_clock::now();
  const int run = std::system((quiet + "\"" + bin + "\" run --config \"" +
                               (kSource / "configs" / "default_plan.json").string() + "\" --out \"" + out.string() +
                               "\" > /dev/null")
                                  .c_str());
  const double secs = seconds_since(t0);
  c.expect(run == 0, "run exit status " + std::to_string(run));
  c.expect(secs < 600.0, "run took " + num(secs) + " s");
  const int rep = std::system((quiet + "\"" + bin + "\" report --in \"" + out.string() + "\" --format json --out \"" +
                               other.string() + "\" > /dev/null")
                                  .c_str());
  c.expect(rep == 0, "report exit status " + std::to_string(rep));
  bool same = false;
  if (run == 0 && rep == 0) {
    const auto a = io::read_file(out / "report.json"), b = io::read_file(other / "report.json");
    same = a == b;
    c.expect(same, "regenerated report.json differs");
    c.expect(bench::report_from_json(json::parse(a)) == bench::report_from_json(json::parse(b)), "reports unequal");
  }
  return c.outcome("run on the default plan in " + num(secs) + " s; report from persisted logs " +
                   (same ? "identical" : "not identical"));
}

}  // namespace

int main() {
  struct Criterion {
    std::string name;
    bool blocking;
    std::function<Outcome()> run;
  };
  Grid grid;
  bool grid_ready = false;
  auto ensure_grid = [&]() -> const Grid& {
    if (!grid_ready) {
      grid = run_grid();
      grid_ready = true;
    }
    return grid;
  };
  const std::vector<Criterion> criteria{
      {"metric-oracle", true, metric_oracle},
      {"kinematic-invariants", true, [&] { return kinematics(ensure_grid()); }},
      {"determinism-replay", true, determinism},
      {"planner-oracles", true, planners},
      {"social-layer", true, social_layer},
      {"behavioral-clearance", true, clearance},
      {"qualitative-trend", false, [&] { return trend(ensure_grid()); }},
      {"stats-oracles", true, stats_oracles},
      {"rosas-pipeline", true, rosas_fixture},
      {"latin-square", true, latin_square},
      {"cli-end-to-end", true, cli_end_to_end},
  };
  int blocking_failures = 0;
  for (const auto& cr : criteria) {
    Outcome o;
    try {
      o = cr.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const char* tag = o.pass ? "PASS" : (cr.blocking ? "FAIL" : "FAIL (non-blocking)");
    std::cout << tag << " " << cr.name << ": " << o.detail << std::endl;
    if (!o.pass && cr.blocking) ++blocking_failures;
  }
  if (grid_ready) fs::remove_all(grid.dir);
  std::cout << (blocking_failures ? "acceptance: " + std::to_string(blocking_failures) + " blocking failure(s)"
                                  : std::string("acceptance: all blocking criteria pass"))
            << std::endl;
  return blocking_failures ? 1 : 0;
}
