#pragma once

// Benchmark orchestration: method x layout x seed grids, baselines, log
// persistence, aggregation into a report and report export.

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "socnav/metrics.hpp"
#include "socnav/rosas.hpp"
#include "socnav/stats.hpp"
#include "socnav/trial_io.hpp"

namespace socnav::bench {

namespace fs = std::filesystem;
using nlohmann::json;

inline constexpr const char* kCodeVersion = "0.1.0";

/// Raised when nothing in a plan could be evaluated.
class BenchError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct BenchmarkPlan {
  json scenario = json::object();  // overrides applied on top of each layout's defaults
  std::vector<MethodId> methods{MethodId::mb(), MethodId::snl(), MethodId::tdp(), MethodId::hh()};
  std::vector<Layout> layouts{Layout::coinciding, Layout::perpendicular};
  int trials_per_cell = 20;
  std::vector<std::uint64_t> seeds;  // empty: 0 .. trials_per_cell - 1
  std::optional<sim::PedestrianMode> ped_mode = sim::PedestrianMode::oblivious();  // nullopt: no pedestrian
  fs::path output_dir;
  unsigned threads = 0;  // 0: hardware concurrency

  std::vector<std::uint64_t> trial_seeds() const {
    std::vector<std::uint64_t> out;
    for (int i = 0; i < trials_per_cell; ++i)
      out.push_back(seeds.empty() ? static_cast<std::uint64_t>(i) : seeds[static_cast<std::size_t>(i)]);
    return out;
  }
  ScenarioConfig scenario_for(Layout l) const { return build_scenario(l, scenario); }
};

inline std::string ped_mode_name(const std::optional<sim::PedestrianMode>& m) {
  return m ? sim::to_string(m->kind) : "none";
}

inline void validate(const BenchmarkPlan& p) {
  if (p.methods.empty()) throw ValidationError("methods", "must not be empty");
  if (p.layouts.empty()) throw ValidationError("layouts", "must not be empty");
  if (p.trials_per_cell < 1) throw ValidationError("trials_per_cell", "must be >= 1");
  if (!p.seeds.empty() && p.seeds.size() < static_cast<std::size_t>(p.trials_per_cell))
    throw ValidationError("seeds", "fewer seeds than trials_per_cell");
  if (std::set<MethodId>(p.methods.begin(), p.methods.end()).size() != p.methods.size())
    throw ValidationError("methods", "duplicate method");
  if (std::set<Layout>(p.layouts.begin(), p.layouts.end()).size() != p.layouts.size())
    throw ValidationError("layouts", "duplicate layout");
  if (p.ped_mode && p.ped_mode->kind == sim::PedestrianMode::Kind::live)
    throw ValidationError("ped_mode", "live pedestrians run through the session gateway, not batch plans");
  for (auto l : p.layouts) (void)p.scenario_for(l);
}

/// Plan document. Execution-only settings (output directory, threads) stay out
/// of it so they do not affect the provenance hash.
inline json to_json(const BenchmarkPlan& p) {
  json methods = json::array(), layouts = json::array();
  for (const auto& m : p.methods) methods.push_back(m.str());
  for (auto l : p.layouts) layouts.push_back(to_string(l));
  json j{{"scenario", p.scenario},
         {"methods", methods},
         {"layouts", layouts},
         {"trials_per_cell", p.trials_per_cell},
         {"seeds", p.trial_seeds()},
         {"ped_mode", ped_mode_name(p.ped_mode)}};
  if (p.ped_mode && p.ped_mode->kind == sim::PedestrianMode::Kind::reactive)
    j["avoidance_gain"] = p.ped_mode->avoidance_gain;
  return j;
}

inline BenchmarkPlan plan_from_json(const json& j) {
  if (!j.is_object()) throw ValidationError("plan", "expected an object");
  BenchmarkPlan p;
  std::optional<std::uint64_t> seed_base;
  std::optional<double> gain;
  std::string mode = "oblivious";
  for (const auto& [key, v] : j.items()) {
    try {
      if (key == "scenario") {
        if (!v.is_object()) throw ValidationError("scenario", "expected an object");
        p.scenario = v;
      } else if (key == "methods") {
        p.methods.clear();
        for (const auto& m : v) p.methods.push_back(MethodId::parse(m.get<std::string>()));
      } else if (key == "layouts") {
        p.layouts.clear();
        for (const auto& l : v) p.layouts.push_back(parse_layout(l.get<std::string>()));
      } else if (key == "trials_per_cell") {
        p.trials_per_cell = v.get<int>();
      } else if (key == "seeds") {
        p.seeds = v.get<std::vector<std::uint64_t>>();
      } else if (key == "seed_base") {
        seed_base = v.get<std::uint64_t>();
      } else if (key == "ped_mode") {
        mode = v.get<std::string>();
      } else if (key == "avoidance_gain") {
        gain = v.get<double>();
      } else if (key == "threads") {
        p.threads = v.get<unsigned>();
      } else {
        throw ValidationError(key, "unknown plan key");
      }
    } catch (const json::exception& e) {
      throw ValidationError(key, e.what());
    }
  }
  if (seed_base) {
    if (!p.seeds.empty()) throw ValidationError("seed_base", "give either seeds or seed_base");
    for (int i = 0; i < p.trials_per_cell; ++i) p.seeds.push_back(*seed_base + static_cast<std::uint64_t>(i));
  }
  if (mode == "none") p.ped_mode.reset();
  else p.ped_mode = sim::parse_ped_mode(mode);
  if (gain) {
    if (!p.ped_mode || p.ped_mode->kind != sim::PedestrianMode::Kind::reactive)
      throw ValidationError("avoidance_gain", "only meaningful for the reactive pedestrian");
    p.ped_mode->avoidance_gain = *gain;
  }
  validate(p);
  return p;
}

/// Hash over the plan document plus every resolved scenario.
inline std::string plan_hash(const BenchmarkPlan& p) {
  json doc = to_json(p);
  json resolved = json::object();
  for (auto l : p.layouts) resolved[to_string(l)] = socnav::to_json(p.scenario_for(l));
  doc["resolved"] = resolved;
  const std::string text = doc.dump();
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// --- report -----------------------------------------------------------------

struct CellReport {
  MethodId method;
  Layout layout = Layout::coinciding;
  std::optional<metrics::RcmReport> rcm;
  std::optional<std::string> failure;
  std::vector<std::optional<double>> min_distance;  // per trial, body clearance
};

/// Means of the per-trial metrics over every trial of a method (all layouts).
struct MethodSummary {
  MethodId method;
  std::size_t trials = 0;
  double r_extra_robot = 0.0;
  std::optional<double> r_extra_human;
  double r_dist = 0.0;
  double r_succ = 0.0;
  double r_haza = 0.0;
  double r_dec = 0.0;
  std::optional<double> median_min_distance;
};

struct HcmSection {
  std::size_t responses = 0;
  std::map<MethodId, rosas::HcmAggregate> per_method;
  std::map<rosas::Factor, std::optional<double>> alpha;
  std::vector<std::string> warnings;
};

struct TrendCheck {
  std::string name;
  std::string expected;
  std::string observed;
  bool holds = false;
};

struct Provenance {
  std::string plan_hash;
  std::string code_version = kCodeVersion;
  std::vector<std::uint64_t> seeds;
  std::string ped_mode;
};

struct BenchmarkReport {
  Provenance provenance;
  std::vector<CellReport> cells;
  std::vector<MethodSummary> per_method;
  std::optional<HcmSection> hcm;
  std::vector<std::pair<std::string, stats::AnovaResult>> anova;
  std::optional<stats::CorrelationTable> correlation;
  std::vector<TrendCheck> trend;

  bool partial() const {
    return std::any_of(cells.begin(), cells.end(), [](const CellReport& c) { return c.failure.has_value(); });
  }
  const CellReport* cell(const MethodId& m, Layout l) const {
    for (const auto& c : cells)
      if (c.method == m && c.layout == l) return &c;
    return nullptr;
  }
  const MethodSummary* summary(const MethodId& m) const {
    for (const auto& s : per_method)
      if (s.method == m) return &s;
    return nullptr;
  }
};

/// Participant id paired with the i-th seed of a plan, for joining trials with
/// questionnaire responses.
inline std::string participant_for(std::size_t seed_index) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "P%02zu", seed_index + 1);
  return buf;
}

namespace detail {

inline std::optional<double> median(std::vector<double> v) {
  if (v.empty()) return std::nullopt;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

inline std::string fmt3(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

}  // namespace detail

/// Everything a report is assembled from; produced either by running a plan
/// or by loading its persisted logs.
struct RunData {
  std::map<Layout, std::optional<double>> human_baseline_time;
  std::map<Layout, std::string> human_baseline_failure;
  struct Cell {
    MethodId method;
    Layout layout = Layout::coinciding;
    std::optional<sim::TrialLog> baseline;
    std::vector<std::optional<sim::TrialLog>> trials;
    std::vector<std::string> errors;  // "<stem>: <what>"
  };
  std::vector<Cell> cells;
};

inline std::vector<TrendCheck> trend_checks(const std::vector<MethodSummary>& per_method) {
  auto find = [&](const MethodId& m) -> const MethodSummary* {
    for (const auto& s : per_method)
      if (s.method == m) return &s;
    return nullptr;
  };
  const auto* mb = find(MethodId::mb());
  const auto* snl = find(MethodId::snl());
  const auto* tdp = find(MethodId::tdp());
  if (!mb || !snl || !tdp) return {};
  auto observed = [&](auto field) {
    return "MB " + detail::fmt3(mb->*field) + ", SNL " + detail::fmt3(snl->*field) + ", TDP " +
           detail::fmt3(tdp->*field);
  };
  std::vector<TrendCheck> out;
  out.push_back({"tdp_highest_r_dist", "TDP has the highest R_dist among MB, SNL, TDP (reference study: TDP 1.00)",
                 observed(&MethodSummary::r_dist), tdp->r_dist > mb->r_dist && tdp->r_dist > snl->r_dist});
  out.push_back({"tdp_lowest_r_extra_robot",
                 "TDP has the lowest robot extra-time ratio among MB, SNL, TDP (reference study: TDP 0.74)",
                 observed(&MethodSummary::r_extra_robot),
                 tdp->r_extra_robot < mb->r_extra_robot && tdp->r_extra_robot < snl->r_extra_robot});
  return out;
}

/// Builds the report. Deterministic in its inputs: run order and threading
/// have no influence.
inline BenchmarkReport assemble_report(const BenchmarkPlan& plan, const RunData& data,
                                       const std::vector<rosas::RosasResponse>* responses = nullptr) {
  BenchmarkReport rep;
  rep.provenance = {plan_hash(plan), kCodeVersion, plan.trial_seeds(), ped_mode_name(plan.ped_mode)};
  const auto seeds = plan.trial_seeds();

  // per-trial metrics, keyed by method then seed index
  std::map<MethodId, std::vector<std::vector<metrics::TrialMetrics>>> by_seed;
  std::map<MethodId, std::vector<double>> min_dists;
  for (const auto& c : data.cells) {
    CellReport cr;
    cr.method = c.method;
    cr.layout = c.layout;
    std::string failure;
    if (!c.errors.empty()) failure = c.errors.front();
    else if (auto it = data.human_baseline_failure.find(c.layout); it != data.human_baseline_failure.end())
      failure = it->second;
    if (failure.empty()) {
      try {
        std::vector<sim::TrialLog> logs;
        for (const auto& t : c.trials) logs.push_back(*t);
        const auto cfg = plan.scenario_for(c.layout);
        const auto th = data.human_baseline_time.count(c.layout) ? data.human_baseline_time.at(c.layout) : std::nullopt;
        cr.rcm = metrics::compute_rcm(logs, *c.baseline, th.value_or(0.0), cfg);
        if (!th) cr.rcm->r_extra_human.reset();
        auto& per_seed = by_seed[c.method];
        per_seed.resize(seeds.size());
        for (std::size_t i = 0; i < logs.size(); ++i) {
          auto m = metrics::trial_metrics(cr.rcm->ingredients, cr.rcm->ingredients.trials[i]);
          if (!th) m.r_extra_human.reset();
          per_seed[i].push_back(m);
          cr.min_distance.push_back(logs[i].min_human_distance);
          if (logs[i].min_human_distance) min_dists[c.method].push_back(*logs[i].min_human_distance);
        }
      } catch (const std::exception& e) {
        cr.rcm.reset();
        cr.min_distance.clear();
        failure = std::string("aggregation: ") + e.what();
      }
    }
    if (!failure.empty()) cr.failure = failure;
    rep.cells.push_back(std::move(cr));
  }
  if (std::none_of(rep.cells.begin(), rep.cells.end(), [](const CellReport& c) { return c.rcm.has_value(); }))
    throw BenchError("no cell of the plan produced results");

  // per-method means and the RCM ANOVA groups
  std::map<std::string, std::vector<std::vector<double>>> groups;
  std::vector<stats::RcmRecord> rcm_records;
  for (const auto& m : plan.methods) {
    const auto it = by_seed.find(m);
    if (it == by_seed.end()) continue;
    MethodSummary s;
    s.method = m;
    std::array<std::vector<double>, 6> values;
    for (std::size_t i = 0; i < it->second.size(); ++i) {
      const auto& trials = it->second[i];
      if (trials.empty()) continue;
      metrics::TrialMetrics mean;
      double human = 0.0;
      std::size_t human_n = 0;
      for (const auto& t : trials) {
        for (std::size_t k = 0; k < 6; ++k)
          if (auto v = stats::metric_value(t, stats::kMetrics[k])) values[k].push_back(*v);
        mean.r_extra_robot += t.r_extra_robot / static_cast<double>(trials.size());
        mean.r_dist += t.r_dist / static_cast<double>(trials.size());
        mean.r_succ += t.r_succ / static_cast<double>(trials.size());
        mean.r_haza += t.r_haza / static_cast<double>(trials.size());
        mean.r_dec += t.r_dec / static_cast<double>(trials.size());
        if (t.r_extra_human) {
          human += *t.r_extra_human;
          ++human_n;
        }
      }
      if (human_n) mean.r_extra_human = human / static_cast<double>(human_n);
      rcm_records.push_back({participant_for(i), m, mean});
    }
    auto avg = [](const std::vector<double>& v) {
      double a = 0.0;
      for (double x : v) a += x;
      return v.empty() ? 0.0 : a / static_cast<double>(v.size());
    };
    s.trials = values[static_cast<int>(stats::Metric::r_dist)].size();
    s.r_haza = avg(values[0]);
    if (!values[1].empty()) s.r_extra_human = avg(values[1]);
    s.r_dist = avg(values[2]);
    s.r_dec = avg(values[3]);
    s.r_extra_robot = avg(values[4]);
    s.r_succ = avg(values[5]);
    s.median_min_distance = detail::median(min_dists[m]);
    rep.per_method.push_back(s);
    for (std::size_t k = 0; k < 6; ++k) groups[stats::to_string(stats::kMetrics[k])].push_back(values[k]);
  }
  auto add_anova = [&](const std::string& name, const std::vector<std::vector<double>>& g) {
    std::vector<std::vector<double>> usable;
    for (const auto& v : g)
      if (v.size() >= 2) usable.push_back(v);
    if (usable.size() < 2) return;
    rep.anova.emplace_back(name, stats::one_way_anova(usable));
  };
  for (auto m : stats::kMetrics) add_anova(stats::to_string(m), groups[stats::to_string(m)]);

  if (responses && !responses->empty()) {
    HcmSection h;
    h.responses = responses->size();
    h.per_method = rosas::aggregate_hcm(*responses);
    for (auto f : rosas::kFactors) {
      try {
        h.alpha[f] = rosas::factor_alpha(*responses, f);
      } catch (const std::exception&) {
        h.alpha[f] = std::nullopt;
      }
    }
    h.warnings = rosas::order_balance_warnings(*responses);
    std::map<MethodId, std::array<std::vector<double>, 3>> fg;
    std::vector<stats::HcmRecord> hcm_records;
    for (const auto& r : *responses) {
      const auto s = rosas::score_response(r);
      const auto n = rosas::normalize(s);
      for (std::size_t k = 0; k < 3; ++k) fg[r.method][k].push_back(n.get(rosas::kFactors[k]));
      hcm_records.push_back({r.participant_id, r.method, s});
    }
    for (std::size_t k = 0; k < 3; ++k) {
      std::vector<std::vector<double>> g;
      for (const auto& [m, v] : fg) g.push_back(v[k]);
      add_anova(rosas::to_string(rosas::kFactors[k]), g);
    }
    try {
      rep.correlation = stats::correlation_table(rcm_records, hcm_records);
    } catch (const std::invalid_argument& e) {
      h.warnings.push_back(std::string("no correlation table: ") + e.what());
    }
    rep.hcm = std::move(h);
  }
  rep.trend = trend_checks(rep.per_method);
  return rep;
}

// --- JSON -------------------------------------------------------------------

inline json to_json(const MethodSummary& s) {
  return {{"method", s.method.str()},
          {"trials", s.trials},
          {"r_haza", s.r_haza},
          {"r_extra_human", metrics::opt_json(s.r_extra_human)},
          {"r_dist", s.r_dist},
          {"r_dec", s.r_dec},
          {"r_extra_robot", s.r_extra_robot},
          {"r_succ", s.r_succ},
          {"median_min_distance", metrics::opt_json(s.median_min_distance)}};
}

inline json to_json(const BenchmarkReport& r) {
  json cells = json::array();
  for (const auto& c : r.cells) {
    json md = json::array();
    for (const auto& d : c.min_distance) md.push_back(metrics::opt_json(d));
    cells.push_back({{"method", c.method.str()},
                     {"layout", to_string(c.layout)},
                     {"rcm", c.rcm ? metrics::to_json(*c.rcm) : json(nullptr)},
                     {"failure", c.failure ? json(*c.failure) : json(nullptr)},
                     {"min_distance", md}});
  }
  json per_method = json::array();
  for (const auto& s : r.per_method) per_method.push_back(to_json(s));
  json hcm = nullptr;
  if (r.hcm) {
    json pm = json::object(), alpha = json::object();
    for (const auto& [m, a] : r.hcm->per_method) pm[m.str()] = rosas::to_json(a);
    for (const auto& [f, a] : r.hcm->alpha) alpha[rosas::to_string(f)] = metrics::opt_json(a);
    hcm = {{"responses", r.hcm->responses}, {"per_method", pm}, {"alpha", alpha}, {"warnings", r.hcm->warnings}};
  }
  json anova = json::array();
  for (const auto& [name, a] : r.anova) {
    auto j = stats::to_json(a);
    j["measure"] = name;
    anova.push_back(j);
  }
  json trend = json::array();
  for (const auto& t : r.trend)
    trend.push_back({{"name", t.name}, {"expected", t.expected}, {"observed", t.observed}, {"holds", t.holds}});
  return {{"provenance",
           {{"plan_hash", r.provenance.plan_hash},
            {"code_version", r.provenance.code_version},
            {"seeds", r.provenance.seeds},
            {"ped_mode", r.provenance.ped_mode}}},
          {"cells", cells},
          {"per_method", per_method},
          {"hcm", hcm},
          {"anova", anova},
          {"correlation", r.correlation ? stats::to_json(*r.correlation) : json(nullptr)},
          {"trend", trend}};
}

inline BenchmarkReport report_from_json(const json& j) {
  BenchmarkReport r;
  const auto& p = j.at("provenance");
  r.provenance = {p.at("plan_hash").get<std::string>(), p.at("code_version").get<std::string>(),
                  p.at("seeds").get<std::vector<std::uint64_t>>(), p.at("ped_mode").get<std::string>()};
  for (const auto& c : j.at("cells")) {
    CellReport cr;
    cr.method = MethodId::parse(c.at("method").get<std::string>());
    cr.layout = parse_layout(c.at("layout").get<std::string>());
    if (!c.at("rcm").is_null()) cr.rcm = metrics::rcm_from_json(c.at("rcm"));
    if (!c.at("failure").is_null()) cr.failure = c.at("failure").get<std::string>();
    for (const auto& d : c.at("min_distance")) cr.min_distance.push_back(metrics::opt_from(d));
    r.cells.push_back(std::move(cr));
  }
  for (const auto& s : j.at("per_method")) {
    MethodSummary m;
    m.method = MethodId::parse(s.at("method").get<std::string>());
    m.trials = s.at("trials").get<std::size_t>();
    m.r_haza = s.at("r_haza").get<double>();
    m.r_extra_human = metrics::opt_from(s.at("r_extra_human"));
    m.r_dist = s.at("r_dist").get<double>();
    m.r_dec = s.at("r_dec").get<double>();
    m.r_extra_robot = s.at("r_extra_robot").get<double>();
    m.r_succ = s.at("r_succ").get<double>();
    m.median_min_distance = metrics::opt_from(s.at("median_min_distance"));
    r.per_method.push_back(m);
  }
  if (!j.at("hcm").is_null()) {
    const auto& h = j.at("hcm");
    HcmSection hs;
    hs.responses = h.at("responses").get<std::size_t>();
    for (const auto& [m, a] : h.at("per_method").items()) hs.per_method[MethodId::parse(m)] = rosas::hcm_from_json(a);
    for (auto f : rosas::kFactors) hs.alpha[f] = metrics::opt_from(h.at("alpha").at(rosas::to_string(f)));
    hs.warnings = h.at("warnings").get<std::vector<std::string>>();
    r.hcm = std::move(hs);
  }
  for (const auto& a : j.at("anova")) r.anova.emplace_back(a.at("measure").get<std::string>(), stats::anova_from_json(a));
  if (!j.at("correlation").is_null()) r.correlation = stats::correlation_from_json(j.at("correlation"));
  for (const auto& t : j.at("trend"))
    r.trend.push_back({t.at("name").get<std::string>(), t.at("expected").get<std::string>(),
                       t.at("observed").get<std::string>(), t.at("holds").get<bool>()});
  return r;
}

inline bool operator==(const BenchmarkReport& a, const BenchmarkReport& b) { return to_json(a) == to_json(b); }

// --- running ------------------------------------------------------------------

inline std::string human_baseline_stem(Layout l) { return "human_" + to_string(l) + "_baseline"; }

inline fs::path logs_dir(const fs::path& out) { return out / "logs"; }

using ProgressFn = std::function<void(const std::string&)>;

/// Runs every cell of the plan, persisting each log as soon as it exists, and
/// assembles the report. Failures are isolated per cell and recorded.
inline BenchmarkReport run_benchmark(const BenchmarkPlan& plan, const PolicyRegistry& registry = {},
                                     const ProgressFn& progress = {}) {
  validate(plan);
  const auto seeds = plan.trial_seeds();
  const fs::path logs = plan.output_dir.empty() ? fs::path{} : logs_dir(plan.output_dir);
  if (!plan.output_dir.empty()) {
    fs::create_directories(logs);
    io::write_file_atomic(plan.output_dir / "plan.json", to_json(plan).dump(2) + "\n");
  }

  RunData data;
  for (const auto& m : plan.methods)
    for (auto l : plan.layouts) {
      RunData::Cell c;
      c.method = m;
      c.layout = l;
      c.trials.resize(seeds.size());
      data.cells.push_back(std::move(c));
    }

  // Task list: human baselines, then per cell its baseline (-1) and trials.
  struct Task {
    std::optional<std::size_t> cell;
    Layout layout = Layout::coinciding;
    int index = -1;
  };
  std::vector<Task> tasks;
  if (plan.ped_mode)
    for (auto l : plan.layouts) tasks.push_back({std::nullopt, l, -1});
  for (std::size_t c = 0; c < data.cells.size(); ++c)
    for (int i = -1; i < static_cast<int>(seeds.size()); ++i) tasks.push_back({c, data.cells[c].layout, i});

  std::vector<std::optional<sim::TrialLog>> human_logs(plan.layouts.size());
  std::mutex mu;
  std::atomic<std::size_t> next{0};
  std::map<std::string, std::string> failures;
  auto work = [&] {
    for (;;) {
      const std::size_t k = next.fetch_add(1);
      if (k >= tasks.size()) return;
      const Task& t = tasks[k];
      const auto cfg = plan.scenario_for(t.layout);
      std::string stem;
      try {
        sim::TrialLog log;
        if (!t.cell) {
          stem = human_baseline_stem(t.layout);
          log = sim::run_human_baseline(cfg, seeds.front());
        } else {
          const auto& cell = data.cells[*t.cell];
          if (t.index < 0) {
            stem = io::baseline_stem(cell.method.str(), to_string(t.layout));
            log = sim::run_baseline(cfg, cell.method, seeds.front(), registry);
          } else {
            const auto seed = seeds[static_cast<std::size_t>(t.index)];
            stem = io::trial_stem(cell.method.str(), to_string(t.layout), seed);
            log = plan.ped_mode ? sim::run_trial(cfg, cell.method, *plan.ped_mode, seed, registry)
                                : sim::run_baseline(cfg, cell.method, seed, registry);
          }
        }
        if (!logs.empty()) io::save_trial(log, logs, stem);
        std::lock_guard lock(mu);
        if (!t.cell) {
          const auto pos = std::find(plan.layouts.begin(), plan.layouts.end(), t.layout) - plan.layouts.begin();
          human_logs[static_cast<std::size_t>(pos)] = std::move(log);
        } else if (t.index < 0) {
          data.cells[*t.cell].baseline = std::move(log);
        } else {
          data.cells[*t.cell].trials[static_cast<std::size_t>(t.index)] = std::move(log);
        }
        if (progress) progress(stem);
      } catch (const std::exception& e) {
        std::lock_guard lock(mu);
        failures[stem] = e.what();
        if (progress) progress(stem + " FAILED: " + e.what());
      }
    }
  };
  unsigned n_threads = plan.threads ? plan.threads : std::max(1u, std::thread::hardware_concurrency());
  n_threads = std::min<unsigned>(n_threads, static_cast<unsigned>(tasks.size()));
  if (n_threads <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (unsigned i = 0; i < n_threads; ++i) pool.emplace_back(work);
    for (auto& th : pool) th.join();
  }

  if (!plan.output_dir.empty()) io::write_file_atomic(plan.output_dir / "failures.json", json(failures).dump(2) + "\n");
  return assemble_report(plan, [&] {
    // Same bookkeeping as loading from disk, so both paths agree exactly.
    for (std::size_t i = 0; i < plan.layouts.size(); ++i) {
      const auto l = plan.layouts[i];
      if (!plan.ped_mode) continue;
      const auto stem = human_baseline_stem(l);
      if (failures.count(stem)) data.human_baseline_failure[l] = stem + ": " + failures.at(stem);
      else data.human_baseline_time[l] = human_logs[i]->human_task_time;
    }
    for (auto& c : data.cells) {
      const auto base = io::baseline_stem(c.method.str(), to_string(c.layout));
      if (failures.count(base)) c.errors.push_back(base + ": " + failures.at(base));
      for (std::size_t i = 0; i < seeds.size(); ++i) {
        const auto stem = io::trial_stem(c.method.str(), to_string(c.layout), seeds[i]);
        if (failures.count(stem)) c.errors.push_back(stem + ": " + failures.at(stem));
      }
    }
    return data;
  }());
}

/// Re-assembles a report from the logs a previous run persisted, without
/// simulating anything.
inline BenchmarkReport aggregate_from_dir(const fs::path& dir,
                                          const std::vector<rosas::RosasResponse>* responses = nullptr) {
  const auto plan = plan_from_json(json::parse(io::read_file(dir / "plan.json")));
  std::map<std::string, std::string> failures;
  if (fs::exists(dir / "failures.json"))
    failures = json::parse(io::read_file(dir / "failures.json")).get<std::map<std::string, std::string>>();
  const auto logs = logs_dir(dir);
  const auto seeds = plan.trial_seeds();
  auto load = [&](const std::string& stem, std::vector<std::string>& errors) -> std::optional<sim::TrialLog> {
    if (failures.count(stem)) {
      errors.push_back(stem + ": " + failures.at(stem));
      return std::nullopt;
    }
    try {
      return io::load_trial(logs, stem);
    } catch (const std::exception& e) {
      errors.push_back(stem + ": " + e.what());
      return std::nullopt;
    }
  };
  RunData data;
  if (plan.ped_mode)
    for (auto l : plan.layouts) {
      std::vector<std::string> errors;
      const auto h = load(human_baseline_stem(l), errors);
      if (h) data.human_baseline_time[l] = h->human_task_time;
      else data.human_baseline_failure[l] = errors.front();
    }
  for (const auto& m : plan.methods)
    for (auto l : plan.layouts) {
      RunData::Cell c;
      c.method = m;
      c.layout = l;
      c.baseline = load(io::baseline_stem(m.str(), to_string(l)), c.errors);
      for (auto s : seeds) c.trials.push_back(load(io::trial_stem(m.str(), to_string(l), s), c.errors));
      data.cells.push_back(std::move(c));
    }
  return assemble_report(plan, data, responses);
}

// --- export -----------------------------------------------------------------

enum class Format { json, csv, markdown };

inline Format parse_format(const std::string& s) {
  if (s == "json") return Format::json;
  if (s == "csv") return Format::csv;
  if (s == "markdown" || s == "md") return Format::markdown;
  throw ValidationError("format", "unknown format '" + s + "' (json, csv, markdown)");
}

inline std::string rcm_csv(const BenchmarkReport& r) {
  std::string out = "method,layout,status,trials";
  for (auto m : stats::kMetrics) out += "," + stats::to_string(m);
  out += "\n";
  for (const auto& c : r.cells) {
    out += c.method.str() + "," + to_string(c.layout) + "," + (c.rcm ? "ok" : "failed") + ",";
    if (!c.rcm) {
      out += "0,NA,NA,NA,NA,NA,NA\n";
      continue;
    }
    const auto& x = *c.rcm;
    out += std::to_string(x.ingredients.N) + "," + io::fmt_double(x.r_haza) + "," + stats::opt_csv(x.r_extra_human) +
           "," + io::fmt_double(x.r_dist) + "," + io::fmt_double(x.r_dec) + "," + io::fmt_double(x.r_extra_robot) +
           "," + io::fmt_double(x.r_succ) + "\n";
  }
  return out;
}

inline std::string method_csv(const BenchmarkReport& r) {
  std::string out = "method,trials";
  for (auto m : stats::kMetrics) out += "," + stats::to_string(m);
  out += ",median_min_distance\n";
  for (const auto& s : r.per_method)
    out += s.method.str() + "," + std::to_string(s.trials) + "," + io::fmt_double(s.r_haza) + "," +
           stats::opt_csv(s.r_extra_human) + "," + io::fmt_double(s.r_dist) + "," + io::fmt_double(s.r_dec) + "," +
           io::fmt_double(s.r_extra_robot) + "," + io::fmt_double(s.r_succ) + "," +
           stats::opt_csv(s.median_min_distance) + "\n";
  return out;
}

inline std::string hcm_csv(const HcmSection& h) {
  std::string out = "method,n";
  for (auto f : rosas::kFactors) out += "," + rosas::to_string(f) + "_mean," + rosas::to_string(f) + "_se";
  out += "\n";
  for (const auto& [m, a] : h.per_method) {
    out += m.str() + "," + std::to_string(a.n);
    for (auto f : rosas::kFactors) out += "," + io::fmt_double(a.get(f).mean) + "," + stats::opt_csv(a.get(f).se);
    out += "\n";
  }
  return out;
}

namespace detail {

inline std::string bar(double v) {
  const int filled = static_cast<int>(std::lround(std::clamp(v, 0.0, 1.0) * 10));
  std::string s;
  for (int i = 0; i < 10; ++i) s += i < filled ? "#" : ".";
  return s;
}

inline std::string opt3(const std::optional<double>& v) { return v ? fmt3(*v) : "n/a"; }

}  // namespace detail

inline std::string markdown(const BenchmarkReport& r) {
  using detail::fmt3;
  using detail::opt3;
  std::string md = "# Benchmark report\n\n";
  md += "plan `" + r.provenance.plan_hash + "`, code " + r.provenance.code_version + ", pedestrian " +
        r.provenance.ped_mode + ", " + std::to_string(r.provenance.seeds.size()) + " seeds\n\n";
  md += "## Robot-centered metrics by method\n\n";
  md += "| Method | Trials | R_haza | R^h_extra | R_dist | R_dec | R^r_extra | R_succ | median min dist (m) |\n";
  md += "|---|---|---|---|---|---|---|---|---|\n";
  for (const auto& s : r.per_method)
    md += "| " + s.method.str() + " | " + std::to_string(s.trials) + " | " + fmt3(s.r_haza) + " | " +
          opt3(s.r_extra_human) + " | " + fmt3(s.r_dist) + " | " + fmt3(s.r_dec) + " | " + fmt3(s.r_extra_robot) +
          " | " + fmt3(s.r_succ) + " | " + opt3(s.median_min_distance) + " |\n";
  md += "\n## Cells\n\n| Method | Layout | Status | R^r_extra | R_dist | R_succ |\n|---|---|---|---|---|---|\n";
  for (const auto& c : r.cells) {
    if (c.rcm)
      md += "| " + c.method.str() + " | " + to_string(c.layout) + " | ok | " + fmt3(c.rcm->r_extra_robot) + " | " +
            fmt3(c.rcm->r_dist) + " | " + fmt3(c.rcm->r_succ) + " |\n";
    else
      md += "| " + c.method.str() + " | " + to_string(c.layout) + " | failed: " + c.failure.value_or("") +
            " | | | |\n";
  }
  md += "\n## Questionnaire factors (normalized, mean ± SE)\n\n";
  md += "| Method | Warmth | Competence | Discomfort |\n|---|---|---|---|\n";
  std::set<MethodId> rows;
  for (const auto& s : r.per_method) rows.insert(s.method);
  if (r.hcm)
    for (const auto& [m, _] : r.hcm->per_method) rows.insert(m);
  for (const auto& m : rows) {
    md += "| " + m.str();
    const rosas::HcmAggregate* a = nullptr;
    if (r.hcm && r.hcm->per_method.count(m)) a = &r.hcm->per_method.at(m);
    for (auto f : rosas::kFactors) {
      if (!a) {
        md += " | n/a";
        continue;
      }
      const auto& ms = a->get(f);
      md += " | `" + detail::bar(ms.mean) + "` " + fmt3(ms.mean) + (ms.se ? " ± " + fmt3(*ms.se) : "");
    }
    md += " |\n";
  }
  if (r.hcm) {
    md += "\nCronbach's alpha:";
    for (const auto& [f, a] : r.hcm->alpha)
      md += " " + rosas::to_string(f) + " " + opt3(a) +
            (a && rosas::high_internal_consistency(*a) ? " (high)" : "") + ";";
    md += "\n";
    for (const auto& w : r.hcm->warnings) md += "\n- warning: " + w;
    md += "\n";
  }
  if (!r.anova.empty()) {
    md += "\n## One-way ANOVA across methods\n\n| Measure | df | F | p |\n|---|---|---|---|\n";
    for (const auto& [name, a] : r.anova)
      md += "| " + name + " | " + std::to_string(a.df_between) + ", " + std::to_string(a.df_within) + " | " +
            (std::isfinite(a.f_value) ? fmt3(a.f_value) : std::string("inf")) + " | " + fmt3(a.p_value) + " |\n";
  }
  if (r.correlation) {
    md += "\n## Pearson correlation, factors vs metrics\n\n| Factor";
    for (auto m : stats::kMetrics) md += " | " + stats::to_string(m);
    md += " |\n|---|---|---|---|---|---|---|\n";
    for (auto f : rosas::kFactors) {
      md += "| " + rosas::to_string(f);
      for (auto m : stats::kMetrics) md += " | " + opt3(r.correlation->at(f, m));
      md += " |\n";
    }
  }
  if (!r.trend.empty()) {
    md += "\n## Trend checks (informational)\n\n";
    for (const auto& t : r.trend)
      md += "- " + std::string(t.holds ? "holds" : "diverges") + ": " + t.expected + "; observed " + t.observed + "\n";
  }
  return md;
}

/// Writes the report in `format` under `dir`; returns the files written.
inline std::vector<fs::path> export_report(const BenchmarkReport& r, const fs::path& dir, Format format) {
  std::vector<fs::path> written;
  auto put = [&](const std::string& name, const std::string& text) {
    io::write_file_atomic(dir / name, text);
    written.push_back(dir / name);
  };
  switch (format) {
    case Format::json: put("report.json", to_json(r).dump(2) + "\n"); break;
    case Format::csv:
      put("rcm.csv", rcm_csv(r));
      put("rcm_by_method.csv", method_csv(r));
      put("anova.csv", stats::anova_csv(r.anova));
      if (r.hcm) put("hcm.csv", hcm_csv(*r.hcm));
      if (r.correlation) put("correlation.csv", stats::correlation_csv(*r.correlation));
      break;
    case Format::markdown: put("report.md", markdown(r)); break;
  }
  return written;
}

}  // namespace socnav::bench
