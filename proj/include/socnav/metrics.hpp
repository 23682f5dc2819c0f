#pragma once

// The six robot-centered metrics, computed from trial and baseline logs.

#include <cmath>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "socnav/simworld.hpp"

namespace socnav::metrics {

class MetricError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline double robot_extra_time_ratio(double T_r, double T_rh) {
  if (!(T_r > 0) || !(T_rh > 0)) throw MetricError("robot extra time ratio: times must be > 0");
  return T_r / T_rh;
}

inline double human_extra_time_ratio(double T_h, double T_hr) {
  if (!(T_h > 0) || !(T_hr > 0)) throw MetricError("human extra time ratio: times must be > 0");
  return T_h / T_hr;
}

inline double extra_distance_ratio(double D_r, double D_rh) {
  if (!(D_r > 0) || !(D_rh > 0)) throw MetricError("extra distance ratio: distances must be > 0");
  return D_r / D_rh;
}

/// A trial succeeds when it completed without any contact.
inline bool trial_succeeded(const sim::TrialLog& log) { return log.completed && log.collision_count == 0; }

inline double success_ratio(std::span<const sim::TrialLog> logs) {
  if (logs.empty()) throw MetricError("success ratio: no trials");
  std::size_t ok = 0;
  for (const auto& l : logs) ok += trial_succeeded(l) ? 1 : 0;
  return static_cast<double>(ok) / static_cast<double>(logs.size());
}

struct PersonExposure {
  double T_hazard = 0.0;  // s closer than d_safe
  double T_social = 0.0;  // s closer than d_social

  bool operator==(const PersonExposure&) const = default;
};

/// Per-person time spent inside the safe and social distances (body clearance).
inline std::vector<PersonExposure> exposure(const sim::TrialLog& log, double d_safe, double d_social) {
  if (!(d_safe < d_social)) throw MetricError("hazard ratio: d_safe must be < d_social");
  std::vector<std::size_t> hazard(log.human_count(), 0);
  std::vector<std::size_t> social(log.human_count(), 0);
  for (const auto& s : log.samples) {
    for (std::size_t i = 0; i < s.humans.size(); ++i) {
      const double gap = sim::clearance(s.robot.position, s.humans[i].position, log.radii.r_robot, log.radii.r_human);
      hazard[i] += gap < d_safe ? 1 : 0;
      social[i] += gap < d_social ? 1 : 0;
    }
  }
  std::vector<PersonExposure> out;
  for (std::size_t i = 0; i < hazard.size(); ++i)
    out.push_back({log.dt * static_cast<double>(hazard[i]), log.dt * static_cast<double>(social[i])});
  return out;
}

/// Mean T_hazard / T_social over persons with T_social > 0; 0 if there are none.
inline double hazard_ratio(std::span<const PersonExposure> persons) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& p : persons) {
    if (p.T_social > 0) {
      sum += p.T_hazard / p.T_social;
      ++n;
    }
  }
  return n == 0 ? 0.0 : sum / static_cast<double>(n);
}

inline double hazard_ratio(const sim::TrialLog& log, double d_safe, double d_social) {
  const auto e = exposure(log, d_safe, d_social);
  return hazard_ratio(e);
}

struct DecelerationSamples {
  std::size_t count = 0;      // ticks with some person closer than d_social
  double ratio_sum = 0.0;     // sum of speed / v_max over those ticks

  bool operator==(const DecelerationSamples&) const = default;
  double ratio() const { return count == 0 ? 1.0 : ratio_sum / static_cast<double>(count); }
};

inline DecelerationSamples deceleration_samples(const sim::TrialLog& log, double d_social, double v_max) {
  if (!(v_max > 0)) throw MetricError("deceleration ratio: v_max must be > 0");
  DecelerationSamples out;
  for (const auto& s : log.samples) {
    bool near = false;
    for (const auto& h : s.humans)
      near = near || sim::clearance(s.robot.position, h.position, log.radii.r_robot, log.radii.r_human) < d_social;
    if (near) {
      ++out.count;
      out.ratio_sum += s.robot.speed / v_max;
    }
  }
  return out;
}

/// Mean speed / v_max over ticks near a person; 1 when never near anyone.
inline double deceleration_ratio(const sim::TrialLog& log, double d_social, double v_max) {
  return deceleration_samples(log, d_social, v_max).ratio();
}

/// Raw ingredients of one trial.
struct TrialIngredients {
  double T_rh = 0.0;
  std::optional<double> T_hr;
  double D_rh = 0.0;
  bool success = false;
  std::vector<PersonExposure> per_person;
  DecelerationSamples dec;

  bool operator==(const TrialIngredients&) const = default;
};

struct Ingredients {
  double T_r = 0.0;
  double T_h = 0.0;
  double D_r = 0.0;
  std::size_t N_succ = 0;
  std::size_t N = 0;
  std::vector<TrialIngredients> trials;

  bool operator==(const Ingredients&) const = default;
};

struct RcmReport {
  double r_extra_robot = 0.0;
  std::optional<double> r_extra_human;  // absent when no pedestrian finished
  double r_dist = 0.0;
  double r_succ = 0.0;
  double r_haza = 0.0;
  double r_dec = 0.0;
  Ingredients ingredients;

  bool operator==(const RcmReport&) const = default;
};

/// Per-trial values of the six metrics, the unit the statistics work on.
struct TrialMetrics {
  double r_extra_robot = 0.0;
  std::optional<double> r_extra_human;
  double r_dist = 0.0;
  double r_succ = 0.0;  // 1 for a successful trial, else 0
  double r_haza = 0.0;
  double r_dec = 0.0;
};

inline TrialMetrics trial_metrics(const Ingredients& ing, const TrialIngredients& t) {
  TrialMetrics m;
  m.r_extra_robot = robot_extra_time_ratio(ing.T_r, t.T_rh);
  if (t.T_hr) m.r_extra_human = human_extra_time_ratio(ing.T_h, *t.T_hr);
  m.r_dist = extra_distance_ratio(ing.D_r, t.D_rh);
  m.r_succ = t.success ? 1.0 : 0.0;
  m.r_haza = hazard_ratio(t.per_person);
  m.r_dec = t.dec.ratio();
  return m;
}

/// Aggregates ingredients into the six ratios (arithmetic means over trials;
/// success as N_succ / N).
inline RcmReport aggregate(Ingredients ing) {
  if (ing.trials.empty()) throw MetricError("compute_rcm: no trials");
  RcmReport r;
  double human_sum = 0.0;
  std::size_t human_n = 0;
  for (const auto& t : ing.trials) {
    const auto m = trial_metrics(ing, t);
    r.r_extra_robot += m.r_extra_robot;
    r.r_dist += m.r_dist;
    r.r_haza += m.r_haza;
    r.r_dec += m.r_dec;
    if (m.r_extra_human) {
      human_sum += *m.r_extra_human;
      ++human_n;
    }
  }
  const auto n = static_cast<double>(ing.trials.size());
  r.r_extra_robot /= n;
  r.r_dist /= n;
  r.r_haza /= n;
  r.r_dec /= n;
  if (human_n > 0) r.r_extra_human = human_sum / static_cast<double>(human_n);
  r.r_succ = static_cast<double>(ing.N_succ) / static_cast<double>(ing.N);
  r.ingredients = std::move(ing);
  return r;
}

inline TrialIngredients trial_ingredients(const sim::TrialLog& log, const ScenarioConfig& cfg) {
  TrialIngredients t;
  t.T_rh = log.robot_task_time;
  t.T_hr = log.human_task_time;
  t.D_rh = log.robot_path_length;
  t.success = trial_succeeded(log);
  t.per_person = exposure(log, cfg.d_safe, cfg.d_social);
  t.dec = deceleration_samples(log, cfg.d_social, cfg.v_max_robot);
  return t;
}

inline RcmReport compute_rcm(std::span<const sim::TrialLog> trials, const sim::TrialLog& baseline,
                             double human_baseline_time, const ScenarioConfig& cfg) {
  if (trials.empty()) throw MetricError("compute_rcm: no trials");
  if (baseline.human_count() != 0) throw MetricError("compute_rcm: baseline must be human-free");
  Ingredients ing;
  ing.T_r = baseline.robot_task_time;
  ing.D_r = baseline.robot_path_length;
  ing.T_h = human_baseline_time;
  ing.N = trials.size();
  for (const auto& log : trials) {
    ing.trials.push_back(trial_ingredients(log, cfg));
    ing.N_succ += ing.trials.back().success ? 1 : 0;
  }
  return aggregate(std::move(ing));
}

// --- JSON -------------------------------------------------------------------

inline nlohmann::json opt_json(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

inline std::optional<double> opt_from(const nlohmann::json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<double>();
}

inline nlohmann::json to_json(const RcmReport& r) {
  nlohmann::json trials = nlohmann::json::array();
  for (const auto& t : r.ingredients.trials) {
    nlohmann::json persons = nlohmann::json::array();
    for (const auto& p : t.per_person) persons.push_back({{"T_hazard", p.T_hazard}, {"T_social", p.T_social}});
    trials.push_back({{"T_rh", t.T_rh},
                      {"T_hr", opt_json(t.T_hr)},
                      {"D_rh", t.D_rh},
                      {"success", t.success},
                      {"per_person", persons},
                      {"dec_samples", t.dec.count},
                      {"dec_ratio_sum", t.dec.ratio_sum}});
  }
  return {{"r_extra_robot", r.r_extra_robot},
          {"r_extra_human", opt_json(r.r_extra_human)},
          {"r_dist", r.r_dist},
          {"r_succ", r.r_succ},
          {"r_haza", r.r_haza},
          {"r_dec", r.r_dec},
          {"ingredients",
           {{"T_r", r.ingredients.T_r},
            {"T_h", r.ingredients.T_h},
            {"D_r", r.ingredients.D_r},
            {"N_succ", r.ingredients.N_succ},
            {"N", r.ingredients.N},
            {"trials", trials}}}};
}

inline RcmReport rcm_from_json(const nlohmann::json& j) {
  RcmReport r;
  r.r_extra_robot = j.at("r_extra_robot").get<double>();
  r.r_extra_human = opt_from(j.at("r_extra_human"));
  r.r_dist = j.at("r_dist").get<double>();
  r.r_succ = j.at("r_succ").get<double>();
  r.r_haza = j.at("r_haza").get<double>();
  r.r_dec = j.at("r_dec").get<double>();
  const auto& ing = j.at("ingredients");
  r.ingredients.T_r = ing.at("T_r").get<double>();
  r.ingredients.T_h = ing.at("T_h").get<double>();
  r.ingredients.D_r = ing.at("D_r").get<double>();
  r.ingredients.N_succ = ing.at("N_succ").get<std::size_t>();
  r.ingredients.N = ing.at("N").get<std::size_t>();
  for (const auto& t : ing.at("trials")) {
    TrialIngredients ti;
    ti.T_rh = t.at("T_rh").get<double>();
    ti.T_hr = opt_from(t.at("T_hr"));
    ti.D_rh = t.at("D_rh").get<double>();
    ti.success = t.at("success").get<bool>();
    for (const auto& p : t.at("per_person"))
      ti.per_person.push_back({p.at("T_hazard").get<double>(), p.at("T_social").get<double>()});
    ti.dec.count = t.at("dec_samples").get<std::size_t>();
    ti.dec.ratio_sum = t.at("dec_ratio_sum").get<double>();
    r.ingredients.trials.push_back(std::move(ti));
  }
  return r;
}

/// Column names of the metric tables, in the order the reports print them.
inline constexpr const char* kMetricNames[6] = {"r_haza", "r_extra_human", "r_dist", "r_dec", "r_extra_robot", "r_succ"};

}  // namespace socnav::metrics
