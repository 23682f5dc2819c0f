#pragma once

// One-way ANOVA with exact F tail probabilities, Pearson correlation and the
// factor-by-metric correlation table.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "socnav/metrics.hpp"
#include "socnav/rosas.hpp"
#include "socnav/trial_io.hpp"

namespace socnav::stats {

namespace detail {

// Continued fraction for the incomplete beta, modified Lentz.
inline double beta_cf(double a, double b, double x) {
  constexpr int kMaxIter = 1000;
  constexpr double kEps = 1e-16;
  constexpr double kTiny = 1e-300;
  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < kEps) return h;
  }
  return h;
}

}  // namespace detail

/// Regularized incomplete beta I_x(a, b).
inline double incomplete_beta(double a, double b, double x) {
  if (!(a > 0) || !(b > 0)) throw std::invalid_argument("incomplete_beta: a, b must be > 0");
  if (!(x >= 0.0 && x <= 1.0)) throw std::invalid_argument("incomplete_beta: x outside [0, 1]");
  if (x == 0.0) return 0.0;
  if (x == 1.0) return 1.0;
  const double ln_front =
      std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(ln_front);
  // The fraction converges fast for x < (a+1)/(a+b+2); use symmetry otherwise.
  if (x < (a + 1.0) / (a + b + 2.0)) return front * detail::beta_cf(a, b, x) / a;
  return 1.0 - front * detail::beta_cf(b, a, 1.0 - x) / b;
}

/// P(F > f) for F with (d1, d2) degrees of freedom.
inline double f_upper_tail(double f, double d1, double d2) {
  if (!(d1 > 0) || !(d2 > 0)) throw std::invalid_argument("f_upper_tail: dfs must be > 0");
  if (std::isnan(f)) throw std::invalid_argument("f_upper_tail: F is NaN");
  if (f <= 0.0) return 1.0;
  if (std::isinf(f)) return 0.0;
  return incomplete_beta(d2 / 2.0, d1 / 2.0, d2 / (d2 + d1 * f));
}

struct AnovaResult {
  double ss_between = 0.0;
  double ss_within = 0.0;
  int df_between = 0;
  int df_within = 0;
  double f_value = 0.0;
  double p_value = 1.0;

  bool operator==(const AnovaResult&) const = default;
};

inline AnovaResult one_way_anova(const std::vector<std::vector<double>>& groups) {
  if (groups.size() < 2) throw std::invalid_argument("one_way_anova: need >= 2 groups");
  double grand = 0.0;
  std::size_t n = 0;
  for (const auto& g : groups) {
    if (g.size() < 2) throw std::invalid_argument("one_way_anova: every group needs >= 2 samples");
    for (double x : g) {
      if (!std::isfinite(x)) throw std::invalid_argument("one_way_anova: non-finite sample");
      grand += x;
    }
    n += g.size();
  }
  grand /= static_cast<double>(n);
  AnovaResult r;
  for (const auto& g : groups) {
    double mean = 0.0;
    for (double x : g) mean += x;
    mean /= static_cast<double>(g.size());
    r.ss_between += static_cast<double>(g.size()) * (mean - grand) * (mean - grand);
    for (double x : g) r.ss_within += (x - mean) * (x - mean);
  }
  r.df_between = static_cast<int>(groups.size()) - 1;
  r.df_within = static_cast<int>(n - groups.size());
  if (r.ss_between == 0.0) {
    r.f_value = 0.0;
    r.p_value = 1.0;
  } else if (r.ss_within == 0.0) {
    r.f_value = std::numeric_limits<double>::infinity();
    r.p_value = 0.0;
  } else {
    r.f_value = (r.ss_between / r.df_between) / (r.ss_within / r.df_within);
    r.p_value = f_upper_tail(r.f_value, r.df_between, r.df_within);
  }
  return r;
}

class UndefinedCorrelation : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

inline double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw std::invalid_argument("pearson: length mismatch");
  if (x.size() < 2) throw std::invalid_argument("pearson: need >= 2 pairs");
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (!(sxx > 0.0) || !(syy > 0.0)) throw UndefinedCorrelation("undefined correlation: zero variance");
  const double r = sxy / std::sqrt(sxx * syy);
  return std::clamp(r, -1.0, 1.0);
}

// --- correlation table --------------------------------------------------------

/// The six metrics in table column order.
enum class Metric { r_haza, r_extra_human, r_dist, r_dec, r_extra_robot, r_succ };

inline constexpr std::array<Metric, 6> kMetrics{Metric::r_haza, Metric::r_extra_human, Metric::r_dist,
                                                Metric::r_dec,  Metric::r_extra_robot, Metric::r_succ};

inline std::string to_string(Metric m) { return metrics::kMetricNames[static_cast<int>(m)]; }

inline std::optional<double> metric_value(const metrics::TrialMetrics& t, Metric m) {
  switch (m) {
    case Metric::r_haza: return t.r_haza;
    case Metric::r_extra_human: return t.r_extra_human;
    case Metric::r_dist: return t.r_dist;
    case Metric::r_dec: return t.r_dec;
    case Metric::r_extra_robot: return t.r_extra_robot;
    case Metric::r_succ: return t.r_succ;
  }
  return std::nullopt;
}

struct RcmRecord {
  std::string participant_id;
  MethodId method;
  metrics::TrialMetrics metrics;
};

struct HcmRecord {
  std::string participant_id;
  MethodId method;
  rosas::FactorScores scores;
};

/// Pearson r per (factor, metric); nullopt marks an undefined correlation.
struct CorrelationTable {
  std::map<std::pair<rosas::Factor, Metric>, std::optional<double>> entries;
  std::size_t pairs = 0;

  std::optional<double> at(rosas::Factor f, Metric m) const { return entries.at({f, m}); }
  bool operator==(const CorrelationTable&) const = default;
};

inline CorrelationTable correlation_table(const std::vector<RcmRecord>& rcm, const std::vector<HcmRecord>& hcm) {
  std::map<std::pair<std::string, MethodId>, const HcmRecord*> by_key;
  for (const auto& h : hcm) by_key[{h.participant_id, h.method}] = &h;
  std::vector<std::pair<const RcmRecord*, const HcmRecord*>> joined;
  for (const auto& r : rcm) {
    const auto it = by_key.find({r.participant_id, r.method});
    if (it != by_key.end()) joined.emplace_back(&r, it->second);
  }
  if (joined.size() < 2) throw std::invalid_argument("correlation_table: join produced fewer than 2 pairs");
  CorrelationTable t;
  t.pairs = joined.size();
  for (auto f : rosas::kFactors) {
    for (auto m : kMetrics) {
      std::vector<double> x, y;
      for (const auto& [r, h] : joined) {
        const auto v = metric_value(r->metrics, m);
        if (!v) continue;
        x.push_back(*v);
        y.push_back(h->scores.get(f));
      }
      std::optional<double> r;
      if (x.size() >= 2) {
        try {
          r = pearson(x, y);
        } catch (const UndefinedCorrelation&) {
        }
      }
      t.entries[{f, m}] = r;
    }
  }
  return t;
}

// --- export -----------------------------------------------------------------

inline std::string opt_csv(const std::optional<double>& v) { return v ? io::fmt_double(*v) : std::string("NA"); }

inline nlohmann::json to_json(const AnovaResult& a) {
  auto num = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json("inf"); };
  return {{"ss_between", a.ss_between}, {"ss_within", a.ss_within}, {"df_between", a.df_between},
          {"df_within", a.df_within},   {"f_value", num(a.f_value)}, {"p_value", a.p_value}};
}

inline AnovaResult anova_from_json(const nlohmann::json& j) {
  AnovaResult a;
  a.ss_between = j.at("ss_between").get<double>();
  a.ss_within = j.at("ss_within").get<double>();
  a.df_between = j.at("df_between").get<int>();
  a.df_within = j.at("df_within").get<int>();
  a.f_value = j.at("f_value").is_string() ? std::numeric_limits<double>::infinity() : j.at("f_value").get<double>();
  a.p_value = j.at("p_value").get<double>();
  return a;
}

/// Rows: measure names; columns as in an ANOVA table.
inline std::string anova_csv(const std::vector<std::pair<std::string, AnovaResult>>& rows) {
  std::string out = "measure,sum_sq_between,sum_sq_within,df_between,df_within,f_value,p_value\n";
  for (const auto& [name, a] : rows)
    out += name + "," + io::fmt_double(a.ss_between) + "," + io::fmt_double(a.ss_within) + "," +
           std::to_string(a.df_between) + "," + std::to_string(a.df_within) + "," + io::fmt_double(a.f_value) + "," +
           io::fmt_double(a.p_value) + "\n";
  return out;
}

inline nlohmann::json to_json(const CorrelationTable& t) {
  nlohmann::json rows = nlohmann::json::object();
  for (auto f : rosas::kFactors) {
    nlohmann::json row = nlohmann::json::object();
    for (auto m : kMetrics) {
      const auto v = t.at(f, m);
      row[to_string(m)] = v ? nlohmann::json(*v) : nlohmann::json(nullptr);
    }
    rows[rosas::to_string(f)] = row;
  }
  return {{"pairs", t.pairs}, {"rows", rows}};
}

inline CorrelationTable correlation_from_json(const nlohmann::json& j) {
  CorrelationTable t;
  t.pairs = j.at("pairs").get<std::size_t>();
  for (auto f : rosas::kFactors)
    for (auto m : kMetrics) {
      const auto& v = j.at("rows").at(rosas::to_string(f)).at(to_string(m));
      t.entries[{f, m}] = v.is_null() ? std::nullopt : std::optional<double>(v.get<double>());
    }
  return t;
}

/// Rows warmth/competence/discomfort, one column per metric; NA = undefined.
inline std::string correlation_csv(const CorrelationTable& t) {
  std::string out = "factor";
  for (auto m : kMetrics) out += "," + to_string(m);
  out += "\n";
  for (auto f : rosas::kFactors) {
    out += rosas::to_string(f);
    for (auto m : kMetrics) out += "," + opt_csv(t.at(f, m));
    out += "\n";
  }
  return out;
}

}  // namespace socnav::stats
