#pragma once

// RoSAS questionnaire: 18 adjectives rated 1..9, scored as three six-item
// factor means. Item identifiers are the lowercase adjectives.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "socnav/scenario.hpp"
#include "socnav/trial_io.hpp"

namespace socnav::rosas {

enum class Factor { warmth, competence, discomfort };

inline constexpr std::array<Factor, 3> kFactors{Factor::warmth, Factor::competence, Factor::discomfort};

inline std::string to_string(Factor f) {
  switch (f) {
    case Factor::warmth: return "warmth";
    case Factor::competence: return "competence";
    case Factor::discomfort: return "discomfort";
  }
  return "warmth";
}

using ItemList = std::array<const char*, 6>;

inline constexpr ItemList kWarmth{"happy", "feeling", "social", "organic", "compassionate", "emotional"};
inline constexpr ItemList kCompetence{"capable", "responsive", "interactive", "reliable", "competent", "knowledgeable"};
inline constexpr ItemList kDiscomfort{"scary", "strange", "awkward", "dangerous", "awful", "aggressive"};

inline const ItemList& items_of(Factor f) {
  switch (f) {
    case Factor::warmth: return kWarmth;
    case Factor::competence: return kCompetence;
    case Factor::discomfort: return kDiscomfort;
  }
  return kWarmth;
}

/// All 18 items in roster order (warmth, competence, discomfort).
inline std::vector<std::string> roster() {
  std::vector<std::string> out;
  for (auto f : kFactors)
    for (const char* item : items_of(f)) out.emplace_back(item);
  return out;
}

inline bool is_item(const std::string& name) {
  for (auto f : kFactors)
    for (const char* item : items_of(f))
      if (name == item) return true;
  return false;
}

inline constexpr int kMinScore = 1;
inline constexpr int kMaxScore = 9;

struct RosasResponse {
  std::string participant_id;
  MethodId method;
  std::map<std::string, int> items;

  bool operator==(const RosasResponse&) const = default;
};

struct FactorScores {
  double warmth = 0.0;
  double competence = 0.0;
  double discomfort = 0.0;

  double get(Factor f) const {
    switch (f) {
      case Factor::warmth: return warmth;
      case Factor::competence: return competence;
      case Factor::discomfort: return discomfort;
    }
    return warmth;
  }
  bool operator==(const FactorScores&) const = default;
};

/// Rejection carrying one message per offending item.
class ResponseError : public ValidationError {
 public:
  ResponseError(std::vector<std::string> problems, std::string first_item)
      : ValidationError(std::move(first_item), join(problems)), problems_(std::move(problems)) {}
  const std::vector<std::string>& problems() const noexcept { return problems_; }

 private:
  static std::string join(const std::vector<std::string>& p) {
    std::string out;
    for (const auto& s : p) out += (out.empty() ? "" : "; ") + s;
    return out;
  }
  std::vector<std::string> problems_;
};

/// Item-level problems with a response; empty when valid.
inline std::vector<std::pair<std::string, std::string>> problems(const RosasResponse& r) {
  std::vector<std::pair<std::string, std::string>> out;
  if (r.participant_id.empty()) out.emplace_back("participant_id", "participant_id is empty");
  for (const auto& item : roster()) {
    const auto it = r.items.find(item);
    if (it == r.items.end())
      out.emplace_back(item, "missing item '" + item + "'");
    else if (it->second < kMinScore || it->second > kMaxScore)
      out.emplace_back(item, "item '" + item + "' score " + std::to_string(it->second) + " outside 1..9");
  }
  for (const auto& [name, score] : r.items)
    if (!is_item(name)) out.emplace_back(name, "unknown item '" + name + "'");
  return out;
}

inline void validate(const RosasResponse& r) {
  const auto p = problems(r);
  if (p.empty()) return;
  std::vector<std::string> msgs;
  for (const auto& [item, msg] : p) msgs.push_back(msg);
  throw ResponseError(std::move(msgs), p.front().first);
}

inline FactorScores score_response(const RosasResponse& r) {
  validate(r);
  auto mean = [&](Factor f) {
    int sum = 0;
    for (const char* item : items_of(f)) sum += r.items.at(item);
    return static_cast<double>(sum) / 6.0;
  };
  return {mean(Factor::warmth), mean(Factor::competence), mean(Factor::discomfort)};
}

inline double normalize_factor(double score) {
  if (!(score >= kMinScore && score <= kMaxScore))
    throw ValidationError("score", "factor score " + io::fmt_double(score) + " outside [1, 9]");
  return (score - 1.0) / 8.0;
}

inline FactorScores normalize(const FactorScores& s) {
  return {normalize_factor(s.warmth), normalize_factor(s.competence), normalize_factor(s.discomfort)};
}

class UndefinedAlpha : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Cronbach's alpha over a respondents x items matrix, sample (n-1) variances.
inline double cronbach_alpha(const std::vector<std::vector<double>>& rows) {
  if (rows.size() < 2) throw std::invalid_argument("cronbach_alpha: need >= 2 respondents");
  const std::size_t k = rows.front().size();
  if (k < 2) throw std::invalid_argument("cronbach_alpha: need >= 2 items");
  for (const auto& r : rows)
    if (r.size() != k) throw std::invalid_argument("cronbach_alpha: ragged item matrix");
  const double n = static_cast<double>(rows.size());

  auto variance = [&](auto value) {
    double mean = 0.0;
    for (const auto& r : rows) mean += value(r);
    mean /= n;
    double ss = 0.0;
    for (const auto& r : rows) ss += (value(r) - mean) * (value(r) - mean);
    return ss / (n - 1.0);
  };
  double item_var = 0.0;
  for (std::size_t j = 0; j < k; ++j) item_var += variance([j](const std::vector<double>& r) { return r[j]; });
  const double total_var = variance([](const std::vector<double>& r) {
    double s = 0.0;
    for (double v : r) s += v;
    return s;
  });
  if (!(total_var > 0.0)) throw UndefinedAlpha("undefined alpha: total score variance is zero");
  const double kd = static_cast<double>(k);
  return kd / (kd - 1.0) * (1.0 - item_var / total_var);
}

inline constexpr double kHighConsistency = 0.90;

/// "more than 0.90": strictly above the threshold.
inline bool high_internal_consistency(double alpha) { return alpha > kHighConsistency; }

/// Alpha of one factor's six items across the given responses.
inline double factor_alpha(const std::vector<RosasResponse>& responses, Factor f) {
  std::vector<std::vector<double>> rows;
  for (const auto& r : responses) {
    validate(r);
    std::vector<double> row;
    for (const char* item : items_of(f)) row.push_back(r.items.at(item));
    rows.push_back(std::move(row));
  }
  return cronbach_alpha(rows);
}

struct MeanSe {
  double mean = 0.0;
  std::optional<double> se;  // absent with a single sample

  bool operator==(const MeanSe&) const = default;
};

inline MeanSe mean_se(const std::vector<double>& xs) {
  if (xs.empty()) throw std::invalid_argument("mean_se: empty group");
  const double n = static_cast<double>(xs.size());
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= n;
  if (xs.size() < 2) return {mean, std::nullopt};
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / (n - 1.0)) / std::sqrt(n)};
}

struct HcmAggregate {
  std::size_t n = 0;
  MeanSe warmth;
  MeanSe competence;
  MeanSe discomfort;

  const MeanSe& get(Factor f) const {
    switch (f) {
      case Factor::warmth: return warmth;
      case Factor::competence: return competence;
      case Factor::discomfort: return discomfort;
    }
    return warmth;
  }
  bool operator==(const HcmAggregate&) const = default;
};

/// Normalized factor means and standard errors grouped by method.
inline std::map<MethodId, HcmAggregate> aggregate_hcm(const std::vector<RosasResponse>& responses) {
  if (responses.empty()) throw std::invalid_argument("aggregate_hcm: no responses");
  std::map<MethodId, std::array<std::vector<double>, 3>> groups;
  for (const auto& r : responses) {
    const auto s = normalize(score_response(r));
    auto& g = groups[r.method];
    g[0].push_back(s.warmth);
    g[1].push_back(s.competence);
    g[2].push_back(s.discomfort);
  }
  std::map<MethodId, HcmAggregate> out;
  for (const auto& [m, g] : groups) out[m] = {g[0].size(), mean_se(g[0]), mean_se(g[1]), mean_se(g[2])};
  return out;
}

// --- files ------------------------------------------------------------------

inline nlohmann::json to_json(const RosasResponse& r) {
  nlohmann::json items = nlohmann::json::object();
  for (const auto& [k, v] : r.items) items[k] = v;
  return {{"participant_id", r.participant_id}, {"method", r.method.str()}, {"items", items}};
}

inline nlohmann::json to_json(const FactorScores& s) {
  return {{"warmth", s.warmth}, {"competence", s.competence}, {"discomfort", s.discomfort}};
}

inline nlohmann::json to_json(const MeanSe& m) {
  return {{"mean", m.mean}, {"se", m.se ? nlohmann::json(*m.se) : nlohmann::json(nullptr)}};
}

inline nlohmann::json to_json(const HcmAggregate& a) {
  return {{"n", a.n}, {"warmth", to_json(a.warmth)}, {"competence", to_json(a.competence)},
          {"discomfort", to_json(a.discomfort)}};
}

inline MeanSe mean_se_from_json(const nlohmann::json& j) {
  MeanSe m{j.at("mean").get<double>(), std::nullopt};
  if (!j.at("se").is_null()) m.se = j.at("se").get<double>();
  return m;
}

inline HcmAggregate hcm_from_json(const nlohmann::json& j) {
  return {j.at("n").get<std::size_t>(), mean_se_from_json(j.at("warmth")), mean_se_from_json(j.at("competence")),
          mean_se_from_json(j.at("discomfort"))};
}

/// Parses one response object, validating it. Errors carry item names.
inline RosasResponse response_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ValidationError("response", "must be an object");
  RosasResponse r;
  if (!j.contains("participant_id") || !j.at("participant_id").is_string())
    throw ValidationError("participant_id", "participant_id must be a string");
  if (!j.contains("method") || !j.at("method").is_string())
    throw ValidationError("method", "method must be a string");
  if (!j.contains("items") || !j.at("items").is_object()) throw ValidationError("items", "items must be an object");
  r.participant_id = j.at("participant_id").get<std::string>();
  r.method = MethodId::parse(j.at("method").get<std::string>());
  for (const auto& [k, v] : j.at("items").items()) {
    if (!v.is_number_integer()) throw ValidationError(k, "item '" + k + "' must be an integer");
    r.items[k] = v.get<int>();
  }
  validate(r);
  return r;
}

inline std::string responses_csv(const std::vector<RosasResponse>& rs) {
  std::string out = "participant_id,method";
  const auto items = roster();
  for (const auto& i : items) out += "," + i;
  out += "\n";
  for (const auto& r : rs) {
    out += r.participant_id + "," + r.method.str();
    for (const auto& i : items) out += "," + std::to_string(r.items.at(i));
    out += "\n";
  }
  return out;
}

class ImportError : public std::invalid_argument {
 public:
  ImportError(std::size_t row, const std::string& what)
      : std::invalid_argument("row " + std::to_string(row) + ": " + what), row_(row) {}
  std::size_t row() const noexcept { return row_; }

 private:
  std::size_t row_;
};

/// CSV: participant_id, method, then the 18 item columns in any order.
/// Row numbers count the header as row 1.
inline std::vector<RosasResponse> parse_responses_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw ImportError(1, "empty file");
  const auto header = io::split(line);
  if (header.size() < 2 || header[0] != "participant_id" || header[1] != "method")
    throw ImportError(1, "header must start with participant_id,method");
  for (std::size_t c = 2; c < header.size(); ++c)
    if (!is_item(header[c])) throw ImportError(1, "unknown item column '" + header[c] + "'");

  std::vector<RosasResponse> out;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    const auto f = io::split(line);
    if (f.size() != header.size())
      throw ImportError(row, "expected " + std::to_string(header.size()) + " columns, got " + std::to_string(f.size()));
    try {
      RosasResponse r;
      r.participant_id = f[0];
      r.method = MethodId::parse(f[1]);
      for (std::size_t c = 2; c < f.size(); ++c) {
        std::size_t used = 0;
        int v = 0;
        try {
          v = std::stoi(f[c], &used);
        } catch (const std::exception&) {
          used = 0;
        }
        if (used == 0 || used != f[c].size())
          throw ValidationError(header[c], "item '" + header[c] + "' is not an integer: '" + f[c] + "'");
        r.items[header[c]] = v;
      }
      validate(r);
      out.push_back(std::move(r));
    } catch (const ValidationError& e) {
      throw ImportError(row, e.what());
    }
  }
  return out;
}

/// JSON: an array of response objects (or {"responses": [...]}).
inline std::vector<RosasResponse> parse_responses_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ImportError(0, std::string("malformed JSON: ") + e.what());
  }
  if (j.is_object() && j.contains("responses")) j = j.at("responses");
  if (!j.is_array()) throw ImportError(0, "expected an array of responses");
  std::vector<RosasResponse> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    try {
      out.push_back(response_from_json(j[i]));
    } catch (const std::invalid_argument& e) {
      throw ImportError(i + 1, e.what());
    }
  }
  return out;
}

inline std::vector<RosasResponse> load_responses(const io::fs::path& path) {
  const auto text = io::read_file(path);
  try {
    if (path.extension() == ".json") return parse_responses_json(text);
    return parse_responses_csv(text);
  } catch (const ImportError& e) {
    throw io::IoError(path, e.what());
  }
}

/// Counterbalancing audit. Presentation position is the order in which a
/// participant's responses appear in the file. Returns human-readable
/// warnings; empty when every method occupies every position equally often.
inline std::vector<std::string> order_balance_warnings(const std::vector<RosasResponse>& rs) {
  std::vector<std::string> warnings;
  std::vector<std::string> participants;
  std::map<std::string, std::vector<MethodId>> order;
  std::map<MethodId, int> method_index;
  for (const auto& r : rs) {
    if (!order.count(r.participant_id)) participants.push_back(r.participant_id);
    auto& o = order[r.participant_id];
    if (std::find(o.begin(), o.end(), r.method) != o.end())
      warnings.push_back("participant " + r.participant_id + " rated " + r.method.str() + " more than once");
    o.push_back(r.method);
    method_index.emplace(r.method, 0);
  }
  const std::size_t m = method_index.size();
  for (const auto& p : participants)
    if (order[p].size() != m)
      warnings.push_back("participant " + p + " rated " + std::to_string(order[p].size()) + " of " +
                         std::to_string(m) + " methods");
  std::map<std::pair<MethodId, std::size_t>, int> counts;
  for (const auto& p : participants)
    for (std::size_t pos = 0; pos < order[p].size(); ++pos) ++counts[{order[p][pos], pos}];
  int lo = -1, hi = -1;
  for (const auto& [method, _] : method_index)
    for (std::size_t pos = 0; pos < m; ++pos) {
      const auto it = counts.find({method, pos});
      const int c = it == counts.end() ? 0 : it->second;
      lo = lo < 0 ? c : std::min(lo, c);
      hi = std::max(hi, c);
    }
  if (hi != lo)
    warnings.push_back("order imbalance: method-position counts range " + std::to_string(lo) + ".." +
                       std::to_string(hi));
  return warnings;
}

/// Seeded presentation order of the 18 items for one participant.
inline std::vector<std::string> presentation_order(std::uint64_t seed) {
  auto items = roster();
  std::mt19937_64 rng(seed);
  for (std::size_t i = items.size() - 1; i > 0; --i) {
    const auto j = static_cast<std::size_t>(rng() % (i + 1));
    std::swap(items[i], items[j]);
  }
  return items;
}

}  // namespace socnav::rosas
