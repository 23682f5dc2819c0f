#pragma once

// TrialLog persistence: one CSV row per tick plus a JSON summary. Doubles are
// written with 17 significant digits so a reload is bit-exact.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "socnav/simworld.hpp"

namespace socnav::io {

namespace fs = std::filesystem;

class IoError : public std::runtime_error {
 public:
  IoError(const fs::path& path, const std::string& what)
      : std::runtime_error(path.string() + ": " + what) {}
};

/// Writes `content` to a sibling temp file and renames it into place.
inline void write_file_atomic(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError(tmp, "cannot open for writing");
    out << content;
    out.flush();
    if (!out) throw IoError(tmp, "write failed");
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw IoError(path, "rename failed: " + ec.message());
}

inline std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path, "cannot open for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline double parse_double(const std::string& s) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str()) throw std::invalid_argument("not a number: '" + s + "'");
  return v;
}

inline std::vector<std::string> split(const std::string& line, char sep = ',') {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

inline std::string trial_stem(const std::string& method, const std::string& layout, std::uint64_t seed) {
  return method + "_" + layout + "_seed" + std::to_string(seed);
}

inline std::string baseline_stem(const std::string& method, const std::string& layout) {
  return method + "_" + layout + "_baseline";
}

inline std::string trial_csv(const sim::TrialLog& log) {
  const std::size_t humans = log.human_count();
  std::string out = "t,robot_x,robot_y,robot_heading,robot_speed,robot_vx,robot_vy";
  for (std::size_t i = 0; i < humans; ++i) {
    const std::string p = "human" + std::to_string(i) + "_";
    out += "," + p + "x," + p + "y," + p + "heading," + p + "speed," + p + "vx," + p + "vy";
  }
  out += ",min_distance,contact,carton_event\n";
  auto state = [](std::string& row, const AgentState& s) {
    for (double v : {s.position.x, s.position.y, s.heading, s.speed, s.velocity.x, s.velocity.y})
      row += "," + fmt_double(v);
  };
  for (const auto& s : log.samples) {
    std::string row = fmt_double(s.t);
    state(row, s.robot);
    double min_gap = std::numeric_limits<double>::infinity();
    bool contact = false;
    for (const auto& h : s.humans) {
      state(row, h);
      if (log.has_robot) {
        min_gap = std::min(min_gap, sim::clearance(s.robot.position, h.position, log.radii.r_robot, log.radii.r_human));
        contact = contact || distance(s.robot.position, h.position) < log.radii.r_robot + log.radii.r_human;
      }
    }
    row += "," + (std::isfinite(min_gap) ? fmt_double(min_gap) : std::string());
    row += std::string(",") + (contact ? "1" : "0");
    row += "," + to_string(s.carton_event) + "\n";
    out += row;
  }
  return out;
}

inline nlohmann::json trial_summary(const sim::TrialLog& log) {
  auto opt = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
  return {
      {"method", log.method},
      {"layout", log.layout},
      {"ped_mode", log.ped_mode},
      {"seed", log.seed},
      {"config_hash", log.config_hash},
      {"dt", log.dt},
      {"r_robot", log.radii.r_robot},
      {"r_human", log.radii.r_human},
      {"has_robot", log.has_robot},
      {"n_humans", log.human_count()},
      {"n_samples", log.samples.size()},
      {"collision_count", log.collision_count},
      {"completed", log.completed},
      {"robot_task_time", log.robot_task_time},
      {"human_task_time", opt(log.human_task_time)},
      {"human_start_time", log.human_start_time},
      {"robot_path_length", log.robot_path_length},
      {"min_human_distance", opt(log.min_human_distance)},
  };
}

inline CartonEvent parse_carton_event(const std::string& s) {
  if (s == "pick") return CartonEvent::pick;
  if (s == "drop") return CartonEvent::drop;
  if (s.empty()) return CartonEvent::none;
  throw std::invalid_argument("unknown carton event '" + s + "'");
}

/// Rebuilds a TrialLog from its CSV text and JSON summary.
inline sim::TrialLog parse_trial(const std::string& csv, const nlohmann::json& summary) {
  sim::TrialLog log;
  auto opt = [&](const char* key) -> std::optional<double> {
    const auto& v = summary.at(key);
    if (v.is_null()) return std::nullopt;
    return v.get<double>();
  };
  log.method = summary.at("method").get<std::string>();
  log.layout = summary.at("layout").get<std::string>();
  log.ped_mode = summary.at("ped_mode").get<std::string>();
  log.seed = summary.at("seed").get<std::uint64_t>();
  log.config_hash = summary.at("config_hash").get<std::string>();
  log.dt = summary.at("dt").get<double>();
  log.radii = {summary.at("r_robot").get<double>(), summary.at("r_human").get<double>()};
  log.has_robot = summary.at("has_robot").get<bool>();
  log.collision_count = summary.at("collision_count").get<int>();
  log.completed = summary.at("completed").get<bool>();
  log.robot_task_time = summary.at("robot_task_time").get<double>();
  log.human_task_time = opt("human_task_time");
  log.human_start_time = summary.at("human_start_time").get<double>();
  log.robot_path_length = summary.at("robot_path_length").get<double>();
  log.min_human_distance = opt("min_human_distance");
  const auto humans = summary.at("n_humans").get<std::size_t>();

  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);  // header
  std::size_t row_no = 1;
  while (std::getline(in, line)) {
    ++row_no;
    if (line.empty()) continue;
    const auto f = split(line);
    const std::size_t expected = 1 + 6 * (humans + 1) + 3;
    if (f.size() != expected)
      throw std::invalid_argument("row " + std::to_string(row_no) + ": expected " + std::to_string(expected) +
                                  " columns, got " + std::to_string(f.size()));
    auto state = [&](std::size_t at) {
      AgentState s;
      s.position = {parse_double(f[at]), parse_double(f[at + 1])};
      s.heading = parse_double(f[at + 2]);
      s.speed = parse_double(f[at + 3]);
      s.velocity = {parse_double(f[at + 4]), parse_double(f[at + 5])};
      return s;
    };
    sim::Sample s;
    s.t = parse_double(f[0]);
    s.robot = state(1);
    for (std::size_t i = 0; i < humans; ++i) s.humans.push_back(state(7 + 6 * i));
    s.carton_event = parse_carton_event(f.back());
    log.samples.push_back(std::move(s));
  }
  if (log.samples.size() != summary.at("n_samples").get<std::size_t>())
    throw std::invalid_argument("sample count does not match summary");
  return log;
}

/// Writes `<dir>/<stem>.csv` and `<dir>/<stem>.json`.
inline void save_trial(const sim::TrialLog& log, const fs::path& dir, const std::string& stem) {
  write_file_atomic(dir / (stem + ".csv"), trial_csv(log));
  write_file_atomic(dir / (stem + ".json"), trial_summary(log).dump(2) + "\n");
}

inline sim::TrialLog load_trial(const fs::path& dir, const std::string& stem) {
  const auto json_path = dir / (stem + ".json");
  const auto csv_path = dir / (stem + ".csv");
  try {
    return parse_trial(read_file(csv_path), nlohmann::json::parse(read_file(json_path)));
  } catch (const IoError&) {
    throw;
  } catch (const std::exception& e) {
    throw IoError(csv_path, e.what());
  }
}

}  // namespace socnav::io
