#pragma once

// Interactive participant sessions: Latin-square method order, a phase
// machine (briefing -> trial -> questionnaire -> ... -> done), live trials
// driven tick by tick, questionnaire collection and a durable on-disk store.
//
// Store layout under the root directory:
//   sessions/<id>/session.json            written at every phase boundary
//   sessions/<id>/trial<k>_<method>.*     live log (csv + json) and inputs
//   responses.csv                         every accepted questionnaire, in order

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "socnav/metrics.hpp"
#include "socnav/rosas.hpp"
#include "socnav/stats.hpp"
#include "socnav/trial_io.hpp"
#include "socnav/wire.hpp"

namespace socnav::gateway {

namespace fs = std::filesystem;
using nlohmann::json;

enum class Phase { briefing, trial, questionnaire, done };

inline std::string to_string(Phase p) {
  switch (p) {
    case Phase::briefing: return "briefing";
    case Phase::trial: return "trial";
    case Phase::questionnaire: return "questionnaire";
    case Phase::done: return "done";
  }
  return "briefing";
}

inline Phase parse_phase(const std::string& s) {
  for (auto p : {Phase::briefing, Phase::trial, Phase::questionnaire, Phase::done})
    if (s == to_string(p)) return p;
  throw ValidationError("phase", "unknown phase '" + s + "'");
}

/// Operation not allowed in the current phase; session state is unchanged.
class PhaseError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class DuplicateParticipant : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class UnknownSession : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IncompleteSession : public std::runtime_error {
 public:
  explicit IncompleteSession(std::vector<std::string> missing)
      : std::runtime_error("session incomplete, missing: " + join(missing)), missing_(std::move(missing)) {}
  const std::vector<std::string>& missing() const noexcept { return missing_; }

 private:
  static std::string join(const std::vector<std::string>& v) {
    std::string out;
    for (const auto& s : v) out += (out.empty() ? "" : ", ") + s;
    return out;
  }
  std::vector<std::string> missing_;
};

/// Definition served to clients: the 18 items, their factors and the scale.
inline json questionnaire_definition() {
  json items = json::array();
  json factors = json::object();
  for (auto f : rosas::kFactors) {
    json names = json::array();
    for (const char* item : rosas::items_of(f)) {
      items.push_back({{"id", item}, {"factor", rosas::to_string(f)}});
      names.push_back(item);
    }
    factors[rosas::to_string(f)] = names;
  }
  return {{"name", "RoSAS"},
          {"prompt", "How closely are the words below associated with the robot you just saw?"},
          {"scale", {{"min", rosas::kMinScore}, {"max", rosas::kMaxScore},
                     {"labels", {{"1", "definitely not associated"}, {"9", "definitely associated"}}}}},
          {"items", items},
          {"factors", factors}};
}

struct SessionSpec {
  std::string participant_id;
  std::optional<int> participant_index;  // Latin-square row; default: sessions created so far
  std::vector<MethodId> methods{MethodId::mb(), MethodId::snl(), MethodId::tdp(), MethodId::hh()};
  Layout layout = Layout::coinciding;
  json scenario = json::object();  // overrides
};

inline SessionSpec spec_from_json(const json& j) {
  if (!j.is_object()) throw ValidationError("body", "expected a JSON object");
  SessionSpec s;
  for (const auto& [key, v] : j.items()) {
    try {
      if (key == "participant_id") s.participant_id = v.get<std::string>();
      else if (key == "participant_index") s.participant_index = v.get<int>();
      else if (key == "methods") {
        s.methods.clear();
        for (const auto& m : v) s.methods.push_back(MethodId::parse(m.get<std::string>()));
      } else if (key == "layout") s.layout = parse_layout(v.get<std::string>());
      else if (key == "scenario") s.scenario = v;
      else throw ValidationError(key, "unknown key");
    } catch (const json::exception& e) {
      throw ValidationError(key, e.what());
    }
  }
  return s;
}

/// Everything persisted about a session.
struct SessionState {
  std::string id;
  std::string participant_id;
  int participant_index = 0;
  Layout layout = Layout::coinciding;
  json scenario = json::object();
  std::vector<MethodId> order;
  Phase phase = Phase::briefing;
  std::size_t current = 0;  // index into order
  std::vector<rosas::RosasResponse> responses;
  std::vector<std::string> trial_stems;  // completed live trials, in order

  std::uint64_t seed() const { return static_cast<std::uint64_t>(participant_index); }
};

inline json to_json(const SessionState& s) {
  json order = json::array(), responses = json::array();
  for (const auto& m : s.order) order.push_back(m.str());
  for (const auto& r : s.responses) responses.push_back(rosas::to_json(r));
  return {{"id", s.id},
          {"participant_id", s.participant_id},
          {"participant_index", s.participant_index},
          {"layout", socnav::to_string(s.layout)},
          {"scenario", s.scenario},
          {"method_order", order},
          {"phase", to_string(s.phase)},
          {"current", s.current},
          {"responses", responses},
          {"trial_stems", s.trial_stems}};
}

inline SessionState state_from_json(const json& j) {
  SessionState s;
  s.id = j.at("id").get<std::string>();
  s.participant_id = j.at("participant_id").get<std::string>();
  s.participant_index = j.at("participant_index").get<int>();
  s.layout = parse_layout(j.at("layout").get<std::string>());
  s.scenario = j.at("scenario");
  for (const auto& m : j.at("method_order")) s.order.push_back(MethodId::parse(m.get<std::string>()));
  s.phase = parse_phase(j.at("phase").get<std::string>());
  s.current = j.at("current").get<std::size_t>();
  for (const auto& r : j.at("responses")) s.responses.push_back(rosas::response_from_json(r));
  s.trial_stems = j.at("trial_stems").get<std::vector<std::string>>();
  return s;
}

/// Shared append-only response file consumed by `bench report --responses`.
class ResponseStore {
 public:
  explicit ResponseStore(fs::path path) : path_(std::move(path)) {}

  void append(const rosas::RosasResponse& r) {
    std::lock_guard lock(mu_);
    std::string text = rosas::responses_csv({r});
    if (fs::exists(path_)) text = text.substr(text.find('\n') + 1);
    std::ofstream out(path_, std::ios::binary | std::ios::app);
    if (!out) throw io::IoError(path_, "cannot open for appending");
    out << text;
    out.flush();
    if (!out) throw io::IoError(path_, "append failed");
  }

  std::vector<rosas::RosasResponse> load() const {
    std::lock_guard lock(mu_);
    if (!fs::exists(path_)) return {};
    return rosas::load_responses(path_);
  }

  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
  mutable std::mutex mu_;
};

/// One method's share of a finished session.
struct JoinedRecord {
  MethodId method;
  std::size_t position = 0;  // presentation position
  metrics::RcmReport rcm;
  metrics::TrialMetrics trial;
  rosas::FactorScores scores;      // raw item means
  rosas::FactorScores normalized;  // mapped to [0, 1]
};

struct SessionReport {
  std::string session_id;
  std::string participant_id;
  std::vector<JoinedRecord> records;

  std::vector<stats::RcmRecord> rcm_records() const {
    std::vector<stats::RcmRecord> out;
    for (const auto& r : records) out.push_back({participant_id, r.method, r.trial});
    return out;
  }
  std::vector<stats::HcmRecord> hcm_records() const {
    std::vector<stats::HcmRecord> out;
    for (const auto& r : records) out.push_back({participant_id, r.method, r.scores});
    return out;
  }
};

inline json trial_metrics_json(const metrics::TrialMetrics& t) {
  return {{"r_haza", t.r_haza},
          {"r_extra_human", metrics::opt_json(t.r_extra_human)},
          {"r_dist", t.r_dist},
          {"r_dec", t.r_dec},
          {"r_extra_robot", t.r_extra_robot},
          {"r_succ", t.r_succ}};
}

inline json to_json(const SessionReport& r) {
  json records = json::array();
  for (const auto& x : r.records)
    records.push_back({{"method", x.method.str()},
                       {"position", x.position},
                       {"rcm", metrics::to_json(x.rcm)},
                       {"trial_metrics", trial_metrics_json(x.trial)},
                       {"scores", rosas::to_json(x.scores)},
                       {"normalized", rosas::to_json(x.normalized)}});
  return {{"session_id", r.session_id}, {"participant_id", r.participant_id}, {"records", records}};
}

class Session {
 public:
  Session(SessionState state, fs::path dir, const PolicyRegistry& registry, ResponseStore& store)
      : state_(std::move(state)), dir_(std::move(dir)), registry_(registry), store_(store),
        cfg_(build_scenario(state_.layout, state_.scenario)) {}

  std::string id() const { return state_.id; }
  SessionState state() const {
    std::lock_guard lock(mu_);
    return state_;
  }
  Phase phase() const {
    std::lock_guard lock(mu_);
    return state_.phase;
  }
  const fs::path& dir() const { return dir_; }
  const ScenarioConfig& scenario() const { return cfg_; }
  bool trial_running() const {
    std::lock_guard lock(mu_);
    return runner_ != nullptr;
  }

  /// Leaves the briefing; the first trial begins on the next tick.
  void start() {
    std::lock_guard lock(mu_);
    if (state_.phase == Phase::briefing) {
      state_.phase = Phase::trial;
      persist();
    } else if (state_.phase != Phase::trial) {
      throw PhaseError("cannot start: phase is " + to_string(state_.phase));
    }
  }

  /// Latest steering command for the live pedestrian (clamped to v_human).
  void set_input(Vec2 v) {
    std::lock_guard lock(mu_);
    if (state_.phase == Phase::briefing) {
      state_.phase = Phase::trial;
      persist();
    }
    if (state_.phase != Phase::trial) throw PhaseError("input outside a trial: phase is " + to_string(state_.phase));
    ensure_runner();
    runner_->set_live_input(v);
  }

  /// Advances the live trial one control step. Returns the outgoing messages:
  /// the state broadcast, carton events and, when the trial ends, the
  /// questionnaire request.
  std::vector<wire::WireMessage> tick() {
    std::lock_guard lock(mu_);
    if (state_.phase != Phase::trial) throw PhaseError("tick outside a trial: phase is " + to_string(state_.phase));
    ensure_runner();
    runner_->tick();
    std::vector<wire::WireMessage> out;
    const auto& sample = runner_->log().samples.back();
    out.push_back(make(wire::MessageType::state, state_payload()));
    if (sample.carton_event != CartonEvent::none)
      out.push_back(make(wire::MessageType::event,
                         {{"kind", socnav::to_string(sample.carton_event)}, {"t", sample.t}}));
    if (runner_->done()) {
      finish_trial();
      out.push_back(make(wire::MessageType::event, {{"kind", "trial_complete"},
                                                    {"method", state_.order[state_.current].str()},
                                                    {"position", state_.current}}));
      out.push_back(make(wire::MessageType::questionnaire_request, questionnaire_payload()));
    }
    return out;
  }

  /// Validates and stores the questionnaire for the method just completed.
  /// Returns the follow-up messages (acceptance event, plus the report once done).
  std::vector<wire::WireMessage> submit_questionnaire(rosas::RosasResponse r) {
    std::lock_guard lock(mu_);
    if (state_.phase != Phase::questionnaire)
      throw PhaseError("no questionnaire pending: phase is " + to_string(state_.phase));
    if (r.participant_id.empty()) r.participant_id = state_.participant_id;
    if (r.participant_id != state_.participant_id)
      throw PhaseError("response is for participant " + r.participant_id + ", session belongs to " +
                       state_.participant_id);
    const auto& expected = state_.order[state_.current];
    if (!(r.method == expected))
      throw PhaseError("questionnaire expected for " + expected.str() + ", got " + r.method.str());
    rosas::validate(r);

    SessionState next = state_;
    next.responses.push_back(r);
    ++next.current;
    next.phase = next.current >= next.order.size() ? Phase::done : Phase::trial;
    write_state(next);  // durable before acknowledging
    state_ = std::move(next);
    store_.append(r);

    std::vector<wire::WireMessage> out;
    out.push_back(make(wire::MessageType::event, {{"kind", "questionnaire_accepted"},
                                                  {"method", r.method.str()},
                                                  {"phase", to_string(state_.phase)}}));
    if (state_.phase == Phase::done) out.push_back(make(wire::MessageType::report, to_json(build_report())));
    return out;
  }

  /// Dispatches one client message. Protocol errors come back as `error`
  /// messages and leave the session unchanged.
  std::vector<wire::WireMessage> handle(const wire::WireMessage& in) {
    try {
      {
        std::lock_guard lock(mu_);
        if (last_in_seq_ && in.seq <= *last_in_seq_)
          throw wire::WireError("seq " + std::to_string(in.seq) + " not above " + std::to_string(*last_in_seq_));
        last_in_seq_ = in.seq;
      }
      switch (in.type) {
        case wire::MessageType::input: set_input(wire::velocity_from_payload(in.payload)); return {};
        case wire::MessageType::questionnaire_submit: {
          json body = in.payload;
          if (!body.contains("participant_id")) body["participant_id"] = state().participant_id;
          return submit_questionnaire(rosas::response_from_json(body));
        }
        default: throw wire::WireError("clients may only send input and questionnaire_submit");
      }
    } catch (const rosas::ResponseError& e) {
      return {make_error(e.what(), "invalid_response", e.problems())};
    } catch (const ValidationError& e) {
      return {make_error(e.what(), "invalid_response", {e.what()})};
    } catch (const PhaseError& e) {
      return {make_error(e.what(), "phase")};
    } catch (const wire::WireError& e) {
      return {make_error(e.what(), "protocol")};
    }
  }

  /// Messages a client receives on (re)connecting: current phase and, if a
  /// questionnaire is pending, the request again.
  std::vector<wire::WireMessage> hello() {
    std::lock_guard lock(mu_);
    std::vector<wire::WireMessage> out;
    out.push_back(make(wire::MessageType::event, {{"kind", "session"}, {"session", status_json()}}));
    if (state_.phase == Phase::questionnaire)
      out.push_back(make(wire::MessageType::questionnaire_request, questionnaire_payload()));
    if (state_.phase == Phase::done) out.push_back(make(wire::MessageType::report, to_json(build_report())));
    return out;
  }

  json status() const {
    std::lock_guard lock(mu_);
    return status_json();
  }

  SessionReport report() const {
    std::lock_guard lock(mu_);
    return build_report();
  }

  /// Persisted live log and input trace of the k-th trial.
  sim::TrialLog live_log(std::size_t k) const {
    std::lock_guard lock(mu_);
    return io::load_trial(dir_, state_.trial_stems.at(k));
  }
  sim::InputTrace input_trace(std::size_t k) const {
    std::lock_guard lock(mu_);
    return trace_from_json(json::parse(io::read_file(dir_ / (state_.trial_stems.at(k) + "_inputs.json"))));
  }

  static json trace_to_json(const sim::InputTrace& t) {
    json out = json::array();
    for (const auto& in : t) out.push_back({{"tick", in.tick}, {"vx", in.velocity.x}, {"vy", in.velocity.y}});
    return out;
  }
  static sim::InputTrace trace_from_json(const json& j) {
    sim::InputTrace t;
    for (const auto& in : j) t.push_back({in.at("tick").get<std::uint64_t>(), {in.at("vx").get<double>(), in.at("vy").get<double>()}});
    return t;
  }

  /// An `error` message numbered in this session's outgoing sequence.
  wire::WireMessage make_error(const std::string& message, const std::string& kind,
                               const std::vector<std::string>& problems = {}) {
    std::lock_guard lock(mu_);
    return make(wire::MessageType::error, {{"kind", kind}, {"message", message}, {"problems", problems}});
  }

  void persist_now() {
    std::lock_guard lock(mu_);
    persist();
  }

 private:
  wire::WireMessage make(wire::MessageType type, json payload) { return {type, ++out_seq_, std::move(payload)}; }

  void ensure_runner() {
    if (runner_) return;
    if (state_.responses.size() != state_.current)
      throw PhaseError("questionnaire for the previous method missing");
    runner_ = std::make_unique<sim::TrialRunner>(cfg_, state_.order[state_.current],
                                                 sim::TrialSetup{true, true, sim::PedestrianMode::live()},
                                                 state_.seed(), registry_);
  }

  std::string stem_for(std::size_t k) const {
    return "trial" + std::to_string(k) + "_" + state_.order[k].str();
  }

  void finish_trial() {
    const auto stem = stem_for(state_.current);
    const auto log = runner_->log();
    io::save_trial(log, dir_, stem);
    io::write_file_atomic(dir_ / (stem + "_inputs.json"), trace_to_json(runner_->input_trace()).dump() + "\n");
    runner_.reset();
    state_.trial_stems.push_back(stem);
    state_.phase = Phase::questionnaire;
    persist();
  }

  json state_payload() const {
    const auto& s = runner_->log().samples.back();
    json humans = json::array();
    for (const auto& h : s.humans) humans.push_back(wire::to_json(h));
    return {{"t", s.t},
            {"tick", runner_->ticks()},
            {"method_position", state_.current},
            {"robot", wire::to_json(s.robot)},
            {"humans", humans},
            {"carrying", runner_->carrying()},
            {"cartons_left", runner_->cartons_left()},
            {"collisions", runner_->log().collision_count},
            {"done", runner_->done()}};
  }

  json questionnaire_payload() const {
    json items = json::array();
    for (const auto& i : rosas::presentation_order(state_.seed() * 1000 + state_.current)) items.push_back(i);
    return {{"method", state_.order[state_.current].str()}, {"position", state_.current}, {"item_order", items},
            {"scale", {{"min", rosas::kMinScore}, {"max", rosas::kMaxScore}}}};
  }

  json status_json() const {
    auto j = to_json(state_);
    j.erase("responses");
    j["completed_questionnaires"] = state_.responses.size();
    return j;
  }

  SessionReport build_report() const {
    if (state_.phase != Phase::done) {
      std::vector<std::string> missing;
      for (std::size_t k = 0; k < state_.order.size(); ++k) {
        const auto m = state_.order[k].str();
        if (k >= state_.trial_stems.size()) missing.push_back("trial " + m);
        if (k >= state_.responses.size()) missing.push_back("questionnaire " + m);
      }
      throw IncompleteSession(missing);
    }
    SessionReport rep{state_.id, state_.participant_id, {}};
    const auto human = sim::run_human_baseline(cfg_, state_.seed());
    for (std::size_t k = 0; k < state_.order.size(); ++k) {
      const auto& m = state_.order[k];
      const auto log = io::load_trial(dir_, state_.trial_stems[k]);
      const auto baseline = sim::run_baseline(cfg_, m, state_.seed(), registry_);
      std::vector<sim::TrialLog> logs{log};
      auto rcm = metrics::compute_rcm(logs, baseline, human.human_task_time.value(), cfg_);
      JoinedRecord rec;
      rec.method = m;
      rec.position = k;
      rec.trial = metrics::trial_metrics(rcm.ingredients, rcm.ingredients.trials.front());
      rec.rcm = std::move(rcm);
      rec.scores = rosas::score_response(state_.responses[k]);
      rec.normalized = rosas::normalize(rec.scores);
      rep.records.push_back(std::move(rec));
    }
    return rep;
  }

  void write_state(const SessionState& s) const {
    io::write_file_atomic(dir_ / "session.json", to_json(s).dump(2) + "\n");
  }
  void persist() const { write_state(state_); }

  SessionState state_;
  fs::path dir_;
  const PolicyRegistry& registry_;
  ResponseStore& store_;
  ScenarioConfig cfg_;
  std::unique_ptr<sim::TrialRunner> runner_;
  std::uint64_t out_seq_ = 0;
  std::optional<std::uint64_t> last_in_seq_;
  mutable std::recursive_mutex mu_;
};

/// Owns every session under a root directory; reloads them on construction,
/// so a restarted gateway resumes where the last phase boundary left off.
class SessionManager {
 public:
  explicit SessionManager(fs::path root, PolicyRegistry registry = {})
      : root_(std::move(root)), registry_(std::move(registry)), store_(root_ / "responses.csv") {
    fs::create_directories(root_ / "sessions");
    std::vector<fs::path> dirs;
    for (const auto& e : fs::directory_iterator(root_ / "sessions"))
      if (e.is_directory() && fs::exists(e.path() / "session.json")) dirs.push_back(e.path());
    std::sort(dirs.begin(), dirs.end());
    for (const auto& d : dirs) {
      auto st = state_from_json(json::parse(io::read_file(d / "session.json")));
      // A trial that was in flight restarts from scratch; questionnaires are kept.
      const auto id = st.id;
      sessions_[id] = std::make_shared<Session>(std::move(st), d, registry_, store_);
      ++created_;
    }
  }

  std::shared_ptr<Session> create(const SessionSpec& spec) {
    if (spec.participant_id.empty()) throw ValidationError("participant_id", "must not be empty");
    if (spec.methods.empty()) throw ValidationError("methods", "must not be empty");
    for (const auto& m : spec.methods)
      if (!registry_.registered(m)) throw ValidationError("methods", "no policy registered as '" + m.str() + "'");
    if (spec.participant_index && *spec.participant_index < 0)
      throw ValidationError("participant_index", "must be >= 0");
    (void)build_scenario(spec.layout, spec.scenario);

    std::lock_guard lock(mu_);
    for (const auto& [id, s] : sessions_) {
      const auto st = s->state();
      if (st.participant_id == spec.participant_id && st.phase != Phase::done)
        throw DuplicateParticipant("participant " + spec.participant_id + " already has active session " + id);
    }
    SessionState st;
    char buf[16];
    std::snprintf(buf, sizeof buf, "s%04zu", created_ + 1);
    st.id = buf;
    st.participant_id = spec.participant_id;
    st.participant_index = spec.participant_index.value_or(static_cast<int>(created_));
    st.layout = spec.layout;
    st.scenario = spec.scenario;
    const auto row = latin_square_order(static_cast<int>(spec.methods.size()), st.participant_index + 1).back();
    for (int k : row) st.order.push_back(spec.methods[static_cast<std::size_t>(k)]);
    auto session = std::make_shared<Session>(std::move(st), root_ / "sessions" / buf, registry_, store_);
    session->persist_now();
    sessions_[session->id()] = session;
    ++created_;
    return session;
  }

  std::shared_ptr<Session> get(const std::string& id) const {
    std::lock_guard lock(mu_);
    const auto it = sessions_.find(id);
    if (it == sessions_.end()) throw UnknownSession("no session '" + id + "'");
    return it->second;
  }

  std::vector<std::string> ids() const {
    std::lock_guard lock(mu_);
    std::vector<std::string> out;
    for (const auto& [id, _] : sessions_) out.push_back(id);
    return out;
  }

  ResponseStore& store() { return store_; }
  const fs::path& root() const { return root_; }

 private:
  fs::path root_;
  PolicyRegistry registry_;
  ResponseStore store_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::size_t created_ = 0;
  mutable std::mutex mu_;
};

}  // namespace socnav::gateway
