#pragma once

// JSON message envelope shared by the session gateway and out-of-process
// policies. Units: meters, m/s, seconds, radians.
//
//   {"type": "<kind>", "seq": <uint>, "payload": {...}}

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "socnav/agent.hpp"
#include "socnav/geometry.hpp"

namespace socnav::wire {

enum class MessageType { state, input, event, questionnaire_request, questionnaire_submit, report, error };

inline std::string to_string(MessageType t) {
  switch (t) {
    case MessageType::state: return "state";
    case MessageType::input: return "input";
    case MessageType::event: return "event";
    case MessageType::questionnaire_request: return "questionnaire_request";
    case MessageType::questionnaire_submit: return "questionnaire_submit";
    case MessageType::report: return "report";
    case MessageType::error: return "error";
  }
  return "error";
}

inline std::optional<MessageType> parse_type(std::string_view s) {
  for (auto t : {MessageType::state, MessageType::input, MessageType::event, MessageType::questionnaire_request,
                 MessageType::questionnaire_submit, MessageType::report, MessageType::error})
    if (s == to_string(t)) return t;
  return std::nullopt;
}

struct WireMessage {
  MessageType type = MessageType::state;
  std::uint64_t seq = 0;
  nlohmann::json payload = nlohmann::json::object();
};

class WireError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline nlohmann::json to_json(const WireMessage& m) {
  return {{"type", to_string(m.type)}, {"seq", m.seq}, {"payload", m.payload}};
}

/// Parses and validates the envelope; unknown types are rejected.
inline WireMessage parse_message(const nlohmann::json& j) {
  if (!j.is_object()) throw WireError("message must be a JSON object");
  const auto type_it = j.find("type");
  if (type_it == j.end() || !type_it->is_string()) throw WireError("missing message type");
  const auto type = parse_type(type_it->get<std::string>());
  if (!type) throw WireError("unknown message type '" + type_it->get<std::string>() + "'");
  const auto seq_it = j.find("seq");
  if (seq_it == j.end() || !seq_it->is_number_unsigned()) throw WireError("missing or invalid seq");
  WireMessage m{*type, seq_it->get<std::uint64_t>(), nlohmann::json::object()};
  if (auto p = j.find("payload"); p != j.end()) {
    if (!p->is_object()) throw WireError("payload must be an object");
    m.payload = *p;
  }
  return m;
}

inline WireMessage parse_message(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw WireError(std::string("malformed JSON: ") + e.what());
  }
  return parse_message(j);
}

inline nlohmann::json to_json(const AgentState& s) {
  return {{"x", s.position.x}, {"y", s.position.y}, {"heading", s.heading},
          {"speed", s.speed},  {"vx", s.velocity.x},  {"vy", s.velocity.y}};
}

inline AgentState agent_from_json(const nlohmann::json& j) {
  AgentState s;
  s.position = {j.at("x").get<double>(), j.at("y").get<double>()};
  s.heading = j.value("heading", 0.0);
  s.velocity = {j.value("vx", 0.0), j.value("vy", 0.0)};
  s.speed = j.value("speed", s.velocity.norm());
  return s;
}

/// Reads a velocity command payload {"vx": .., "vy": ..}.
inline Vec2 velocity_from_payload(const nlohmann::json& payload) {
  const auto vx = payload.find("vx");
  const auto vy = payload.find("vy");
  if (vx == payload.end() || vy == payload.end() || !vx->is_number() || !vy->is_number())
    throw WireError("velocity payload requires numeric vx and vy");
  const Vec2 v{vx->get<double>(), vy->get<double>()};
  if (!v.finite()) throw WireError("velocity must be finite");
  return v;
}

}  // namespace socnav::wire
