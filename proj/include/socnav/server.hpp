#pragma once

// HTTP + WebSocket front end of the session gateway (Boost.Beast).
//
//   POST /sessions                 create a session  -> 201 {session_id, method_order, ws, ...}
//   GET  /sessions                 list session ids
//   GET  /sessions/{id}            session status
//   GET  /sessions/{id}/report     joined RCM + questionnaire report (409 until done)
//   GET  /questionnaire            questionnaire definition
//   GET  /sessions/{id}/ws         WebSocket upgrade; wire messages both ways
//
// One io_context thread runs every connection, so each session's events are
// handled strictly one at a time.

#include <chrono>
#include <csignal>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <thread>
#include <utility>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

#include "socnav/session.hpp"

namespace socnav::gateway {

namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
namespace asio = boost::asio;
using tcp = asio::ip::tcp;

using Request = http::request<http::string_body>;
using Response = http::response<http::string_body>;

inline Response json_response(const Request& req, http::status status, const json& body) {
  Response res{status, req.version()};
  res.set(http::field::content_type, "application/json; charset=utf-8");
  res.set(http::field::access_control_allow_origin, "*");
  res.keep_alive(req.keep_alive());
  res.body() = body.dump();
  res.prepare_payload();
  return res;
}

inline json error_body(const std::string& message) { return {{"error", message}}; }

inline std::vector<std::string> path_parts(std::string_view target) {
  if (const auto q = target.find('?'); q != std::string_view::npos) target = target.substr(0, q);
  std::vector<std::string> parts;
  for (auto& p : io::split(std::string(target), '/'))
    if (!p.empty()) parts.push_back(p);
  return parts;
}

/// Session id of a WebSocket target, if it has the /sessions/{id}/ws form.
inline std::optional<std::string> ws_session_id(std::string_view target) {
  const auto p = path_parts(target);
  if (p.size() == 3 && p[0] == "sessions" && p[2] == "ws") return p[1];
  return std::nullopt;
}

/// Plain HTTP endpoints. Pure function of the manager state and the request.
inline Response route(SessionManager& mgr, const Request& req) {
  const auto p = path_parts(std::string(req.target()));
  const auto method = req.method();
  if (method == http::verb::options) {
    Response res{http::status::no_content, req.version()};
    res.set(http::field::access_control_allow_origin, "*");
    res.set(http::field::access_control_allow_methods, "GET, POST, OPTIONS");
    res.set(http::field::access_control_allow_headers, "Content-Type");
    res.keep_alive(req.keep_alive());
    res.prepare_payload();
    return res;
  }
  auto not_allowed = [&] { return json_response(req, http::status::method_not_allowed, error_body("method not allowed")); };
  try {
    if (p.size() == 1 && p[0] == "health") return json_response(req, http::status::ok, {{"status", "ok"}});
    if (p.size() == 1 && p[0] == "questionnaire") {
      if (method != http::verb::get) return not_allowed();
      return json_response(req, http::status::ok, questionnaire_definition());
    }
    if (p.size() == 1 && p[0] == "sessions") {
      if (method == http::verb::get) return json_response(req, http::status::ok, {{"sessions", mgr.ids()}});
      if (method != http::verb::post) return not_allowed();
      json body;
      try {
        body = req.body().empty() ? json::object() : json::parse(req.body());
      } catch (const json::parse_error& e) {
        return json_response(req, http::status::bad_request, error_body(std::string("malformed JSON: ") + e.what()));
      }
      const auto s = mgr.create(spec_from_json(body));
      auto st = s->status();
      st["session_id"] = s->id();
      st["ws"] = "/sessions/" + s->id() + "/ws";
      return json_response(req, http::status::created, st);
    }
    if (p.size() >= 2 && p[0] == "sessions") {
      if (method != http::verb::get) return not_allowed();
      const auto s = mgr.get(p[1]);
      if (p.size() == 2) return json_response(req, http::status::ok, s->status());
      if (p.size() == 3 && p[2] == "report") {
        try {
          return json_response(req, http::status::ok, to_json(s->report()));
        } catch (const IncompleteSession& e) {
          return json_response(req, http::status::conflict, {{"error", e.what()}, {"missing", e.missing()}});
        }
      }
      if (p.size() == 3 && p[2] == "ws")
        return json_response(req, http::status::upgrade_required, error_body("WebSocket upgrade required"));
    }
  } catch (const UnknownSession& e) {
    return json_response(req, http::status::not_found, error_body(e.what()));
  } catch (const DuplicateParticipant& e) {
    return json_response(req, http::status::conflict, error_body(e.what()));
  } catch (const ValidationError& e) {
    return json_response(req, http::status::bad_request, {{"error", e.what()}, {"field", e.field()}});
  } catch (const std::exception& e) {
    return json_response(req, http::status::internal_server_error, error_body(e.what()));
  }
  return json_response(req, http::status::not_found, error_body("no such endpoint"));
}

struct ServerOptions {
  std::string address = "127.0.0.1";
  unsigned short port = 8080;  // 0: pick a free port
  std::chrono::milliseconds tick{100};
};

class Server {
 public:
  using LogFn = std::function<void(const std::string&)>;

  Server(SessionManager& mgr, ServerOptions opts, LogFn log = {})
      : mgr_(mgr), opts_(opts), log_(std::move(log)), acceptor_(io_) {
    const tcp::endpoint ep{asio::ip::make_address(opts_.address), opts_.port};
    acceptor_.open(ep.protocol());
    acceptor_.set_option(asio::socket_base::reuse_address(true));
    acceptor_.bind(ep);
    acceptor_.listen();
    accept();
  }

  ~Server() { stop(); }

  unsigned short port() const { return acceptor_.local_endpoint().port(); }

  /// Serves until stop().
  void run() { io_.run(); }

  void start_background() {
    thread_ = std::thread([this] { io_.run(); });
  }

  /// Stops serving on SIGINT or SIGTERM.
  void stop_on_signals() {
    signals_.add(SIGINT);
    signals_.add(SIGTERM);
    signals_.async_wait([this](beast::error_code ec, int) {
      if (!ec) io_.stop();
    });
  }

  void stop() {
    io_.stop();
    if (thread_.joinable()) thread_.join();
  }

 private:
  class WsConnection;

  class HttpConnection : public std::enable_shared_from_this<HttpConnection> {
   public:
    HttpConnection(Server& srv, tcp::socket socket) : srv_(srv), stream_(std::move(socket)) {}

    void start() { read(); }

   private:
    void read() {
      req_ = {};
      http::async_read(stream_, buffer_, req_,
                       [self = shared_from_this()](beast::error_code ec, std::size_t) { self->on_read(ec); });
    }

    void on_read(beast::error_code ec) {
      if (ec) return;
      if (websocket::is_upgrade(req_)) {
        const auto id = ws_session_id(std::string(req_.target()));
        std::shared_ptr<Session> session;
        if (id) {
          try {
            session = srv_.mgr_.get(*id);
          } catch (const UnknownSession&) {
          }
        }
        if (!session) {
          write(json_response(req_, http::status::not_found, error_body("no such session")));
          return;
        }
        std::make_shared<WsConnection>(srv_, stream_.release_socket(), session)->start(std::move(req_));
        return;
      }
      write(route(srv_.mgr_, req_));
    }

    void write(Response res) {
      auto sp = std::make_shared<Response>(std::move(res));
      http::async_write(stream_, *sp, [self = shared_from_this(), sp](beast::error_code ec, std::size_t) {
        if (ec || !sp->keep_alive()) {
          beast::error_code ignored;
          self->stream_.socket().shutdown(tcp::socket::shutdown_send, ignored);
          return;
        }
        self->read();
      });
    }

    Server& srv_;
    beast::tcp_stream stream_;
    beast::flat_buffer buffer_;
    Request req_;
  };

  class WsConnection : public std::enable_shared_from_this<WsConnection> {
   public:
    WsConnection(Server& srv, tcp::socket socket, std::shared_ptr<Session> session)
        : srv_(srv), ws_(std::move(socket)), session_(std::move(session)), timer_(srv.io_) {}

    void start(Request req) {
      ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
      ws_.async_accept(req, [self = shared_from_this()](beast::error_code ec) { self->on_accept(ec); });
    }

   private:
    void on_accept(beast::error_code ec) {
      if (ec) return;
      auto& owner = srv_.controllers_[session_->id()];
      if (!owner.expired()) {
        // One steering client per session.
        closing_ = true;
        send(session_json_error("another client already controls session " + session_->id()));
        return;
      }
      owner = weak_from_this();
      srv_.note("client attached to " + session_->id());
      for (const auto& m : session_->hello()) send(wire::to_json(m).dump());
      read();
      schedule_tick();
    }

    // Sent outside the session's numbered stream, so the controlling
    // client sees no seq gap.
    static std::string session_json_error(const std::string& message) {
      return wire::to_json(wire::WireMessage{wire::MessageType::error, 0,
                                             {{"kind", "busy"}, {"message", message}, {"problems", json::array()}}})
          .dump();
    }

    void read() {
      ws_.async_read(buffer_, [self = shared_from_this()](beast::error_code ec, std::size_t) { self->on_read(ec); });
    }

    void on_read(beast::error_code ec) {
      if (ec) {
        detach();
        return;
      }
      const std::string text = beast::buffers_to_string(buffer_.data());
      buffer_.consume(buffer_.size());
      std::vector<wire::WireMessage> out;
      try {
        out = session_->handle(wire::parse_message(std::string_view(text)));
      } catch (const wire::WireError& e) {
        out.push_back(session_->make_error(e.what(), "protocol"));
      }
      for (const auto& m : out) send(wire::to_json(m).dump());
      read();
    }

    void schedule_tick() {
      timer_.expires_after(srv_.opts_.tick);
      timer_.async_wait([self = shared_from_this()](beast::error_code ec) {
        if (ec || self->detached_) return;
        self->on_tick();
      });
    }

    void on_tick() {
      if (session_->phase() == Phase::trial && session_->trial_running()) {
        try {
          for (const auto& m : session_->tick()) send(wire::to_json(m).dump());
        } catch (const std::exception& e) {
          send(wire::to_json(session_->make_error(e.what(), "internal")).dump());
        }
      }
      schedule_tick();
    }

    void send(std::string text) {
      queue_.push_back(std::move(text));
      if (queue_.size() == 1) write_next();
    }

    void write_next() {
      ws_.text(true);
      ws_.async_write(asio::buffer(queue_.front()), [self = shared_from_this()](beast::error_code ec, std::size_t) {
        if (ec) {
          self->detach();
          return;
        }
        self->queue_.pop_front();
        if (!self->queue_.empty()) {
          self->write_next();
        } else if (self->closing_) {
          self->ws_.async_close(websocket::close_code::try_again_later, [self](beast::error_code) {});
        }
      });
    }

    void detach() {
      if (detached_) return;
      detached_ = true;
      timer_.cancel();
      auto it = srv_.controllers_.find(session_->id());
      if (it != srv_.controllers_.end() && it->second.lock().get() == this) {
        srv_.controllers_.erase(it);
        srv_.note("client detached from " + session_->id());
      }
    }

    Server& srv_;
    websocket::stream<beast::tcp_stream> ws_;
    std::shared_ptr<Session> session_;
    asio::steady_timer timer_;
    beast::flat_buffer buffer_;
    std::deque<std::string> queue_;
    bool closing_ = false;
    bool detached_ = false;
  };

  void accept() {
    acceptor_.async_accept(asio::make_strand(io_), [this](beast::error_code ec, tcp::socket socket) {
      if (!ec) std::make_shared<HttpConnection>(*this, std::move(socket))->start();
      accept();
    });
  }

  void note(const std::string& msg) const {
    if (log_) log_(msg);
  }

  SessionManager& mgr_;
  ServerOptions opts_;
  LogFn log_;
  asio::io_context io_{1};
  tcp::acceptor acceptor_;
  asio::signal_set signals_{io_};
  std::thread thread_;
  std::map<std::string, std::weak_ptr<WsConnection>> controllers_;
};

}  // namespace socnav::gateway
