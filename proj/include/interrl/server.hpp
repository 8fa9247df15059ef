#pragma once

// WebSocket transport for live sessions: one JSON record per text frame.
// Clients connect to ws://host:port/?session=ID; an unknown or missing id creates a session
// from the server's base config.

#include "interrl/session.hpp"

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

#include <condition_variable>
#include <map>
#include <memory>
#include <mutex>
#include <stop_token>
#include <string>
#include <thread>

namespace interrl::gateway {

namespace asio = boost::asio;
namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
using tcp = asio::ip::tcp;

/// Returns the value of `key` in the query part of a request target, if any.
inline std::optional<std::string> query_param(std::string_view target, std::string_view key) {
  const auto q = target.find('?');
  if (q == std::string_view::npos) return std::nullopt;
  std::string_view rest = target.substr(q + 1);
  while (!rest.empty()) {
    const auto amp = rest.find('&');
    const std::string_view pair = rest.substr(0, amp);
    const auto eq = pair.find('=');
    if (pair.substr(0, eq) == key) return std::string(eq == std::string_view::npos ? "" : pair.substr(eq + 1));
    if (amp == std::string_view::npos) break;
    rest = rest.substr(amp + 1);
  }
  return std::nullopt;
}

/// Runs one session's loop on its own thread and forwards its output to the attached client.
class SessionRunner {
 public:
  using Sink = std::function<void(std::string)>;

  explicit SessionRunner(std::unique_ptr<Session> session) : session_(std::move(session)) {
    thread_ = std::jthread([this](std::stop_token st) { loop(st); });
  }

  ~SessionRunner() {
    thread_.request_stop();
    wake_.notify_all();
  }

  Session& session() { return *session_; }

  void attach(Sink sink) {
    {
      std::lock_guard lock(sink_mutex_);
      sink_ = std::move(sink);
    }
    session_->client_attached();
    wake_.notify_all();
  }

  void detach() {
    {
      std::lock_guard lock(sink_mutex_);
      sink_ = nullptr;
    }
    session_->client_detached();
    wake_.notify_all();
  }

  void post(std::string_view text) {
    session_->post(text);
    wake_.notify_all();
  }

 private:
  void loop(std::stop_token st) {
    std::mutex m;
    while (!st.stop_requested()) {
      const auto window = session_->window();
      if (!session_->running()) {
        std::unique_lock lock(m);
        wake_.wait_for(lock, std::chrono::milliseconds(20));
      } else if (window.count() > 0) {
        std::unique_lock lock(m);
        wake_.wait_for(lock, st, window, [] { return false; });
      }
      if (st.stop_requested()) break;
      session_->advance();
      flush();
    }
  }

  void flush() {
    std::lock_guard lock(sink_mutex_);
    if (!sink_) return;
    auto out = session_->take_outbound();
    for (auto& j : out) sink_(j.dump());
  }

  std::unique_ptr<Session> session_;
  std::mutex sink_mutex_;
  Sink sink_;
  std::condition_variable_any wake_;
  std::jthread thread_;
};

class Server;

class Connection : public std::enable_shared_from_this<Connection> {
 public:
  Connection(tcp::socket socket, Server& server) : ws_(std::move(socket)), server_(server) {}

  void start() {
    http::async_read(ws_.next_layer(), buffer_, request_,
                     [self = shared_from_this()](beast::error_code ec, std::size_t) { self->on_request(ec); });
  }

  /// Called from session threads.
  void send(std::string text) {
    asio::post(ws_.get_executor(), [self = shared_from_this(), text = std::move(text)]() mutable {
      // A slow client loses old records rather than stalling the session.
      if (self->queue_.size() >= kMaxQueued) return;
      self->queue_.push_back(std::move(text));
      if (self->queue_.size() == 1 && self->open_) self->write_next();
    });
  }

 private:
  static constexpr std::size_t kMaxQueued = 4096;

  void on_request(beast::error_code ec);
  void on_accept(beast::error_code ec);
  void read_next();
  void on_read(beast::error_code ec);
  void close();

  void write_next() {
    ws_.text(true);
    ws_.async_write(asio::buffer(queue_.front()), [self = shared_from_this()](beast::error_code ec, std::size_t) {
      if (ec) return self->close();
      self->queue_.pop_front();
      if (!self->queue_.empty()) self->write_next();
    });
  }

  websocket::stream<tcp::socket> ws_;
  Server& server_;
  beast::flat_buffer buffer_;
  http::request<http::string_body> request_;
  std::deque<std::string> queue_;
  std::shared_ptr<SessionRunner> runner_;
  bool open_ = false;
  bool closed_ = false;
};

class Server {
 public:
  Server(RunConfig base, SessionOptions options, unsigned short port, std::string address = "127.0.0.1")
      : base_(std::move(base)), options_(std::move(options)), acceptor_(io_) {
    validate_config(base_);
    const tcp::endpoint ep(asio::ip::make_address(address), port);
    acceptor_.open(ep.protocol());
    acceptor_.set_option(asio::socket_base::reuse_address(true));
    acceptor_.bind(ep);
    acceptor_.listen();
    accept_next();
  }

  ~Server() { stop(); }

  unsigned short port() const { return acceptor_.local_endpoint().port(); }

  /// Serves until stop(); blocks.
  void run() { io_.run(); }

  void start_background() {
    worker_ = std::jthread([this] { io_.run(); });
  }

  /// Makes run() return; safe to call from any thread.
  void stop_async() { io_.stop(); }

  void stop() {
    io_.stop();
    if (worker_.joinable()) worker_.join();
    std::lock_guard lock(mutex_);
    sessions_.clear();
  }

  /// Existing session `id`, or a new one when `id` is empty or unknown.
  std::shared_ptr<SessionRunner> session_for(const std::string& id) {
    std::lock_guard lock(mutex_);
    if (!id.empty()) {
      auto it = sessions_.find(id);
      if (it != sessions_.end()) return it->second;
    }
    const std::uint64_t n = counter_++;
    const std::string fresh = id.empty() ? "s" + std::to_string(n + 1) : id;
    RunConfig c = base_;
    // Sessions get distinct seeds so that they do not share random streams.
    c.seed = base_.seed + 1000003ULL * n;
    auto runner = std::make_shared<SessionRunner>(std::make_unique<Session>(fresh, c, options_));
    sessions_.emplace(fresh, runner);
    return runner;
  }

  std::size_t session_count() {
    std::lock_guard lock(mutex_);
    return sessions_.size();
  }

 private:
  void accept_next() {
    acceptor_.async_accept([this](beast::error_code ec, tcp::socket socket) {
      if (!ec) std::make_shared<Connection>(std::move(socket), *this)->start();
      if (acceptor_.is_open()) accept_next();
    });
  }

  RunConfig base_;
  SessionOptions options_;
  asio::io_context io_;
  tcp::acceptor acceptor_;
  std::jthread worker_;
  std::mutex mutex_;
  std::map<std::string, std::shared_ptr<SessionRunner>> sessions_;
  std::uint64_t counter_ = 0;
};

inline void Connection::on_request(beast::error_code ec) {
  if (ec) return;
  if (!websocket::is_upgrade(request_)) {
    auto res = std::make_shared<http::response<http::string_body>>(http::status::bad_request, request_.version());
    res->set(http::field::content_type, "text/plain");
    res->body() = "websocket upgrade required\n";
    res->prepare_payload();
    http::async_write(ws_.next_layer(), *res, [self = shared_from_this(), res](beast::error_code, std::size_t) {
      beast::error_code ignored;
      self->ws_.next_layer().shutdown(tcp::socket::shutdown_both, ignored);
    });
    return;
  }
  runner_ = server_.session_for(query_param(std::string_view(request_.target().data(), request_.target().size()), "session").value_or(""));
  ws_.async_accept(request_, [self = shared_from_this()](beast::error_code ec) { self->on_accept(ec); });
}

inline void Connection::on_accept(beast::error_code ec) {
  if (ec) return;
  open_ = true;
  std::weak_ptr<Connection> weak = weak_from_this();
  runner_->attach([weak](std::string text) {
    if (auto self = weak.lock()) self->send(std::move(text));
  });
  read_next();
}

inline void Connection::read_next() {
  buffer_.consume(buffer_.size());
  ws_.async_read(buffer_, [self = shared_from_this()](beast::error_code ec, std::size_t) { self->on_read(ec); });
}

inline void Connection::on_read(beast::error_code ec) {
  if (ec) return close();
  runner_->post(beast::buffers_to_string(buffer_.data()));
  read_next();
}

inline void Connection::close() {
  if (closed_) return;
  closed_ = true;
  if (runner_) runner_->detach();
}

}  // namespace interrl::gateway
