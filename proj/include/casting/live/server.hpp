#pragma once

// Websocket front end for a LiveSession. One io thread owns every connection;
// the stepper thread runs the session; a broadcaster thread moves frames from
// the session's outbound queue onto the io thread.

#include <atomic>
#include <deque>
#include <memory>
#include <ostream>
#include <set>
#include <string>
#include <thread>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>

#include "casting/live/session.hpp"

namespace casting::live {

namespace net = boost::asio;
namespace beast = boost::beast;
namespace websocket = beast::websocket;
using tcp = net::ip::tcp;

class Server;

class Connection : public std::enable_shared_from_this<Connection> {
 public:
  Connection(tcp::socket socket, Server& server) : ws_(std::move(socket)), server_(server) {}

  void start();
  void send(std::shared_ptr<const std::string> text);
  void close() {
    beast::error_code ec;
    beast::get_lowest_layer(ws_).socket().close(ec);
  }

 private:
  void read();
  void on_read(beast::error_code ec);
  void write_next();
  void finish();

  static constexpr std::size_t kMaxQueued = 512;

  websocket::stream<beast::tcp_stream> ws_;
  Server& server_;
  beast::flat_buffer buffer_;
  std::deque<std::shared_ptr<const std::string>> queue_;
  bool open_ = false;
  bool gone_ = false;
};

class Server {
 public:
  /// Binds 127.0.0.1:`port` (0 picks a free port).
  Server(sim::Scenario s, unsigned short port, Pacer pacer = {}, std::ostream* log = nullptr)
      : session_(std::move(s), log), pacer_(pacer), log_(log), acceptor_(ioc_) {
    const tcp::endpoint ep(net::ip::make_address("127.0.0.1"), port);
    acceptor_.open(ep.protocol());
    acceptor_.set_option(net::socket_base::reuse_address(true));
    acceptor_.bind(ep);
    acceptor_.listen();
  }

  ~Server() { stop(); }

  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  unsigned short port() const { return acceptor_.local_endpoint().port(); }

  void start() {
    accept();
    io_ = std::thread([this] { ioc_.run(); });
    stepper_ = std::thread([this] { pacer_.run(session_, [this] { return stopping_.load(); }); });
    broadcaster_ = std::thread([this] { broadcast_loop(); });
  }

  void stop() {
    if (stopping_.exchange(true)) return;
    if (stepper_.joinable()) stepper_.join();
    session_.outbound().close();
    if (broadcaster_.joinable()) broadcaster_.join();
    net::post(ioc_, [this] {
      beast::error_code ec;
      acceptor_.close(ec);
      for (const auto& c : connections_) c->close();
      connections_.clear();
    });
    if (io_.joinable()) io_.join();
  }

 private:
  friend class Connection;

  void accept() {
    acceptor_.async_accept([this](beast::error_code ec, tcp::socket socket) {
      if (ec) return;
      auto c = std::make_shared<Connection>(std::move(socket), *this);
      connections_.insert(c);
      c->start();
      accept();
    });
  }

  void broadcast_loop() {
    while (true) {
      auto frame = session_.outbound().pop_for(std::chrono::milliseconds(100));
      if (!frame) {
        if (stopping_) return;
        continue;
      }
      auto text = std::make_shared<const std::string>(std::move(*frame));
      net::post(ioc_, [this, text] {
        for (const auto& c : connections_) c->send(text);
      });
    }
  }

  void on_message(Connection& from, const std::string& text) {
    try {
      session_.inbound().push(parse_client_message(text));
    } catch (const ValidationError& e) {
      from.send(std::make_shared<const std::string>(error_frame(e.what())));
    }
  }

  void on_close(const std::shared_ptr<Connection>& c) {
    if (connections_.erase(c) && !stopping_) session_.inbound().push(Disconnected{});
  }

  LiveSession session_;
  Pacer pacer_;
  std::ostream* log_;
  net::io_context ioc_;
  tcp::acceptor acceptor_;
  std::set<std::shared_ptr<Connection>> connections_;  // io thread only
  std::atomic<bool> stopping_{false};
  std::thread io_, stepper_, broadcaster_;
};

inline void Connection::start() {
  ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
  ws_.async_accept([self = shared_from_this()](beast::error_code ec) {
    if (ec) return self->finish();
    self->open_ = true;
    self->ws_.text(true);
    self->write_next();
    self->read();
  });
}

inline void Connection::read() {
  ws_.async_read(buffer_, [self = shared_from_this()](beast::error_code ec, std::size_t) { self->on_read(ec); });
}

inline void Connection::on_read(beast::error_code ec) {
  if (ec) return finish();
  const std::string text = beast::buffers_to_string(buffer_.data());
  buffer_.consume(buffer_.size());
  server_.on_message(*this, text);
  read();
}

inline void Connection::send(std::shared_ptr<const std::string> text) {
  if (gone_) return;
  if (queue_.size() >= kMaxQueued) queue_.pop_back();
  queue_.push_back(std::move(text));
  if (open_ && queue_.size() == 1) write_next();
}

inline void Connection::write_next() {
  if (queue_.empty() || gone_) return;
  ws_.async_write(net::buffer(*queue_.front()),
                  [self = shared_from_this()](beast::error_code ec, std::size_t) {
                    if (ec) return self->finish();
                    self->queue_.pop_front();
                    self->write_next();
                  });
}

inline void Connection::finish() {
  if (gone_) return;
  gone_ = true;
  queue_.clear();
  server_.on_close(shared_from_this());
}

}  // namespace casting::live
