#pragma once

// WebSocket front end for a MessageSource.
//
//   ws://host:port/driver    one at a time; sends input/mode/trial messages
//   ws://host:port/observer  any number; receive only
//
// Two threads. The sim thread owns the source and ticks it on a fixed schedule whether or
// not anyone is connected; it never touches a socket. The io thread owns every socket.
// Driver traffic goes sim-ward through a locked queue that the sim drains once per tick;
// outgoing messages are posted io-ward as immutable strings.

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>
#include <chrono>
#include <condition_variable>
#include <deque>
#include <functional>
#include <iostream>
#include <memory>
#include <mutex>
#include <set>
#include <thread>

#include "teer/session.hpp"

namespace teer {

namespace net = boost::asio;
namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
using tcp = net::ip::tcp;

struct ServerOptions {
  std::string address = "127.0.0.1";
  unsigned short port = 8765;  // 0 picks a free port
  bool stop_when_finished = false;
  bool start_on_first_client = false;  // hold the clock until someone connects (replays)
  std::size_t max_queue = 4096;  // messages buffered for one slow client before it is dropped
  std::function<void(const std::string&)> log = [](const std::string& m) { std::cerr << m << '\n'; };
};

class Server {
 public:
  // Binds immediately; a busy port throws boost::system::system_error.
  Server(std::unique_ptr<MessageSource> source, ServerOptions opt)
      : opt_(std::move(opt)), source_(std::move(source)), acceptor_(io_), grace_(io_) {
    const tcp::endpoint ep(net::ip::make_address(opt_.address), opt_.port);
    acceptor_.open(ep.protocol());
    acceptor_.bind(ep);
    acceptor_.listen();
    port_ = acceptor_.local_endpoint().port();
    source_accepts_driver_ = source_->accepts_driver();
    latest_ = std::make_shared<const std::string>(source_->latest_snapshot().dump());
  }

  ~Server() {
    stop();
    join();
  }

  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  unsigned short port() const { return port_; }

  void start() {
    accept();
    io_thread_ = std::thread([this] { io_.run(); });
    sim_thread_ = std::thread([this] { sim_loop(); });
  }

  // Blocks until stop() or, with stop_when_finished, until the source runs out.
  void run() {
    start();
    join();
  }

  void stop() {
    {
      std::lock_guard lk(mu_);
      stop_requested_ = true;
    }
    wake_.notify_all();
    net::post(io_, [this] { shutdown(); });
  }

  void join() {
    if (sim_thread_.joinable()) sim_thread_.join();
    if (io_thread_.joinable()) io_thread_.join();
  }

 private:
  class Connection;
  friend class Connection;
  using Text = std::shared_ptr<const std::string>;

  // Sim-ward traffic.
  struct Inbound {
    enum Kind { connected, message, gone } kind;
    std::weak_ptr<Connection> from;
    ClientMessage msg;
  };

  // ---- sim thread ----

  void sim_loop() {
    const auto dt = std::chrono::duration_cast<std::chrono::steady_clock::duration>(
        std::chrono::duration<double>(source_->dt()));
    std::unique_lock lk(mu_);
    if (opt_.start_on_first_client) wake_.wait(lk, [this] { return stop_requested_ || client_seen_; });
    auto next = std::chrono::steady_clock::now();
    while (!stop_requested_) {
      next += dt;
      if (wake_.wait_until(lk, next, [this] { return stop_requested_; })) break;
      std::deque<Inbound> batch;
      batch.swap(inbound_);
      lk.unlock();

      std::vector<Text> out;
      for (Inbound& in : batch) drain(in, out);
      for (json& m : source_->tick()) out.push_back(std::make_shared<const std::string>(m.dump()));
      const bool done = source_->finished();
      net::post(io_, [this, out = std::move(out), done] {
        for (const Text& t : out) broadcast(t);
        if (done && opt_.stop_when_finished) shutdown();
      });

      lk.lock();
      if (done) break;
    }
  }

  void drain(Inbound& in, std::vector<Text>& out) {
    switch (in.kind) {
      case Inbound::connected:
        source_->driver_connected();
        break;
      case Inbound::gone:
        source_->driver_gone();
        break;
      case Inbound::message:
        try {
          for (json& e : source_->driver_message(in.msg)) out.push_back(std::make_shared<const std::string>(e.dump()));
        } catch (const MalformedInputError& e) {
          net::post(io_, [this, from = in.from, why = std::string(e.what())] {
            opt_.log("bad driver message: " + why);
            if (auto c = from.lock()) c->close(websocket::close_code::policy_error, why);
          });
        }
        break;
    }
  }

  void push(Inbound in) {
    std::lock_guard lk(mu_);
    inbound_.push_back(std::move(in));
  }

  // ---- io thread ----

  void accept() {
    acceptor_.async_accept([this](beast::error_code ec, tcp::socket sock) {
      if (stopped_) return;
      if (!ec) {
        auto c = std::make_shared<Connection>(*this, std::move(sock));
        std::erase_if(all_, [](const std::weak_ptr<Connection>& w) { return w.expired(); });
        all_.push_back(c);
        c->start();
      }
      accept();
    });
  }

  void broadcast(const Text& text) {
    if (stopped_) return;
    if (text->find("\"type\":\"snapshot\"") != std::string::npos) latest_ = text;
    for (const auto& c : std::vector<std::shared_ptr<Connection>>(live_.begin(), live_.end())) c->send(text);
  }

  void shutdown() {
    if (stopped_) return;
    stopped_ = true;
    {
      std::lock_guard lk(mu_);
      stop_requested_ = true;
    }
    wake_.notify_all();
    beast::error_code ec;
    acceptor_.close(ec);
    for (const auto& c : std::vector<std::shared_ptr<Connection>>(live_.begin(), live_.end()))
      c->close(websocket::close_code::going_away, "server stopping", /*flush=*/true);
    // Peers that never answer the close handshake do not get to hold the process.
    linger(std::chrono::steady_clock::now() + std::chrono::seconds(2));
  }

  void linger(std::chrono::steady_clock::time_point deadline) {
    std::erase_if(all_, [](const std::weak_ptr<Connection>& c) { return c.expired(); });
    if (all_.empty()) return;
    if (std::chrono::steady_clock::now() >= deadline) {
      io_.stop();
      return;
    }
    grace_.expires_after(std::chrono::milliseconds(20));
    grace_.async_wait([this, deadline](beast::error_code e) {
      if (!e) linger(deadline);
    });
  }

  class Connection : public std::enable_shared_from_this<Connection> {
   public:
    Connection(Server& s, tcp::socket sock) : srv_(s), ws_(std::move(sock)) {}

    void start() {
      auto self = shared_from_this();
      http::async_read(ws_.next_layer(), buf_, req_, [self](beast::error_code ec, std::size_t) {
        if (!ec) self->on_request();
      });
    }

    void send(const Text& text) {
      if (closing_) return;
      if (queue_.size() >= srv_.opt_.max_queue) {
        close(websocket::close_code::try_again_later, "client too slow");
        return;
      }
      queue_.push_back(text);
      if (!writing_ && open_) write_next();
    }

    // With flush, what is already queued is still delivered before the close frame.
    void close(websocket::close_code code, std::string reason, bool flush = false) {
      if (closing_) return;
      closing_ = true;
      if (!flush) queue_.clear();
      srv_.live_.erase(shared_from_this());
      if (is_driver_) {
        is_driver_ = false;
        srv_.driver_ = nullptr;
        srv_.push({Inbound::gone, {}, {}});
      }
      // Close frames carry at most 123 bytes of reason.
      if (reason.size() > 120) reason.resize(120);
      close_reason_ = websocket::close_reason(code, reason);
      // A close frame is a write; it has to wait for the one in flight.
      if (!writing_) finish_close();
    }

   private:
    void on_request() {
      if (!websocket::is_upgrade(req_) || (req_.target() != "/driver" && req_.target() != "/observer")) {
        auto res = std::make_shared<http::response<http::string_body>>(http::status::not_found, req_.version());
        res->set(http::field::content_type, "text/plain");
        res->body() = "connect a websocket to /driver or /observer\n";
        res->prepare_payload();
        auto self = shared_from_this();
        http::async_write(ws_.next_layer(), *res, [self, res](beast::error_code, std::size_t) {
          beast::error_code ec;
          self->ws_.next_layer().shutdown(tcp::socket::shutdown_both, ec);
        });
        return;
      }
      role_ = req_.target() == "/driver" ? Role::driver : Role::observer;
      auto self = shared_from_this();
      ws_.async_accept(req_, [self](beast::error_code ec) {
        if (!ec) self->on_open();
      });
    }

    void on_open() {
      open_ = true;
      ws_.text(true);
      if (srv_.stopped_) {
        close(websocket::close_code::going_away, "server stopping");
        return;
      }
      if (role_ == Role::driver && (!srv_.source_accepts_driver_ || srv_.driver_)) {
        const std::string why = srv_.driver_ ? "a driver is already connected" : "this session takes no driver";
        srv_.opt_.log("rejected driver: " + why);
        close(websocket::close_code::policy_error, why);
        return;
      }
      srv_.live_.insert(shared_from_this());
      {
        std::lock_guard lk(srv_.mu_);
        srv_.client_seen_ = true;
      }
      srv_.wake_.notify_all();
      // The first thing every client sees is a full snapshot.
      send(srv_.latest_);
      if (role_ == Role::driver) {
        is_driver_ = true;
        srv_.driver_ = this;
        srv_.push({Inbound::connected, {}, {}});
      }
      read();
    }

    void finish_close() {
      if (open_ && !queue_.empty()) {
        if (!writing_) write_next();
        return;
      }
      queue_.clear();
      if (!open_) return;
      open_ = false;
      auto self = shared_from_this();
      ws_.async_close(close_reason_, [self](beast::error_code) {});
    }

    void read() {
      auto self = shared_from_this();
      ws_.async_read(in_, [self](beast::error_code ec, std::size_t) {
        if (ec) {
          // A peer-initiated close has already been answered by the stream.
          if (ec == websocket::error::closed) self->open_ = false;
          self->close(websocket::close_code::normal, "");
          return;
        }
        const std::string text = beast::buffers_to_string(self->in_.data());
        self->in_.consume(self->in_.size());
        self->on_message(text);
        if (!self->closing_) self->read();
      });
    }

    void on_message(const std::string& text) {
      if (role_ == Role::observer) {
        close(websocket::close_code::policy_error, "observers are receive-only");
        return;
      }
      try {
        srv_.push({Inbound::message, weak_from_this(), parse_client_message(text)});
      } catch (const MalformedInputError& e) {
        srv_.opt_.log(std::string("malformed driver message: ") + e.what());
        close(websocket::close_code::bad_payload, e.what());
      }
    }

    void write_next() {
      writing_ = true;
      Text t = std::move(queue_.front());
      queue_.pop_front();
      auto self = shared_from_this();
      ws_.async_write(net::buffer(*t), [self, t](beast::error_code ec, std::size_t) {
        self->writing_ = false;
        if (ec) {
          self->open_ = false;
          self->close(websocket::close_code::abnormal, "");
          return;
        }
        if (self->closing_)
          self->finish_close();
        else if (!self->queue_.empty())
          self->write_next();
      });
    }

    Server& srv_;
    websocket::stream<tcp::socket> ws_;
    beast::flat_buffer buf_;
    beast::flat_buffer in_;
    http::request<http::string_body> req_;
    std::deque<Text> queue_;
    Role role_ = Role::observer;
    bool open_ = false;
    bool closing_ = false;
    bool is_driver_ = false;
    bool writing_ = false;
    websocket::close_reason close_reason_;
  };

  ServerOptions opt_;
  std::unique_ptr<MessageSource> source_;
  unsigned short port_ = 0;
  bool source_accepts_driver_ = false;

  // shared between the threads
  std::mutex mu_;
  std::condition_variable wake_;
  std::deque<Inbound> inbound_;
  bool stop_requested_ = false;
  bool client_seen_ = false;

  // io thread only
  net::io_context io_;
  tcp::acceptor acceptor_;
  net::steady_timer grace_;
  Text latest_;
  std::set<std::shared_ptr<Connection>> live_;
  Connection* driver_ = nullptr;
  bool stopped_ = false;
  std::vector<std::weak_ptr<Connection>> all_;

  std::thread io_thread_;
  std::thread sim_thread_;
};

}  // namespace teer
