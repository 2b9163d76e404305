#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "avp/msgbus/envelope.hpp"
#include "avp/msgbus/key_expr.hpp"
#include "avp/msgbus/routing_table.hpp"

namespace avp::msgbus {

struct Address {
  std::string host;
  std::uint16_t port = 0;

  std::string str() const { return host + ":" + std::to_string(port); }
};

/// Accepts `host:port` or `:port` (loopback).
Address parse_address(std::string_view text);

/// Thread-safe FIFO of envelopes; the consumer side of a subscription.
class MessageStream {
 public:
  void push(Envelope env);
  std::optional<Envelope> try_pop();
  /// Waits until an envelope is available, the deadline passes, or the
  /// stream is closed.
  std::optional<Envelope> pop_until(std::chrono::steady_clock::time_point deadline);
  std::optional<Envelope> pop_for(std::chrono::milliseconds timeout) {
    return pop_until(std::chrono::steady_clock::now() + timeout);
  }
  void close();
  bool closed() const;
  std::size_t size() const;

 private:
  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::deque<Envelope> queue_;
  bool closed_ = false;
};

struct RouterOptions {
  std::string listen = "127.0.0.1:7447";
  std::size_t max_frame_bytes = kDefaultMaxFrameBytes;
};

/// Central router: accepts client sessions over TCP and forwards each data
/// frame to every session with a matching subscription. Ingress order per
/// connection is preserved on every egress queue.
class Router {
 public:
  explicit Router(RouterOptions options);
  ~Router();
  Router(const Router&) = delete;
  Router& operator=(const Router&) = delete;

  void start();
  void stop();

  std::uint16_t port() const { return port_; }
  std::string address() const;
  std::vector<std::string> roster() const;

 private:
  struct Connection;

  void accept_loop();
  void reader_loop(const std::shared_ptr<Connection>& conn);
  void writer_loop(const std::shared_ptr<Connection>& conn);
  void handle_frame(const std::shared_ptr<Connection>& conn, Envelope env);
  void send_control(Connection& conn, const std::string& key, json payload, bool close_after = false);
  void drop(const std::shared_ptr<Connection>& conn);
  void reap();

  RouterOptions options_;
  int listen_fd_ = -1;
  std::uint16_t port_ = 0;
  std::atomic<bool> running_{false};
  std::thread accept_thread_;

  mutable std::mutex mu_;  // guards table_, by_id_, connections_
  RoutingTable table_;
  std::map<std::string, std::shared_ptr<Connection>> by_id_;
  std::vector<std::shared_ptr<Connection>> connections_;
};

struct SessionOptions {
  std::size_t max_frame_bytes = kDefaultMaxFrameBytes;
  std::chrono::milliseconds connect_timeout{5000};
};

/// Client connection to a Router. Safe for one publishing context and one
/// consuming context at a time.
class Session {
 public:
  static std::unique_ptr<Session> connect(const std::string& router_address, const std::string& client_id,
                                          SessionOptions options = {});
  ~Session();
  Session(const Session&) = delete;
  Session& operator=(const Session&) = delete;

  const std::string& client_id() const { return client_id_; }

  /// Returns the envelope as sent. Throws FrameTooLarge (nothing sent) or
  /// BusError when the session is closed.
  Envelope publish(const std::string& key, json payload);

  /// Registers `pattern` with the router. Envelopes matching several
  /// subscriptions that share one stream are pushed to it once.
  std::shared_ptr<MessageStream> subscribe(const std::string& pattern, std::shared_ptr<MessageStream> into = nullptr);

  /// Incoming envelopes matching `external` are re-keyed into `internal`
  /// by the router before subscription matching.
  void remap(const std::string& external, const std::string& internal);

  /// Round trip through the router; when it returns, every earlier
  /// subscribe/remap from this session is in effect.
  void sync(std::chrono::milliseconds timeout = std::chrono::milliseconds(5000));

  bool is_open() const { return open_.load(); }
  std::optional<std::string> last_error() const;
  void close();

 private:
  Session(std::string client_id, SessionOptions options);
  void reader_loop();
  void send_frame(const Envelope& env);
  void send_control(const std::string& key, json payload);

  struct LocalSubscription {
    KeyExpr pattern;
    std::shared_ptr<MessageStream> stream;
  };

  std::string client_id_;
  SessionOptions options_;
  int fd_ = -1;
  std::atomic<bool> open_{false};
  std::thread reader_;

  std::mutex write_mu_;
  std::map<std::string, std::uint64_t> next_seq_;

  mutable std::mutex state_mu_;
  std::condition_variable state_cv_;
  bool hello_done_ = false;
  std::optional<std::string> error_;
  std::uint64_t sync_sent_ = 0;
  std::uint64_t sync_acked_ = 0;
  std::vector<LocalSubscription> subscriptions_;
};

}  // namespace avp::msgbus
