#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "avp/msgbus/transport.hpp"

namespace avp::harness {

/// Topics streamed to panel clients.
std::vector<std::string> gateway_patterns();

struct PanelCommand {
  std::string key;  // avp/<ns>/cmd
  msgbus::json payload;
};

/// Validates an inbound panel message `{"kind": DROPOFF|PARK|RETRIEVE,
/// "target_ns": ns}`. On failure returns nullopt and sets `error`.
std::optional<PanelCommand> parse_panel_command(const std::string& text, std::string& error);

struct GatewayOptions {
  std::string bind = "127.0.0.1";
  std::uint16_t port = 8765;  // 0 picks a free port
  std::string client_id = "gateway";
  /// A client whose unsent backlog exceeds this is disconnected.
  std::size_t max_backlog = 4096;
};

/// Websocket bridge between the bus and operator panels. Every envelope on
/// the streamed topics goes to every client as its JSON text; client
/// commands are published on `avp/<target_ns>/cmd` and acknowledged with
/// `{"type":"ack"}`, malformed ones answered with `{"type":"error"}`.
class Gateway {
 public:
  Gateway(std::string router_address, GatewayOptions options = {});
  ~Gateway();
  Gateway(const Gateway&) = delete;
  Gateway& operator=(const Gateway&) = delete;

  /// Connects to the router, starts listening and announces readiness.
  void start();
  void stop();
  /// Blocks until stop() or the router connection drops; returns 0 or 2.
  int wait();

  std::uint16_t port() const { return port_; }
  std::size_t clients() const { return clients_.load(); }

 private:
  class Impl;
  std::string router_address_;
  GatewayOptions options_;
  std::unique_ptr<Impl> impl_;
  std::uint16_t port_ = 0;
  std::atomic<std::size_t> clients_{0};
};

}  // namespace avp::harness
