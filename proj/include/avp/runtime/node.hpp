#pragma once

#include <chrono>
#include <cstdint>
#include <string>
#include <vector>

#include "avp/msgbus/envelope.hpp"

namespace avp::runtime {

using msgbus::Envelope;
using msgbus::json;

/// What a node sees of its environment: a clock and a publisher. Backed
/// either by a live bus session or by the virtual-time kernel.
class Context {
 public:
  virtual ~Context() = default;
  virtual std::int64_t now_ns() const = 0;
  virtual void publish(const std::string& key, json payload) = 0;
};

/// A reactive bus participant. All state changes happen in `start`,
/// `on_message` and `on_tick`, which a driver calls from one context.
class Node {
 public:
  virtual ~Node() = default;

  /// Bus client id; also the readiness name (`avp/_ready/<name>`).
  virtual std::string name() const = 0;
  virtual std::vector<std::string> subscriptions() const = 0;
  virtual std::chrono::milliseconds tick_period() const = 0;

  virtual void start(Context& ctx) { (void)ctx; }
  virtual void on_message(const Envelope& env, Context& ctx) = 0;
  virtual void on_tick(Context& ctx) { (void)ctx; }

  /// Nonzero stops the driver and becomes the process exit code.
  virtual int exit_code() const { return 0; }
};

inline std::string ready_key(const std::string& name) { return "avp/_ready/" + name; }

/// Second segment of `avp/<ns>/...`.
std::string namespace_of(const std::string& key);

}  // namespace avp::runtime
