#pragma once

#include <atomic>
#include <chrono>
#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "avp/msgbus/transport.hpp"

namespace avp::msgbus {

/// Round-trip statistics in the RTT / Max RTT / Samples layout.
struct RttStats {
  double mean_ms = 0.0;
  double std_ms = 0.0;
  double max_ms = 0.0;
  std::size_t samples = 0;
};

json to_json(const RttStats& stats);
RttStats rtt_stats_from_json(const json& doc);

/// Sample standard deviation; a single sample has std 0. Throws BusError on
/// an empty input.
RttStats summarize_rtt(std::span<const double> samples_ms);

std::string ping_key(const std::string& peer_id);
std::string pong_key(const std::string& requester_id);

struct ProbeOptions {
  std::size_t count = 1;
  double interval_ms = 100.0;
  /// How long to keep waiting for outstanding pongs after the last ping.
  std::chrono::milliseconds drain_timeout{1000};
};

/// Sends `count` pings to `peer_id`'s echo responder and measures each
/// pong's round trip. Lost pongs reduce the sample count; zero pongs throws.
RttStats rtt_probe(Session& session, const std::string& peer_id, const ProbeOptions& options);

/// Pings `peer_id` at a fixed interval on a background thread for as long as
/// it runs; used for continuous measurement during a scenario.
class RttMonitor {
 public:
  RttMonitor(Session& session, std::string peer_id, std::chrono::milliseconds interval = std::chrono::milliseconds(100));
  ~RttMonitor();
  RttMonitor(const RttMonitor&) = delete;
  RttMonitor& operator=(const RttMonitor&) = delete;

  /// Stops pinging, waits up to `drain` for in-flight pongs and returns the
  /// round trips collected so far, in milliseconds.
  std::vector<double> stop(std::chrono::milliseconds drain = std::chrono::milliseconds(500));
  const std::string& peer() const { return peer_id_; }

 private:
  void run();

  Session& session_;
  std::string peer_id_;
  std::chrono::milliseconds interval_;
  std::shared_ptr<MessageStream> pongs_;
  std::atomic<bool> running_{true};
  std::chrono::milliseconds drain_{500};
  std::vector<double> samples_;
  std::thread thread_;
};

/// Answers pings addressed to `responder_id`, optionally after a fixed
/// delay, on a dedicated thread.
class EchoResponder {
 public:
  EchoResponder(Session& session, std::string responder_id, std::chrono::microseconds delay = {});
  ~EchoResponder();
  EchoResponder(const EchoResponder&) = delete;
  EchoResponder& operator=(const EchoResponder&) = delete;

  void stop();
  std::size_t answered() const { return answered_.load(); }

 private:
  void run();

  Session& session_;
  std::string responder_id_;
  std::chrono::microseconds delay_;
  std::shared_ptr<MessageStream> pings_;
  std::atomic<bool> running_{true};
  std::atomic<std::size_t> answered_{0};
  std::thread thread_;
};

}  // namespace avp::msgbus
