#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <queue>
#include <string>
#include <vector>

#include "avp/msgbus/routing_table.hpp"
#include "avp/msgbus/transport.hpp"
#include "avp/runtime/node.hpp"

namespace avp::runtime {

/// Runs `node` against a live session on wall-clock time until `stop` is
/// set, the node reports a nonzero exit code, or the router disconnects.
/// Returns the process exit code (2 on router disconnect).
int run_on_session(Node& node, msgbus::Session& session, const std::atomic<bool>& stop);

/// Deterministic discrete-event host for nodes: virtual time, in-process
/// routing through the same RoutingTable as the TCP router, and a fixed
/// delivery latency. Identical inputs yield identical message sequences.
class VirtualKernel {
 public:
  using TapFn = std::function<void(const Envelope& env, std::int64_t recv_ns)>;

  struct Options {
    std::int64_t start_ns = 1'700'000'000'000'000'000;
    std::int64_t latency_ns = 1'000'000;
  };

  VirtualKernel() : VirtualKernel(Options{}) {}
  explicit VirtualKernel(Options options);

  std::int64_t now_ns() const { return now_ns_; }

  /// Registers the node, calls start() now, then publishes its ready key.
  void add(std::shared_ptr<Node> node);
  /// Drops the node as if its process were killed.
  void remove(const std::string& name);
  bool has(const std::string& name) const { return nodes_.contains(name); }

  /// Publishes from a non-node client (an operator, the harness).
  void publish_as(const std::string& sender, const std::string& key, json payload);
  void schedule(std::int64_t at_ns, std::function<void()> fn);
  void set_tap(TapFn tap) { tap_ = std::move(tap); }

  /// Processes events up to `until_ns` or until `done()` holds after an event.
  void run_until(std::int64_t until_ns, const std::function<bool()>& done = {});

 private:
  struct Entry {
    std::shared_ptr<Node> node;
    std::int64_t generation = 0;
  };
  struct Event {
    std::int64_t at_ns;
    std::uint64_t order;
    std::function<void()> fn;
    bool operator>(const Event& o) const { return at_ns != o.at_ns ? at_ns > o.at_ns : order > o.order; }
  };
  class NodeContext;

  void push(std::int64_t at_ns, std::function<void()> fn);
  void route(Envelope env);
  void schedule_tick(const std::string& name, std::int64_t generation, std::int64_t at_ns);

  Options options_;
  std::int64_t now_ns_;
  std::uint64_t order_ = 0;
  std::int64_t generation_ = 0;
  std::priority_queue<Event, std::vector<Event>, std::greater<>> events_;
  msgbus::RoutingTable table_;
  std::map<std::string, Entry> nodes_;
  std::map<std::pair<std::string, std::string>, std::uint64_t> seq_;
  TapFn tap_;
};

}  // namespace avp::runtime
