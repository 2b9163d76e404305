#pragma once

#include <chrono>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "avp/node/lifecycle.hpp"
#include "avp/runtime/node.hpp"
#include "avp/world/lot_map.hpp"

namespace avp::node {

struct VehicleOptions {
  std::string ns;
  std::size_t spawn_index = 0;
  std::string vehicle_class = "sedan";
  double length_m = 4.5;
  double width_m = 1.8;
  double max_speed_mps = 5.0;
  std::chrono::milliseconds tick{100};
  std::chrono::milliseconds heartbeat{1000};
};

/// Throws std::invalid_argument unless `ns` can be a single key segment.
void validate_namespace(const std::string& ns);

/// Per-vehicle controller: feeds bus events through `transition` and turns
/// the resulting actions into bus messages. Paths are planned locally from
/// the vehicle's last known pose against the shared map.
class VehicleNode : public runtime::Node {
 public:
  VehicleNode(world::LotMap map, VehicleOptions options);

  std::string name() const override { return options_.ns; }
  std::vector<std::string> subscriptions() const override;
  std::chrono::milliseconds tick_period() const override { return options_.tick; }
  void start(runtime::Context& ctx) override;
  void on_message(const runtime::Envelope& env, runtime::Context& ctx) override;
  void on_tick(runtime::Context& ctx) override;
  int exit_code() const override { return exit_code_; }

  const NodeState& state() const { return state_; }
  std::uint64_t status_seq() const { return status_seq_; }

 private:
  std::string key(const std::string& topic) const { return "avp/" + options_.ns + "/" + topic; }
  void apply(const NodeEvent& event, runtime::Context& ctx);
  /// Returns false when a SendPath could not be planned.
  bool execute(const Action& action, runtime::Context& ctx);
  void send_status(runtime::Context& ctx, bool failed, const std::string& detail);

  world::LotMap map_;
  VehicleOptions options_;
  NodeState state_;
  world::Pose2 pose_;
  std::uint64_t status_seq_ = 0;
  std::int64_t last_heartbeat_ns_ = 0;
  std::string last_failure_;
  int exit_code_ = 0;
};

}  // namespace avp::node
