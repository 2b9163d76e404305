#pragma once

#include <deque>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "avp/runtime/node.hpp"
#include "avp/world/lot_map.hpp"

namespace avp::world {

struct VehicleBody {
  std::string ns;
  std::string vehicle_class = "sedan";
  Pose2 pose;
  double length = 4.5;
  double width = 1.8;
  double speed_mps = 0.0;
  double max_speed_mps = 5.0;
  std::deque<Pose2> active_path;

  OrientedRect footprint() const { return {pose.x, pose.y, length / 2.0, width / 2.0, pose.yaw}; }
};

struct GoalReached {
  std::string ns;
  bool operator==(const GoalReached&) const = default;
};

struct Collision {
  std::string ns_a;  // ns_a < ns_b
  std::string ns_b;
  bool operator==(const Collision&) const = default;
};

using Event = std::variant<GoalReached, Collision>;

inline constexpr double kArrivalToleranceM = 0.15;
inline constexpr double kDefaultTickS = 0.05;

/// Fixed-timestep point-follow kinematics for every vehicle in the lot.
class World {
 public:
  explicit World(LotMap map) : map_(std::move(map)) {}

  const LotMap& map() const { return map_; }
  const std::map<std::string, VehicleBody>& vehicles() const { return vehicles_; }
  const VehicleBody* find(const std::string& ns) const;

  /// Throws std::invalid_argument on a duplicate namespace or bad body.
  void spawn(VehicleBody body);
  bool despawn(const std::string& ns);
  /// Replaces the active path; false for an unknown namespace.
  bool assign_path(const std::string& ns, std::vector<Pose2> path);

  /// Requires 0 < dt_s <= 0.1.
  std::vector<Event> step(double dt_s);
  std::uint64_t ticks() const { return ticks_; }

  /// `avp/sim/poses` payload: [{ns, x, y, yaw, len, wid, cls}].
  nlohmann::json poses_payload() const;

 private:
  LotMap map_;
  std::map<std::string, VehicleBody> vehicles_;
  std::uint64_t ticks_ = 0;
};

struct WorldNodeOptions {
  std::chrono::milliseconds tick{50};
  std::uint64_t seed = 0;
};

/// Bus front-end of World. Path, spawn and despawn requests are buffered
/// and applied at the next tick boundary in arrival order.
class WorldNode : public runtime::Node {
 public:
  WorldNode(LotMap map, WorldNodeOptions options = {});

  std::string name() const override { return "world"; }
  std::vector<std::string> subscriptions() const override;
  std::chrono::milliseconds tick_period() const override { return options_.tick; }
  void start(runtime::Context& ctx) override;
  void on_message(const runtime::Envelope& env, runtime::Context& ctx) override;
  void on_tick(runtime::Context& ctx) override;

  const World& world() const { return world_; }
  std::uint64_t collisions() const { return collisions_; }

 private:
  void apply(const runtime::Envelope& env, runtime::Context& ctx);

  World world_;
  WorldNodeOptions options_;
  std::vector<runtime::Envelope> pending_;
  std::uint64_t collisions_ = 0;
};

}  // namespace avp::world
