#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "avp/world/lot_map.hpp"

namespace avp::world {

class RoutingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Goal {
  enum class Kind { Spot, DropoffBay, PickupBay };
  Kind kind = Kind::DropoffBay;
  SpotId spot = 0;

  static Goal to_spot(SpotId id) { return {Kind::Spot, id}; }
  static Goal dropoff() { return {Kind::DropoffBay, 0}; }
  static Goal pickup() { return {Kind::PickupBay, 0}; }

  bool operator==(const Goal&) const = default;
};

std::string to_string(const Goal& goal);

struct RouteOptions {
  double snap_distance_m = 5.0;
  double arrival_tolerance_m = 0.15;
};

struct Route {
  std::vector<Pose2> poses;     // targets to drive through; last is the goal pose
  std::vector<NodeId> nodes;    // graph nodes visited, start to approach node
  double cost = 0.0;            // graph cost between those nodes
};

struct GraphPath {
  std::vector<NodeId> nodes;
  double cost = 0.0;
};

/// Dijkstra by edge weight; among equal-cost frontiers the smaller node id is
/// settled first and keeps the smaller predecessor. Throws RoutingError when
/// `to` is unreachable.
GraphPath shortest_path(const LotMap& map, NodeId from, NodeId to);

Approach goal_approach(const LotMap& map, const Goal& goal);

/// Snap to the nearest waypoint, follow the shortest path to the goal's
/// approach node, then finish at the goal pose. Waypoint targets carry the
/// heading of the segment that reaches them.
Route plan_route(const LotMap& map, const Pose2& from, const Goal& goal, const RouteOptions& options = {});

}  // namespace avp::world
