#include "avp/world/routing.hpp"

#include <cmath>
#include <limits>
#include <map>
#include <set>

namespace avp::world {

std::string to_string(const Goal& goal) {
  switch (goal.kind) {
    case Goal::Kind::Spot:
      return "spot " + std::to_string(goal.spot);
    case Goal::Kind::DropoffBay:
      return "dropoff bay";
    case Goal::Kind::PickupBay:
      return "pickup bay";
  }
  return "unknown goal";
}

GraphPath shortest_path(const LotMap& map, NodeId from, NodeId to) {
  if (!map.nodes.contains(from)) throw RoutingError("unknown waypoint " + std::to_string(from));
  if (!map.nodes.contains(to)) throw RoutingError("unknown waypoint " + std::to_string(to));

  constexpr double inf = std::numeric_limits<double>::infinity();
  std::map<NodeId, double> dist;
  std::map<NodeId, NodeId> prev;
  std::set<std::pair<double, NodeId>> frontier;  // ordered by (cost, id)
  std::set<NodeId> settled;
  dist[from] = 0.0;
  frontier.insert({0.0, from});

  while (!frontier.empty()) {
    const auto [d, cur] = *frontier.begin();
    frontier.erase(frontier.begin());
    if (!settled.insert(cur).second) continue;
    if (cur == to) break;
    auto adj = map.adjacency.find(cur);
    if (adj == map.adjacency.end()) continue;
    for (const auto& [next, w] : adj->second) {
      if (settled.contains(next)) continue;
      const double nd = d + w;
      auto it = dist.find(next);
      const double old = it == dist.end() ? inf : it->second;
      if (nd < old || (nd == old && cur < prev[next])) {
        if (it != dist.end()) frontier.erase({old, next});
        dist[next] = nd;
        prev[next] = cur;
        frontier.insert({nd, next});
      }
    }
  }

  if (!settled.contains(to)) {
    throw RoutingError("waypoint " + std::to_string(to) + " is unreachable from waypoint " + std::to_string(from));
  }
  GraphPath path;
  path.cost = dist[to];
  for (NodeId n = to;; n = prev[n]) {
    path.nodes.insert(path.nodes.begin(), n);
    if (n == from) break;
  }
  return path;
}

Approach goal_approach(const LotMap& map, const Goal& goal) {
  switch (goal.kind) {
    case Goal::Kind::Spot: {
      auto it = map.spot_approach.find(goal.spot);
      if (it == map.spot_approach.end()) throw RoutingError("no approach for spot " + std::to_string(goal.spot));
      return it->second;
    }
    case Goal::Kind::DropoffBay:
      return map.dropoff_approach();
    case Goal::Kind::PickupBay:
      return map.pickup_approach();
  }
  throw RoutingError("unknown goal kind");
}

Route plan_route(const LotMap& map, const Pose2& from, const Goal& goal, const RouteOptions& options) {
  const auto start = map.nearest_node(from.position());
  if (!start || start->second > options.snap_distance_m) {
    throw RoutingError("no waypoint within " + std::to_string(options.snap_distance_m) + " m of (" +
                       std::to_string(from.x) + ", " + std::to_string(from.y) + ")");
  }
  const auto approach = goal_approach(map, goal);
  const auto graph = shortest_path(map, start->first, approach.node);

  Route route;
  route.nodes = graph.nodes;
  route.cost = graph.cost;

  Vec2 cursor = from.position();
  double heading = from.yaw;
  for (std::size_t i = 0; i < graph.nodes.size(); ++i) {
    const Vec2 p = map.nodes.at(graph.nodes[i]);
    if (i == 0 && distance(p, cursor) <= options.arrival_tolerance_m) continue;
    const Vec2 d = p - cursor;
    if (norm(d) > 0.0) heading = std::atan2(d.y, d.x);
    route.poses.push_back({p.x, p.y, normalize_angle(heading)});
    cursor = p;
  }
  if (!route.poses.empty() && distance(route.poses.back().position(), approach.final_pose.position()) == 0.0) {
    route.poses.pop_back();
  }
  route.poses.push_back(approach.final_pose);
  return route;
}

}  // namespace avp::world
