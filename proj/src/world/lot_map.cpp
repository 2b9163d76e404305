#include "avp/world/lot_map.hpp"

#include <algorithm>
#include <fstream>
#include <queue>
#include <set>

namespace avp::world {

using nlohmann::json;

const SpotRegion* LotMap::find_spot(SpotId id) const {
  auto it = std::lower_bound(spots.begin(), spots.end(), id, [](const SpotRegion& s, SpotId v) { return s.id < v; });
  return it != spots.end() && it->id == id ? &*it : nullptr;
}

std::vector<SpotId> LotMap::spot_ids() const {
  std::vector<SpotId> out;
  out.reserve(spots.size());
  for (const auto& s : spots) out.push_back(s.id);
  return out;
}

std::optional<std::pair<NodeId, double>> LotMap::nearest_node(Vec2 p) const {
  std::optional<std::pair<NodeId, double>> best;
  for (const auto& [id, pos] : nodes) {
    const double d = distance(p, pos);
    if (!best || d < best->second) best = {id, d};
  }
  return best;
}

namespace {

Approach bay_approach(const LotMap& map, const OrientedRect& bay) {
  const auto nearest = map.nearest_node({bay.cx, bay.cy});
  if (!nearest) throw MapError("map has no waypoints");
  return {nearest->first, Pose2{bay.cx, bay.cy, normalize_angle(bay.yaw)}};
}

double number(const json& doc, const char* field, const std::string& what) {
  if (!doc.contains(field) || !doc.at(field).is_number()) throw MapError(what + ": missing numeric field '" + field + "'");
  return doc.at(field).get<double>();
}

}  // namespace

Approach LotMap::dropoff_approach() const { return bay_approach(*this, dropoff_bay); }
Approach LotMap::pickup_approach() const { return bay_approach(*this, pickup_bay); }

json rect_to_json(const OrientedRect& r) {
  return json{{"cx", r.cx}, {"cy", r.cy}, {"hx", r.hx}, {"hy", r.hy}, {"yaw", r.yaw}};
}

OrientedRect rect_from_json(const json& doc) {
  OrientedRect r{number(doc, "cx", "rect"), number(doc, "cy", "rect"), number(doc, "hx", "rect"), number(doc, "hy", "rect"),
                 doc.value("yaw", 0.0)};
  if (r.hx <= 0.0 || r.hy <= 0.0) throw MapError("rect half-extents must be positive");
  return r;
}

LotMap load_map(const json& doc) {
  if (!doc.is_object()) throw MapError("map document must be a JSON object");
  LotMap map;
  std::set<SpotId> seen;
  for (const auto& s : doc.value("spots", json::array())) {
    const auto id = s.at("id").get<SpotId>();
    if (!seen.insert(id).second) throw MapError("duplicate spot id " + std::to_string(id));
    OrientedRect rect{number(s, "cx", "spot " + std::to_string(id)), number(s, "cy", "spot " + std::to_string(id)),
                      number(s, "hx", "spot " + std::to_string(id)), number(s, "hy", "spot " + std::to_string(id)),
                      s.value("yaw", 0.0)};
    if (rect.hx <= 0.0 || rect.hy <= 0.0) throw MapError("spot " + std::to_string(id) + " has non-positive half-extents");
    map.spots.push_back({id, rect});
  }
  std::sort(map.spots.begin(), map.spots.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  for (std::size_t i = 0; i < map.spots.size(); ++i) {
    for (std::size_t j = i + 1; j < map.spots.size(); ++j) {
      if (oriented_rect_overlap(map.spots[i].rect, map.spots[j].rect).intersects) {
        throw MapError("spots " + std::to_string(map.spots[i].id) + " and " + std::to_string(map.spots[j].id) + " overlap");
      }
    }
  }

  try {
    map.dropoff_bay = rect_from_json(doc.at("dropoff_bay"));
    map.pickup_bay = rect_from_json(doc.at("pickup_bay"));
  } catch (const json::exception& e) {
    throw MapError(std::string("bay: ") + e.what());
  } catch (const MapError& e) {
    throw MapError(std::string("bay: ") + e.what());
  }

  for (const auto& p : doc.value("spawn_points", json::array())) {
    map.spawn_points.push_back({number(p, "x", "spawn point"), number(p, "y", "spawn point"), normalize_angle(p.value("yaw", 0.0))});
  }

  const auto& wp = doc.contains("waypoints") ? doc.at("waypoints") : json::object();
  for (const auto& n : wp.value("nodes", json::array())) {
    const auto id = n.at("id").get<NodeId>();
    if (map.nodes.contains(id)) throw MapError("duplicate waypoint id " + std::to_string(id));
    map.nodes[id] = {number(n, "x", "waypoint " + std::to_string(id)), number(n, "y", "waypoint " + std::to_string(id))};
  }
  if (map.nodes.empty()) throw MapError("waypoint graph has no nodes");
  for (const auto& e : wp.value("edges", json::array())) {
    WaypointEdge edge{e.at("a").get<NodeId>(), e.at("b").get<NodeId>(), 0.0};
    for (auto end : {edge.a, edge.b}) {
      if (!map.nodes.contains(end)) throw MapError("edge references unknown waypoint " + std::to_string(end));
    }
    edge.weight = e.contains("w") ? e.at("w").get<double>() : distance(map.nodes[edge.a], map.nodes[edge.b]);
    if (!(edge.weight > 0.0)) {
      throw MapError("edge " + std::to_string(edge.a) + "-" + std::to_string(edge.b) + " has non-positive weight");
    }
    map.edges.push_back(edge);
    map.adjacency[edge.a].emplace_back(edge.b, edge.weight);
    map.adjacency[edge.b].emplace_back(edge.a, edge.weight);
  }

  // connectivity: BFS from the smallest node id
  std::set<NodeId> reached{map.nodes.begin()->first};
  std::queue<NodeId> frontier;
  frontier.push(map.nodes.begin()->first);
  while (!frontier.empty()) {
    const auto cur = frontier.front();
    frontier.pop();
    for (const auto& [next, w] : map.adjacency[cur]) {
      if (reached.insert(next).second) frontier.push(next);
    }
  }
  for (const auto& [id, pos] : map.nodes) {
    if (!reached.contains(id)) {
      throw MapError("waypoint graph is disconnected: node " + std::to_string(id) + " unreachable from node " +
                     std::to_string(map.nodes.begin()->first));
    }
  }

  for (const auto& a : doc.value("spot_approach", json::array())) {
    const auto spot = a.at("spot").get<SpotId>();
    const auto node = a.at("node").get<NodeId>();
    if (!seen.contains(spot)) throw MapError("spot_approach references unknown spot " + std::to_string(spot));
    if (!map.nodes.contains(node)) throw MapError("spot_approach for spot " + std::to_string(spot) + " references unknown waypoint " + std::to_string(node));
    if (map.spot_approach.contains(spot)) throw MapError("duplicate spot_approach for spot " + std::to_string(spot));
    map.spot_approach[spot] = {node, Pose2{number(a, "x", "spot_approach"), number(a, "y", "spot_approach"),
                                           normalize_angle(a.value("yaw", 0.0))}};
  }
  for (const auto& s : map.spots) {
    if (!map.spot_approach.contains(s.id)) throw MapError("spot " + std::to_string(s.id) + " has no spot_approach entry");
  }
  return map;
}

LotMap load_map_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw MapError("cannot open map file " + path.string());
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw MapError("map file " + path.string() + " is not valid JSON: " + e.what());
  }
  return load_map(doc);
}

json to_json(const LotMap& map) {
  json doc;
  doc["spots"] = json::array();
  for (const auto& s : map.spots) {
    auto j = rect_to_json(s.rect);
    j["id"] = s.id;
    doc["spots"].push_back(j);
  }
  doc["dropoff_bay"] = rect_to_json(map.dropoff_bay);
  doc["pickup_bay"] = rect_to_json(map.pickup_bay);
  doc["spawn_points"] = json::array();
  for (const auto& p : map.spawn_points) doc["spawn_points"].push_back({{"x", p.x}, {"y", p.y}, {"yaw", p.yaw}});
  json nodes = json::array(), edges = json::array();
  for (const auto& [id, pos] : map.nodes) nodes.push_back({{"id", id}, {"x", pos.x}, {"y", pos.y}});
  for (const auto& e : map.edges) edges.push_back({{"a", e.a}, {"b", e.b}, {"w", e.weight}});
  doc["waypoints"] = {{"nodes", nodes}, {"edges", edges}};
  doc["spot_approach"] = json::array();
  for (const auto& [spot, a] : map.spot_approach) {
    doc["spot_approach"].push_back(
        {{"spot", spot}, {"node", a.node}, {"x", a.final_pose.x}, {"y", a.final_pose.y}, {"yaw", a.final_pose.yaw}});
  }
  return doc;
}

}  // namespace avp::world
