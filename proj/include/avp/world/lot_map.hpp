#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "avp/world/geometry.hpp"

namespace avp::world {

using SpotId = std::uint32_t;
using NodeId = std::int64_t;

class MapError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SpotRegion {
  SpotId id = 0;
  OrientedRect rect;
};

struct WaypointEdge {
  NodeId a = 0;
  NodeId b = 0;
  double weight = 0.0;
};

struct Approach {
  NodeId node = 0;
  Pose2 final_pose;
};

/// Static parking-lot world, validated on load.
struct LotMap {
  std::vector<SpotRegion> spots;  // sorted by id
  OrientedRect dropoff_bay;
  OrientedRect pickup_bay;
  std::vector<Pose2> spawn_points;
  std::map<NodeId, Vec2> nodes;
  std::vector<WaypointEdge> edges;
  std::map<SpotId, Approach> spot_approach;
  /// node -> (neighbour, weight), built from `edges`
  std::map<NodeId, std::vector<std::pair<NodeId, double>>> adjacency;

  const SpotRegion* find_spot(SpotId id) const;
  std::vector<SpotId> spot_ids() const;
  /// Nearest node to `p`, ties to the smaller id.
  std::optional<std::pair<NodeId, double>> nearest_node(Vec2 p) const;
  Approach dropoff_approach() const;
  Approach pickup_approach() const;
};

/// Throws MapError naming the offending entity.
LotMap load_map(const nlohmann::json& doc);
LotMap load_map_file(const std::filesystem::path& path);
nlohmann::json to_json(const LotMap& map);

nlohmann::json rect_to_json(const OrientedRect& rect);
OrientedRect rect_from_json(const nlohmann::json& doc);

}  // namespace avp::world
