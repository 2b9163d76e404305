#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "avp/runtime/node.hpp"
#include "avp/world/lot_map.hpp"

namespace avp::perception {

using world::OrientedRect;
using world::SpotId;

/// Stand-in for the overhead detector: class-conditional miss probability
/// plus isotropic Gaussian noise on the detected box centre.
struct DetectorModel {
  std::map<std::string, double> p_miss;  // by vehicle class; absent = 0
  double pos_noise_sigma_m = 0.0;
  std::uint64_t seed = 0;

  double miss_probability(const std::string& vehicle_class) const;
  /// Throws std::invalid_argument when a probability is outside [0, 1] or
  /// sigma is negative.
  void validate() const;
};

/// Parses `class=prob,class=prob`.
std::map<std::string, double> parse_p_miss(const std::string& text);

struct GroundTruthVehicle {
  std::string ns;
  std::string vehicle_class = "sedan";
  world::Pose2 pose;
  double length = 4.5;
  double width = 1.8;

  OrientedRect footprint() const { return {pose.x, pose.y, length / 2.0, width / 2.0, pose.yaw}; }
};

/// Reads the `avp/sim/poses` payload.
std::vector<GroundTruthVehicle> vehicles_from_poses(const nlohmann::json& payload);

/// Each vehicle is dropped independently with its class's miss probability;
/// survivors yield their footprint with a noisy centre. Deterministic in
/// (model.seed, frame_seq) and the input order.
std::vector<OrientedRect> detect(std::span<const GroundTruthVehicle> vehicles, const DetectorModel& model,
                                 std::uint64_t frame_seq);

struct OccupancyFrame {
  std::uint64_t frame_seq = 0;
  std::int64_t timestamp_ns = 0;
  std::set<SpotId> occupied;
  std::set<SpotId> available;
};

inline constexpr double kDefaultOverlapTheta = 0.05;

/// A spot is occupied iff some detection covers more than `theta` of the
/// spot's own area.
OccupancyFrame compute_occupancy(std::span<const OrientedRect> detections, const world::LotMap& map,
                                 double theta = kDefaultOverlapTheta);

nlohmann::json to_json(const OccupancyFrame& frame);
OccupancyFrame occupancy_from_json(const nlohmann::json& doc, std::int64_t timestamp_ns = 0);

struct RsuOptions {
  double rate_hz = 10.0;
  double theta = kDefaultOverlapTheta;
};

/// Publishes an OccupancyFrame on `avp/rsu/occupancy` at `rate_hz` from the
/// latest ground-truth pose snapshot.
class RsuNode : public runtime::Node {
 public:
  RsuNode(world::LotMap map, DetectorModel model, RsuOptions options = {});

  std::string name() const override { return "rsu"; }
  std::vector<std::string> subscriptions() const override { return {"avp/sim/poses"}; }
  std::chrono::milliseconds tick_period() const override;
  void on_message(const runtime::Envelope& env, runtime::Context& ctx) override;
  void on_tick(runtime::Context& ctx) override;

  std::uint64_t frames_published() const { return frame_seq_; }

 private:
  world::LotMap map_;
  DetectorModel model_;
  RsuOptions options_;
  std::optional<std::vector<GroundTruthVehicle>> latest_;
  std::uint64_t latest_seq_ = 0;  // envelope seq of the snapshot in use
  std::uint64_t frame_seq_ = 0;
  bool warned_ = false;
};

}  // namespace avp::perception
