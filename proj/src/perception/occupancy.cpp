#include "avp/perception/occupancy.hpp"

#include <cmath>
#include <random>
#include <sstream>
#include <stdexcept>

#include <spdlog/spdlog.h>

namespace avp::perception {

using nlohmann::json;

double DetectorModel::miss_probability(const std::string& vehicle_class) const {
  auto it = p_miss.find(vehicle_class);
  return it == p_miss.end() ? 0.0 : it->second;
}

void DetectorModel::validate() const {
  for (const auto& [cls, p] : p_miss) {
    if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("miss probability for '" + cls + "' must be in [0, 1]");
  }
  if (!(pos_noise_sigma_m >= 0.0)) throw std::invalid_argument("position noise sigma must be >= 0");
}

std::map<std::string, double> parse_p_miss(const std::string& text) {
  std::map<std::string, double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    const auto eq = item.find('=');
    if (eq == std::string::npos || eq == 0) throw std::invalid_argument("expected class=prob, got '" + item + "'");
    try {
      out[item.substr(0, eq)] = std::stod(item.substr(eq + 1));
    } catch (const std::exception&) {
      throw std::invalid_argument("bad probability in '" + item + "'");
    }
  }
  return out;
}

std::vector<GroundTruthVehicle> vehicles_from_poses(const json& payload) {
  std::vector<GroundTruthVehicle> out;
  if (!payload.is_array()) return out;
  for (const auto& v : payload) {
    GroundTruthVehicle g;
    g.ns = v.value("ns", std::string());
    g.vehicle_class = v.value("cls", std::string("sedan"));
    g.pose = {v.value("x", 0.0), v.value("y", 0.0), v.value("yaw", 0.0)};
    g.length = v.value("len", 4.5);
    g.width = v.value("wid", 1.8);
    out.push_back(std::move(g));
  }
  return out;
}

std::vector<OrientedRect> detect(std::span<const GroundTruthVehicle> vehicles, const DetectorModel& model,
                                 std::uint64_t frame_seq) {
  // splitmix64 finaliser decorrelates consecutive frame numbers
  std::uint64_t z = model.seed + 0x9e3779b97f4a7c15ULL * (frame_seq + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  z ^= z >> 31;
  std::mt19937_64 rng(z);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, 1.0);

  std::vector<OrientedRect> out;
  for (const auto& v : vehicles) {
    const double u = unit(rng);
    const double dx = noise(rng);
    const double dy = noise(rng);
    if (u < model.miss_probability(v.vehicle_class)) continue;
    auto rect = v.footprint();
    rect.cx += model.pos_noise_sigma_m * dx;
    rect.cy += model.pos_noise_sigma_m * dy;
    out.push_back(rect);
  }
  return out;
}

OccupancyFrame compute_occupancy(std::span<const OrientedRect> detections, const world::LotMap& map, double theta) {
  if (!(theta >= 0.0 && theta < 1.0)) throw std::invalid_argument("overlap ratio theta must be in [0, 1)");
  OccupancyFrame frame;
  for (const auto& spot : map.spots) {
    bool occupied = false;
    for (const auto& d : detections) {
      const auto overlap = world::oriented_rect_overlap(d, spot.rect);
      if (overlap.intersects && overlap.area / spot.rect.area() > theta) {
        occupied = true;
        break;
      }
    }
    (occupied ? frame.occupied : frame.available).insert(spot.id);
  }
  return frame;
}

json to_json(const OccupancyFrame& frame) {
  return json{{"frame_seq", frame.frame_seq}, {"occupied", frame.occupied}, {"available", frame.available}};
}

OccupancyFrame occupancy_from_json(const json& doc, std::int64_t timestamp_ns) {
  OccupancyFrame frame;
  frame.frame_seq = doc.at("frame_seq").get<std::uint64_t>();
  frame.timestamp_ns = timestamp_ns;
  frame.occupied = doc.at("occupied").get<std::set<SpotId>>();
  frame.available = doc.at("available").get<std::set<SpotId>>();
  return frame;
}

// --- RsuNode ---------------------------------------------------------------

RsuNode::RsuNode(world::LotMap map, DetectorModel model, RsuOptions options)
    : map_(std::move(map)), model_(std::move(model)), options_(options) {
  model_.validate();
  if (!(options_.rate_hz > 0.0)) throw std::invalid_argument("rsu rate must be positive");
  if (!(options_.theta >= 0.0 && options_.theta < 1.0)) throw std::invalid_argument("theta must be in [0, 1)");
}

std::chrono::milliseconds RsuNode::tick_period() const {
  return std::chrono::milliseconds(static_cast<long>(std::lround(1000.0 / options_.rate_hz)));
}

void RsuNode::on_message(const runtime::Envelope& env, runtime::Context& ctx) {
  (void)ctx;
  latest_ = vehicles_from_poses(env.payload);
  latest_seq_ = env.seq;
}

void RsuNode::on_tick(runtime::Context& ctx) {
  if (!latest_) {
    if (!warned_) spdlog::info("rsu: no pose snapshot yet, not publishing");
    warned_ = true;
    return;
  }
  ++frame_seq_;
  const auto detections = detect(*latest_, model_, frame_seq_);
  auto frame = compute_occupancy(detections, map_, options_.theta);
  frame.frame_seq = frame_seq_;
  auto payload = to_json(frame);
  payload["poses_seq"] = latest_seq_;
  ctx.publish("avp/rsu/occupancy", std::move(payload));
}

}  // namespace avp::perception
