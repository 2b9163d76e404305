#include "avp/world/world.hpp"

#include <cmath>
#include <stdexcept>

#include <spdlog/spdlog.h>

#include "avp/world/geometry.hpp"

namespace avp::world {

using nlohmann::json;

const VehicleBody* World::find(const std::string& ns) const {
  auto it = vehicles_.find(ns);
  return it == vehicles_.end() ? nullptr : &it->second;
}

void World::spawn(VehicleBody body) {
  if (body.ns.empty()) throw std::invalid_argument("vehicle namespace must not be empty");
  if (!(body.length > 0.0) || !(body.width > 0.0)) throw std::invalid_argument("vehicle footprint must be positive");
  if (!(body.max_speed_mps > 0.0)) throw std::invalid_argument("vehicle max speed must be positive");
  if (vehicles_.contains(body.ns)) throw std::invalid_argument("vehicle '" + body.ns + "' already spawned");
  body.pose.yaw = normalize_angle(body.pose.yaw);
  body.speed_mps = 0.0;
  vehicles_.emplace(body.ns, std::move(body));
}

bool World::despawn(const std::string& ns) { return vehicles_.erase(ns) > 0; }

bool World::assign_path(const std::string& ns, std::vector<Pose2> path) {
  auto it = vehicles_.find(ns);
  if (it == vehicles_.end()) return false;
  it->second.active_path.assign(path.begin(), path.end());
  return true;
}

std::vector<Event> World::step(double dt_s) {
  if (!(dt_s > 0.0) || dt_s > 0.1) throw std::invalid_argument("step dt must be in (0, 0.1] s");
  std::vector<Event> events;
  ++ticks_;

  for (auto& [ns, v] : vehicles_) {
    v.speed_mps = 0.0;
    if (v.active_path.empty()) continue;

    // targets already under the vehicle cost no motion
    while (!v.active_path.empty() && distance(v.pose.position(), v.active_path.front().position()) <= kArrivalToleranceM) {
      v.pose.yaw = normalize_angle(v.active_path.front().yaw);
      v.active_path.pop_front();
    }
    if (v.active_path.empty()) {
      events.emplace_back(GoalReached{ns});
      continue;
    }

    const Pose2 target = v.active_path.front();
    const Vec2 delta = target.position() - v.pose.position();
    const double remaining = norm(delta);
    const double advance = std::min(v.max_speed_mps * dt_s, remaining);
    const Vec2 dir = (1.0 / remaining) * delta;
    v.pose.x += advance * dir.x;
    v.pose.y += advance * dir.y;
    v.pose.yaw = std::atan2(dir.y, dir.x);
    v.speed_mps = advance / dt_s;

    if (distance(v.pose.position(), target.position()) <= kArrivalToleranceM) {
      v.pose.yaw = normalize_angle(target.yaw);
      v.active_path.pop_front();
      if (v.active_path.empty()) events.emplace_back(GoalReached{ns});
    }
  }

  for (auto a = vehicles_.begin(); a != vehicles_.end(); ++a) {
    for (auto b = std::next(a); b != vehicles_.end(); ++b) {
      if (oriented_rect_overlap(a->second.footprint(), b->second.footprint()).intersects) {
        events.emplace_back(Collision{a->first, b->first});
      }
    }
  }
  return events;
}

json World::poses_payload() const {
  json out = json::array();
  for (const auto& [ns, v] : vehicles_) {
    out.push_back({{"ns", ns},
                   {"x", v.pose.x},
                   {"y", v.pose.y},
                   {"yaw", v.pose.yaw},
                   {"len", v.length},
                   {"wid", v.width},
                   {"cls", v.vehicle_class}});
  }
  return out;
}

// --- WorldNode -------------------------------------------------------------

WorldNode::WorldNode(LotMap map, WorldNodeOptions options) : world_(std::move(map)), options_(options) {
  if (options_.tick.count() <= 0 || options_.tick.count() > 100) {
    throw std::invalid_argument("world tick must be in (0, 100] ms");
  }
}

std::vector<std::string> WorldNode::subscriptions() const {
  return {"avp/*/path", "avp/*/spawn", "avp/*/despawn", "avp/coord/evicted"};
}

void WorldNode::start(runtime::Context& ctx) {
  spdlog::info("world: {} spots, {} spawn points, tick {} ms", world_.map().spots.size(), world_.map().spawn_points.size(),
               options_.tick.count());
  (void)ctx;
}

void WorldNode::on_message(const runtime::Envelope& env, runtime::Context& ctx) {
  (void)ctx;
  pending_.push_back(env);
}

void WorldNode::apply(const runtime::Envelope& env, runtime::Context& ctx) {
  if (env.key == "avp/coord/evicted") {
    for (const auto& ns : env.payload.value("evicted", json::array())) {
      if (world_.despawn(ns.get<std::string>())) spdlog::info("world: removed evicted vehicle '{}'", ns.get<std::string>());
    }
    return;
  }
  const auto ns = runtime::namespace_of(env.key);
  const auto topic = env.key.substr(env.key.rfind('/') + 1);
  if (topic == "spawn") {
    const auto index = env.payload.value("spawn_index", -1);
    const auto& spawns = world_.map().spawn_points;
    if (index < 0 || static_cast<std::size_t>(index) >= spawns.size()) {
      spdlog::warn("world: '{}' requested invalid spawn index {}", ns, index);
      return;
    }
    VehicleBody body;
    body.ns = ns;
    body.pose = spawns[static_cast<std::size_t>(index)];
    body.vehicle_class = env.payload.value("class", std::string("sedan"));
    body.length = env.payload.value("length", 4.5);
    body.width = env.payload.value("width", 1.8);
    body.max_speed_mps = env.payload.value("max_speed", 5.0);
    try {
      world_.spawn(std::move(body));
    } catch (const std::invalid_argument& e) {
      spdlog::warn("world: spawn of '{}' rejected: {}", ns, e.what());
    }
  } else if (topic == "despawn") {
    world_.despawn(ns);
  } else if (topic == "path") {
    std::vector<Pose2> path;
    bool ok = env.payload.is_array() && !env.payload.empty();
    if (ok) {
      try {
        for (const auto& p : env.payload) path.push_back({p.at("x").get<double>(), p.at("y").get<double>(), p.value("yaw", 0.0)});
      } catch (const json::exception&) {
        ok = false;
      }
    }
    if (!ok || !world_.assign_path(ns, std::move(path))) {
      ctx.publish("avp/" + ns + "/goal_status", json{{"status", "failed"}});
    }
  }
}

void WorldNode::on_tick(runtime::Context& ctx) {
  auto pending = std::move(pending_);
  pending_.clear();
  for (const auto& env : pending) apply(env, ctx);

  const double dt = std::chrono::duration<double>(options_.tick).count();
  const auto events = world_.step(dt);
  ctx.publish("avp/sim/poses", world_.poses_payload());
  for (const auto& ev : events) {
    if (const auto* reached = std::get_if<GoalReached>(&ev)) {
      ctx.publish("avp/" + reached->ns + "/goal_status", json{{"status", "reached"}});
    } else if (const auto* hit = std::get_if<Collision>(&ev)) {
      ++collisions_;
      ctx.publish("avp/sim/collision", json{{"a", hit->ns_a}, {"b", hit->ns_b}, {"tick", world_.ticks()}});
    }
  }
}

}  // namespace avp::world
