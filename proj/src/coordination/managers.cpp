#include "avp/coordination/managers.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>

#include <spdlog/spdlog.h>

namespace avp::coordination {

AllocationPolicy parse_policy(const std::string& text) {
  if (text == "lowest-id") return AllocationPolicy::LowestId;
  if (text == "nearest") return AllocationPolicy::Nearest;
  throw std::invalid_argument("unknown allocation policy '" + text + "' (expected lowest-id|nearest)");
}

std::string to_string(AllocationPolicy policy) {
  return policy == AllocationPolicy::Nearest ? "nearest" : "lowest-id";
}

Managers::Managers(ManagerConfig config) : config_(std::move(config)) {
  if (config_.policy == AllocationPolicy::Nearest && !config_.map) {
    throw std::invalid_argument("the nearest allocation policy needs a map");
  }
}

std::vector<Outgoing> Managers::take_outbox() {
  std::vector<Outgoing> out;
  out.swap(outbox_);
  return out;
}

// --- vehicle count ---------------------------------------------------------

RegisterReply Managers::register_vehicle(const std::string& ns, std::int64_t now_ns) {
  RegisterReply reply;
  if (roster_.contains(ns)) {
    reply.reason = "duplicate-namespace";
    reply.active_count = roster_.size();
    emit("avp/" + ns + "/register_reply", json{{"ok", false}, {"reason", reply.reason}});
    return reply;
  }
  roster_[ns] = RosterEntry{now_ns, now_ns};
  reply.ok = true;
  reply.active_count = roster_.size();
  emit("avp/" + ns + "/register_reply", json{{"ok", true}, {"active_count", reply.active_count}});
  emit("avp/coord/vehicles", vehicles_payload());
  return reply;
}

bool Managers::heartbeat(const std::string& ns, std::int64_t now_ns) {
  auto it = roster_.find(ns);
  if (it == roster_.end()) return false;
  it->second.last_heartbeat_ns = now_ns;
  return true;
}

json Managers::vehicles_payload() const {
  json roster = json::array();
  for (const auto& [ns, entry] : roster_) roster.push_back({{"ns", ns}, {"joined_at_ns", entry.joined_at_ns}});
  return json{{"count", roster_.size()}, {"roster", roster}};
}

// --- status ----------------------------------------------------------------

bool Managers::update_status(const std::string& ns, const std::string& state, std::uint64_t seq, std::int64_t now_ns,
                             json detail) {
  if (!roster_.contains(ns)) {
    spdlog::warn("managers: status from unregistered vehicle '{}' ignored", ns);
    return false;
  }
  auto it = status_.find(ns);
  if (it != status_.end() && seq <= it->second.seq) return false;
  status_[ns] = StatusRow{state, seq, now_ns, std::move(detail)};
  emit("avp/coord/status", status_payload());
  return true;
}

json Managers::status_payload() const {
  json rows = json::array();
  for (const auto& [ns, row] : status_) {
    rows.push_back({{"ns", ns}, {"state", row.state}, {"seq", row.seq}, {"updated_at_ns", row.updated_at_ns}});
  }
  return json{{"rows", rows}};
}

// --- drop-off queue --------------------------------------------------------

QueueReply Managers::enqueue_dropoff(const std::string& ns) {
  QueueReply reply;
  if (!roster_.contains(ns)) {
    reply.reason = "unregistered";
  } else if (std::find(queue_.begin(), queue_.end(), ns) != queue_.end()) {
    reply.reason = "duplicate";
  }
  if (!reply.reason.empty()) {
    emit("avp/" + ns + "/queue_reply", json{{"ok", false}, {"reason", reply.reason}});
    return reply;
  }
  queue_.push_back(ns);
  reply.ok = true;
  reply.position = queue_.size();
  emit("avp/" + ns + "/queue_reply", json{{"ok", true}, {"position", reply.position}});
  emit("avp/coord/queue", queue_payload());
  grant_head_if_new();
  return reply;
}

Reply Managers::release_dropoff(const std::string& ns) {
  if (queue_.empty() || queue_.front() != ns) {
    emit("avp/" + ns + "/release_reply", json{{"ok", false}, {"kind", "bay"}, {"reason", "not-head"}});
    return {false, "not-head"};
  }
  queue_.pop_front();
  granted_head_.reset();
  emit("avp/" + ns + "/release_reply", json{{"ok", true}, {"kind", "bay"}});
  emit("avp/coord/queue", queue_payload());
  grant_head_if_new();
  return {true, {}};
}

void Managers::grant_head_if_new() {
  if (queue_.empty() || granted_head_ == queue_.front()) return;
  granted_head_ = queue_.front();
  emit("avp/" + queue_.front() + "/bay_grant", json{{"position", 1}});
}

json Managers::queue_payload() const { return json{{"order", json(std::vector<std::string>(queue_.begin(), queue_.end()))}}; }

// --- reservation -----------------------------------------------------------

void Managers::on_occupancy(perception::OccupancyFrame frame) {
  if (latest_frame_ && frame.frame_seq <= latest_frame_->frame_seq) return;
  latest_frame_ = std::move(frame);
}

std::optional<SpotId> Managers::held_by(const std::string& ns) const {
  for (const auto& [spot, holder] : holders_) {
    if (holder == ns) return spot;
  }
  return std::nullopt;
}

SpotId Managers::choose(const std::vector<SpotId>& candidates, std::optional<world::Vec2> position) const {
  if (config_.policy == AllocationPolicy::LowestId || !position) return candidates.front();
  SpotId best = candidates.front();
  double best_d = std::numeric_limits<double>::infinity();
  for (const auto id : candidates) {
    const auto* spot = config_.map->find_spot(id);
    if (spot == nullptr) continue;
    const double d = world::distance(*position, {spot->rect.cx, spot->rect.cy});
    if (d < best_d) {  // strict: ties keep the smaller id
      best_d = d;
      best = id;
    }
  }
  return best;
}

ReservationReply Managers::request_reservation(const std::string& ns, std::optional<world::Vec2> position) {
  ReservationReply reply;
  const auto deny = [&](std::string reason) {
    reply.reason = std::move(reason);
    emit("avp/" + ns + "/reserve_reply", json{{"granted", false}, {"reason", reply.reason}});
    return reply;
  };
  if (!roster_.contains(ns)) return deny("unregistered");
  if (held_by(ns)) return deny("already-holds");
  if (!latest_frame_) return deny("no-occupancy");

  std::vector<SpotId> candidates;
  for (const auto id : latest_frame_->available) {
    if (!holders_.contains(id)) candidates.push_back(id);
  }
  if (candidates.empty()) return deny("no-spot");

  reply.granted = true;
  reply.spot = choose(candidates, position);
  reply.frame_seq = latest_frame_->frame_seq;
  holders_[reply.spot] = ns;
  emit("avp/" + ns + "/reserve_reply", json{{"granted", true}, {"spot", reply.spot}, {"frame_seq", reply.frame_seq}});
  emit("avp/coord/reserved", reserved_payload());
  return reply;
}

Reply Managers::release_reservation(const std::string& ns, SpotId spot) {
  auto it = holders_.find(spot);
  if (it == holders_.end() || it->second != ns) {
    emit("avp/" + ns + "/release_reply", json{{"ok", false}, {"kind", "spot"}, {"spot", spot}, {"reason", "not-holder"}});
    return {false, "not-holder"};
  }
  holders_.erase(it);
  emit("avp/" + ns + "/release_reply", json{{"ok", true}, {"kind", "spot"}, {"spot", spot}});
  emit("avp/coord/reserved", reserved_payload());
  return {true, {}};
}

json Managers::reserved_payload() const {
  json holders = json::array();
  for (const auto& [spot, ns] : holders_) holders.push_back({{"spot", spot}, {"ns", ns}});
  return json{{"holders", holders}};
}

// --- liveness --------------------------------------------------------------

std::vector<std::string> Managers::expire_stale(std::int64_t now_ns) {
  std::vector<std::string> evicted;
  for (const auto& [ns, entry] : roster_) {
    if (now_ns - entry.last_heartbeat_ns > config_.heartbeat_timeout_ns) evicted.push_back(ns);
  }
  if (evicted.empty()) return evicted;

  bool head_changed = false;
  for (const auto& ns : evicted) {
    spdlog::warn("managers: evicting '{}' (no heartbeat for {} ms)", ns,
                 (now_ns - roster_[ns].last_heartbeat_ns) / 1'000'000);
    roster_.erase(ns);
    status_.erase(ns);
    if (!queue_.empty() && queue_.front() == ns) {
      granted_head_.reset();
      head_changed = true;
    }
    std::erase(queue_, ns);
    std::erase_if(holders_, [&](const auto& kv) { return kv.second == ns; });
  }
  emit("avp/coord/evicted", json{{"evicted", evicted}, {"at_ns", now_ns}});
  emit("avp/coord/vehicles", vehicles_payload());
  emit("avp/coord/queue", queue_payload());
  emit("avp/coord/reserved", reserved_payload());
  emit("avp/coord/status", status_payload());
  if (head_changed) grant_head_if_new();
  return evicted;
}

void Managers::tick(std::int64_t now_ns) {
  expire_stale(now_ns);
  if (now_ns - last_republish_ns_ >= config_.republish_period_ns) {
    last_republish_ns_ = now_ns;
    emit("avp/coord/vehicles", vehicles_payload());
    emit("avp/coord/status", status_payload());
    emit("avp/coord/queue", queue_payload());
    emit("avp/coord/reserved", reserved_payload());
  }
}

// --- ManagerNode -----------------------------------------------------------

ManagerNode::ManagerNode(ManagerConfig config) : managers_(std::move(config)) {}

std::vector<std::string> ManagerNode::subscriptions() const {
  return {"avp/*/register",        "avp/*/heartbeat", "avp/*/status",     "avp/*/queue_req",
          "avp/*/reserve_request", "avp/*/release",   "avp/rsu/occupancy"};
}

void ManagerNode::on_message(const runtime::Envelope& env, runtime::Context& ctx) {
  const auto now = ctx.now_ns();
  try {
    if (env.key == "avp/rsu/occupancy") {
      managers_.on_occupancy(perception::occupancy_from_json(env.payload, env.timestamp_ns));
      return;
    }
    const auto ns = runtime::namespace_of(env.key);
    if (ns == "coord" || ns == "rsu" || ns == "sim" || ns.starts_with('_')) return;
    const auto topic = env.key.substr(env.key.rfind('/') + 1);
    if (topic == "register") {
      managers_.register_vehicle(ns, now);
    } else if (topic == "heartbeat") {
      managers_.heartbeat(ns, now);
    } else if (topic == "status") {
      managers_.update_status(ns, env.payload.at("state").get<std::string>(), env.payload.at("seq").get<std::uint64_t>(),
                              now, env.payload);
    } else if (topic == "queue_req") {
      managers_.enqueue_dropoff(ns);
    } else if (topic == "reserve_request") {
      std::optional<world::Vec2> pos;
      if (env.payload.contains("x") && env.payload.contains("y")) {
        pos = world::Vec2{env.payload.at("x").get<double>(), env.payload.at("y").get<double>()};
      }
      managers_.request_reservation(ns, pos);
    } else if (topic == "release") {
      const auto kind = env.payload.value("kind", std::string());
      if (kind == "bay") {
        managers_.release_dropoff(ns);
      } else if (kind == "spot") {
        managers_.release_reservation(ns, env.payload.at("spot").get<SpotId>());
      }
    }
  } catch (const json::exception& e) {
    spdlog::warn("managers: malformed message on '{}': {}", env.key, e.what());
  }
  flush(ctx);
}

void ManagerNode::on_tick(runtime::Context& ctx) {
  managers_.tick(ctx.now_ns());
  flush(ctx);
}

void ManagerNode::flush(runtime::Context& ctx) {
  for (auto& out : managers_.take_outbox()) ctx.publish(out.key, std::move(out.payload));
}

}  // namespace avp::coordination
