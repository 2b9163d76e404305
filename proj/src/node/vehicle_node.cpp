#include "avp/node/vehicle_node.hpp"

#include <array>
#include <stdexcept>

#include <spdlog/spdlog.h>

#include "avp/msgbus/key_expr.hpp"

namespace avp::node {

using runtime::json;

void validate_namespace(const std::string& ns) {
  static constexpr std::array<std::string_view, 4> kReserved{"coord", "rsu", "sim", "probe"};
  if (ns.empty() || ns.find('/') != std::string::npos || ns.find('*') != std::string::npos || ns.starts_with('_')) {
    throw std::invalid_argument("invalid vehicle namespace '" + ns + "'");
  }
  for (const auto reserved : kReserved) {
    if (ns == reserved) throw std::invalid_argument("vehicle namespace '" + ns + "' is reserved");
  }
  try {
    msgbus::parse_literal_key("avp/" + ns);
  } catch (const msgbus::KeyExprError& e) {
    throw std::invalid_argument("invalid vehicle namespace '" + ns + "': " + e.what());
  }
}

VehicleNode::VehicleNode(world::LotMap map, VehicleOptions options) : map_(std::move(map)), options_(std::move(options)) {
  validate_namespace(options_.ns);
  if (options_.spawn_index >= map_.spawn_points.size()) {
    throw std::invalid_argument("spawn index " + std::to_string(options_.spawn_index) + " out of range (map has " +
                                std::to_string(map_.spawn_points.size()) + ")");
  }
  if (options_.tick.count() <= 0) throw std::invalid_argument("vehicle tick must be positive");
  pose_ = map_.spawn_points[options_.spawn_index];
}

std::vector<std::string> VehicleNode::subscriptions() const {
  return {key("cmd"), key("bay_grant"), key("reserve_reply"), key("goal_status"), key("register_reply"), "avp/sim/poses"};
}

void VehicleNode::start(runtime::Context& ctx) {
  ctx.publish(key("spawn"), json{{"spawn_index", options_.spawn_index},
                                 {"class", options_.vehicle_class},
                                 {"length", options_.length_m},
                                 {"width", options_.width_m},
                                 {"max_speed", options_.max_speed_mps}});
  execute(act::SendRegister{}, ctx);
  last_heartbeat_ns_ = ctx.now_ns();
  state_.entered_at_ns = ctx.now_ns();
  send_status(ctx, false, "spawned");
}

void VehicleNode::on_message(const runtime::Envelope& env, runtime::Context& ctx) {
  const auto now = ctx.now_ns();
  const auto topic = env.key.substr(env.key.rfind('/') + 1);
  try {
    if (env.key == "avp/sim/poses") {
      for (const auto& v : env.payload) {
        if (v.value("ns", std::string()) == options_.ns) {
          pose_ = {v.at("x").get<double>(), v.at("y").get<double>(), v.at("yaw").get<double>()};
          break;
        }
      }
    } else if (topic == "cmd") {
      const auto kind = parse_command_kind(env.payload.value("kind", std::string()));
      if (!kind) {
        spdlog::warn("{}: ignoring unknown command {}", options_.ns, env.payload.dump());
        return;
      }
      apply({ev::Command{*kind}, now}, ctx);
    } else if (topic == "bay_grant") {
      apply({ev::BayGrant{}, now}, ctx);
    } else if (topic == "reserve_reply") {
      if (env.payload.value("granted", false)) {
        apply({ev::Granted{env.payload.at("spot").get<SpotId>()}, now}, ctx);
      } else {
        apply({ev::Denied{env.payload.value("reason", std::string())}, now}, ctx);
      }
    } else if (topic == "goal_status") {
      if (env.payload.value("status", std::string()) == "reached") {
        apply({ev::GoalReached{}, now}, ctx);
      } else {
        last_failure_ = "world rejected path";
        apply({ev::GoalFailed{}, now}, ctx);
      }
    } else if (topic == "register_reply") {
      if (!env.payload.value("ok", false)) {
        spdlog::error("{}: registration rejected: {}", options_.ns, env.payload.value("reason", std::string("?")));
        exit_code_ = 3;
      }
    }
  } catch (const runtime::json::exception& e) {
    spdlog::warn("{}: malformed message on '{}': {}", options_.ns, env.key, e.what());
  }
}

void VehicleNode::on_tick(runtime::Context& ctx) {
  const auto now = ctx.now_ns();
  if (now - last_heartbeat_ns_ >= std::chrono::duration_cast<std::chrono::nanoseconds>(options_.heartbeat).count()) {
    ctx.publish(key("heartbeat"), json::object());
    last_heartbeat_ns_ = now;
  }
  apply({ev::Tick{}, now}, ctx);
}

void VehicleNode::apply(const NodeEvent& event, runtime::Context& ctx) {
  auto result = transition(state_, event);
  state_ = result.state;
  bool path_failed = false;
  for (const auto& action : result.actions) {
    if (!execute(action, ctx)) path_failed = true;
  }
  if (path_failed) apply({ev::GoalFailed{}, event.at_ns}, ctx);
}

bool VehicleNode::execute(const Action& action, runtime::Context& ctx) {
  if (std::holds_alternative<act::SendRegister>(action)) {
    ctx.publish(key("register"), json{{"class", options_.vehicle_class}});
  } else if (const auto* status = std::get_if<act::SendStatus>(&action)) {
    send_status(ctx, status->failed, status->failed ? last_failure_ : std::string());
  } else if (std::holds_alternative<act::Enqueue>(action)) {
    ctx.publish(key("queue_req"), json::object());
  } else if (const auto* path = std::get_if<act::SendPath>(&action)) {
    try {
      const auto route = world::plan_route(map_, pose_, path->goal);
      json poses = json::array();
      for (const auto& p : route.poses) poses.push_back({{"x", p.x}, {"y", p.y}, {"yaw", p.yaw}});
      ctx.publish(key("path"), std::move(poses));
    } catch (const std::exception& e) {
      spdlog::warn("{}: no route to {}: {}", options_.ns, world::to_string(path->goal), e.what());
      last_failure_ = std::string("no route: ") + e.what();
      return false;
    }
  } else if (std::holds_alternative<act::ReleaseBay>(action)) {
    ctx.publish(key("release"), json{{"kind", "bay"}});
  } else if (std::holds_alternative<act::RequestReservation>(action)) {
    ctx.publish(key("reserve_request"), json{{"x", pose_.x}, {"y", pose_.y}});
  } else if (const auto* release = std::get_if<act::ReleaseReservation>(&action)) {
    ctx.publish(key("release"), json{{"kind", "spot"}, {"spot", release->spot}});
  } else if (std::holds_alternative<act::Despawn>(action)) {
    ctx.publish(key("despawn"), json::object());
  }
  return true;
}

void VehicleNode::send_status(runtime::Context& ctx, bool failed, const std::string& detail) {
  json payload{{"ns", options_.ns},
               {"state", to_string(state_.state)},
               {"seq", ++status_seq_},
               {"failed", failed},
               {"en_route", state_.en_route},
               {"detail", detail}};
  payload["spot"] = state_.spot ? json(*state_.spot) : json(nullptr);
  ctx.publish(key("status"), std::move(payload));
}

}  // namespace avp::node
