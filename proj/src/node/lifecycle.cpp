#include "avp/node/lifecycle.hpp"

#include <fmt/format.h>

namespace avp::node {

namespace {

constexpr std::array<std::string_view, kAllStates.size()> kStateNames{
    "ARRIVING",     "QUEUED_DROPOFF", "AT_DROPOFF_BAY",      "AWAITING_PARK",   "SPOT_REQUESTED", "EN_ROUTE_SPOT",
    "PARKED",       "RETRIEVAL_REQUESTED", "EN_ROUTE_PICKUP", "AT_PICKUP", "DEPARTED",
};

template <class... Fs>
struct Overloaded : Fs... {
  using Fs::operator()...;
};

}  // namespace

std::string_view to_string(LifecycleState state) { return kStateNames[static_cast<std::size_t>(state)]; }

std::optional<LifecycleState> parse_state(std::string_view text) {
  for (std::size_t i = 0; i < kStateNames.size(); ++i) {
    if (kStateNames[i] == text) return kAllStates[i];
  }
  return std::nullopt;
}

std::string_view to_string(CommandKind kind) {
  switch (kind) {
    case CommandKind::Dropoff: return "DROPOFF";
    case CommandKind::Park: return "PARK";
    case CommandKind::Retrieve: return "RETRIEVE";
  }
  return "?";
}

std::optional<CommandKind> parse_command_kind(std::string_view text) {
  if (text == "DROPOFF") return CommandKind::Dropoff;
  if (text == "PARK") return CommandKind::Park;
  if (text == "RETRIEVE") return CommandKind::Retrieve;
  return std::nullopt;
}

std::string describe(const Action& action) {
  return std::visit(Overloaded{
                        [](const act::SendRegister&) { return std::string("SendRegister"); },
                        [](const act::SendStatus& a) { return std::string(a.failed ? "SendStatus(failed)" : "SendStatus"); },
                        [](const act::Enqueue&) { return std::string("Enqueue"); },
                        [](const act::SendPath& a) { return fmt::format("SendPath({})", world::to_string(a.goal)); },
                        [](const act::ReleaseBay&) { return std::string("ReleaseBay"); },
                        [](const act::RequestReservation&) { return std::string("RequestReservation"); },
                        [](const act::ReleaseReservation& a) { return fmt::format("ReleaseReservation({})", a.spot); },
                        [](const act::Despawn&) { return std::string("Despawn"); },
                    },
                    action);
}

bool is_moving(const NodeState& state) {
  return (state.state == LifecycleState::QueuedDropoff && state.en_route) || state.state == LifecycleState::EnRouteSpot ||
         state.state == LifecycleState::EnRoutePickup;
}

TransitionResult transition(const NodeState& state, const NodeEvent& event) {
  using S = LifecycleState;
  TransitionResult out{state, {}};
  const auto enter = [&](S next) {
    out.state.state = next;
    out.state.en_route = false;
    out.state.entered_at_ns = event.at_ns;
  };
  const auto dwelled = [&] { return event.at_ns - state.entered_at_ns >= kBayDwellNs; };

  const auto* command = std::get_if<ev::Command>(&event.kind);
  const bool tick = std::holds_alternative<ev::Tick>(event.kind);
  const bool reached = std::holds_alternative<ev::GoalReached>(event.kind);
  const bool failed = std::holds_alternative<ev::GoalFailed>(event.kind);

  switch (state.state) {
    case S::Arriving:
      if (command && command->kind == CommandKind::Dropoff) {
        enter(S::QueuedDropoff);
        out.actions = {act::Enqueue{}, act::SendStatus{}};
      }
      break;

    case S::QueuedDropoff:
      if (!state.en_route && std::holds_alternative<ev::BayGrant>(event.kind)) {
        enter(S::QueuedDropoff);
        out.state.en_route = true;
        out.actions = {act::SendPath{Goal::dropoff()}, act::SendStatus{}};
      } else if (state.en_route && reached) {
        enter(S::AtDropoffBay);
        out.actions = {act::SendStatus{}};
      } else if (state.en_route && failed) {
        // Give the bay back so the queue keeps moving; DROPOFF re-queues.
        enter(S::Arriving);
        out.actions = {act::ReleaseBay{}, act::SendStatus{true}};
      }
      break;

    case S::AtDropoffBay:
      if (tick && dwelled()) {
        enter(S::AwaitingPark);
        out.actions = {act::ReleaseBay{}, act::SendStatus{}};
      }
      break;

    case S::AwaitingPark:
      if (command && command->kind == CommandKind::Park) {
        enter(S::SpotRequested);
        out.actions = {act::RequestReservation{}, act::SendStatus{}};
      }
      break;

    case S::SpotRequested:
      if (const auto* granted = std::get_if<ev::Granted>(&event.kind); granted && !state.retry_at_ns) {
        enter(S::EnRouteSpot);
        out.state.spot = granted->spot;
        out.actions = {act::SendPath{Goal::to_spot(granted->spot)}, act::SendStatus{}};
      } else if (std::holds_alternative<ev::Denied>(event.kind) && !state.retry_at_ns) {
        out.state.retry_at_ns = event.at_ns + kDenyRetryNs;
      } else if (tick && state.retry_at_ns && event.at_ns >= *state.retry_at_ns) {
        out.state.retry_at_ns.reset();
        out.actions = {act::RequestReservation{}};
      }
      break;

    case S::EnRouteSpot:
      if (reached) {
        enter(S::Parked);
        out.actions = {act::SendStatus{}};
      } else if (failed) {
        // Return the spot too, otherwise a re-issued PARK could never be granted.
        enter(S::AwaitingPark);
        out.state.spot.reset();
        if (state.spot) out.actions.push_back(act::ReleaseReservation{*state.spot});
        out.actions.push_back(act::SendStatus{true});
      }
      break;

    case S::Parked:
      if (command && command->kind == CommandKind::Retrieve) {
        enter(S::RetrievalRequested);
        out.actions = {act::SendStatus{}};
      }
      break;

    case S::RetrievalRequested:
      if (tick) {
        enter(S::EnRoutePickup);
        out.state.spot.reset();
        out.actions.push_back(act::SendPath{Goal::pickup()});
        if (state.spot) out.actions.push_back(act::ReleaseReservation{*state.spot});
        out.actions.push_back(act::SendStatus{});
      }
      break;

    case S::EnRoutePickup:
      if (reached) {
        enter(S::AtPickup);
        out.actions = {act::SendStatus{}};
      } else if (failed) {
        enter(S::Parked);
        out.actions = {act::SendStatus{true}};
      }
      break;

    case S::AtPickup:
      if (tick && dwelled()) {
        enter(S::Departed);
        out.actions = {act::Despawn{}, act::SendStatus{}};
      }
      break;

    case S::Departed:
      break;
  }
  return out;
}

}  // namespace avp::node
