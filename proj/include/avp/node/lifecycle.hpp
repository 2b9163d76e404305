#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "avp/world/routing.hpp"

namespace avp::node {

using world::Goal;
using world::SpotId;

enum class LifecycleState {
  Arriving,
  QueuedDropoff,
  AtDropoffBay,
  AwaitingPark,
  SpotRequested,
  EnRouteSpot,
  Parked,
  RetrievalRequested,
  EnRoutePickup,
  AtPickup,
  Departed,
};

inline constexpr std::array kAllStates{
    LifecycleState::Arriving,      LifecycleState::QueuedDropoff,      LifecycleState::AtDropoffBay,
    LifecycleState::AwaitingPark,  LifecycleState::SpotRequested,      LifecycleState::EnRouteSpot,
    LifecycleState::Parked,        LifecycleState::RetrievalRequested, LifecycleState::EnRoutePickup,
    LifecycleState::AtPickup,      LifecycleState::Departed,
};

std::string_view to_string(LifecycleState state);
std::optional<LifecycleState> parse_state(std::string_view text);

enum class CommandKind { Dropoff, Park, Retrieve };

std::string_view to_string(CommandKind kind);
std::optional<CommandKind> parse_command_kind(std::string_view text);

inline constexpr std::int64_t kBayDwellNs = 3'000'000'000;
inline constexpr std::int64_t kDenyRetryNs = 1'000'000'000;

/// Everything `transition` reads. `en_route` distinguishes the moving half of
/// QUEUED_DROPOFF (bay granted, driving to it) from waiting in the queue.
struct NodeState {
  LifecycleState state = LifecycleState::Arriving;
  bool en_route = false;
  std::int64_t entered_at_ns = 0;
  std::optional<SpotId> spot;             // granted spot, while held
  std::optional<std::int64_t> retry_at_ns;  // pending reservation retry

  bool operator==(const NodeState&) const = default;
};

namespace ev {
struct Command {
  CommandKind kind;
  bool operator==(const Command&) const = default;
};
struct BayGrant {
  bool operator==(const BayGrant&) const = default;
};
struct Granted {
  SpotId spot;
  bool operator==(const Granted&) const = default;
};
struct Denied {
  std::string reason;
  bool operator==(const Denied&) const = default;
};
struct GoalReached {
  bool operator==(const GoalReached&) const = default;
};
struct GoalFailed {
  bool operator==(const GoalFailed&) const = default;
};
struct Tick {
  bool operator==(const Tick&) const = default;
};
}  // namespace ev

struct NodeEvent {
  std::variant<ev::Command, ev::BayGrant, ev::Granted, ev::Denied, ev::GoalReached, ev::GoalFailed, ev::Tick> kind;
  std::int64_t at_ns = 0;

  bool operator==(const NodeEvent&) const = default;
};

namespace act {
struct SendRegister {
  bool operator==(const SendRegister&) const = default;
};
struct SendStatus {
  bool failed = false;
  bool operator==(const SendStatus&) const = default;
};
struct Enqueue {
  bool operator==(const Enqueue&) const = default;
};
struct SendPath {
  Goal goal;
  bool operator==(const SendPath&) const = default;
};
struct ReleaseBay {
  bool operator==(const ReleaseBay&) const = default;
};
struct RequestReservation {
  bool operator==(const RequestReservation&) const = default;
};
struct ReleaseReservation {
  SpotId spot;
  bool operator==(const ReleaseReservation&) const = default;
};
struct Despawn {
  bool operator==(const Despawn&) const = default;
};
}  // namespace act

using Action = std::variant<act::SendRegister, act::SendStatus, act::Enqueue, act::SendPath, act::ReleaseBay,
                            act::RequestReservation, act::ReleaseReservation, act::Despawn>;

std::string describe(const Action& action);

struct TransitionResult {
  NodeState state;
  std::vector<Action> actions;

  bool operator==(const TransitionResult&) const = default;
};

/// The vehicle lifecycle. Total and pure: pairs outside the table return
/// the input state unchanged with no actions.
TransitionResult transition(const NodeState& state, const NodeEvent& event);

/// States a vehicle rests in between driving legs.
bool is_moving(const NodeState& state);

}  // namespace avp::node
