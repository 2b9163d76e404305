#include <doctest.h>

#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "avp/node/lifecycle.hpp"

using namespace avp::node;

namespace {

constexpr std::int64_t kEntered = 1'000;
constexpr std::int64_t kRetryAt = kEntered + 2'000'000'000;

struct NamedEvent {
  std::string name;
  NodeEvent event;
};

std::vector<NamedEvent> all_events() {
  return {
      {"DROPOFF", {ev::Command{CommandKind::Dropoff}, kEntered + 10}},
      {"PARK", {ev::Command{CommandKind::Park}, kEntered + 10}},
      {"RETRIEVE", {ev::Command{CommandKind::Retrieve}, kEntered + 10}},
      {"BayGrant", {ev::BayGrant{}, kEntered + 10}},
      {"Granted", {ev::Granted{5}, kEntered + 10}},
      {"Denied", {ev::Denied{"no-spot"}, kEntered + 10}},
      {"Reached", {ev::GoalReached{}, kEntered + 10}},
      {"Failed", {ev::GoalFailed{}, kEntered + 10}},
      {"TickEarly", {ev::Tick{}, kEntered + 1'000'000'000}},
      {"TickLate", {ev::Tick{}, kEntered + 3'000'000'000}},
  };
}

// The expected table, written out as data. Absent rows are no-ops.
// `en_route` / `retry` restrict a row to inputs with that flag; actions are
// space-separated describe() strings, `?rel` meaning ReleaseReservation of
// the held spot when there is one.
struct Row {
  const char* state;
  std::optional<bool> en_route;
  std::optional<bool> retry;
  const char* event;
  const char* next;
  bool next_en_route;
  const char* actions;
};

const std::vector<Row> kTable{
    {"ARRIVING", {}, {}, "DROPOFF", "QUEUED_DROPOFF", false, "Enqueue SendStatus"},
    {"QUEUED_DROPOFF", false, {}, "BayGrant", "QUEUED_DROPOFF", true, "SendPath(dropoff_bay) SendStatus"},
    {"QUEUED_DROPOFF", true, {}, "Reached", "AT_DROPOFF_BAY", false, "SendStatus"},
    {"QUEUED_DROPOFF", true, {}, "Failed", "ARRIVING", false, "ReleaseBay SendStatus(failed)"},
    {"AT_DROPOFF_BAY", {}, {}, "TickLate", "AWAITING_PARK", false, "ReleaseBay SendStatus"},
    {"AWAITING_PARK", {}, {}, "PARK", "SPOT_REQUESTED", false, "RequestReservation SendStatus"},
    {"SPOT_REQUESTED", {}, false, "Granted", "EN_ROUTE_SPOT", false, "SendPath(spot_5) SendStatus"},
    {"SPOT_REQUESTED", {}, false, "Denied", "SPOT_REQUESTED", false, ""},
    {"SPOT_REQUESTED", {}, true, "TickLate", "SPOT_REQUESTED", false, "RequestReservation"},
    {"EN_ROUTE_SPOT", {}, {}, "Reached", "PARKED", false, "SendStatus"},
    {"EN_ROUTE_SPOT", {}, {}, "Failed", "AWAITING_PARK", false, "?rel SendStatus(failed)"},
    {"PARKED", {}, {}, "RETRIEVE", "RETRIEVAL_REQUESTED", false, "SendStatus"},
    {"RETRIEVAL_REQUESTED", {}, {}, "TickEarly", "EN_ROUTE_PICKUP", false, "SendPath(pickup_bay) ?rel SendStatus"},
    {"RETRIEVAL_REQUESTED", {}, {}, "TickLate", "EN_ROUTE_PICKUP", false, "SendPath(pickup_bay) ?rel SendStatus"},
    {"EN_ROUTE_PICKUP", {}, {}, "Reached", "AT_PICKUP", false, "SendStatus"},
    {"EN_ROUTE_PICKUP", {}, {}, "Failed", "PARKED", false, "SendStatus(failed)"},
    {"AT_PICKUP", {}, {}, "TickLate", "DEPARTED", false, "Despawn SendStatus"},
};

std::vector<std::string> expected_actions(const Row& row, const NodeState& in) {
  std::vector<std::string> out;
  std::istringstream words(row.actions);
  std::string w;
  while (words >> w) {
    if (w == "?rel") {
      if (in.spot) out.push_back("ReleaseReservation(" + std::to_string(*in.spot) + ")");
      continue;
    }
    for (auto& c : w) {
      if (c == '_') c = ' ';
    }
    out.push_back(w);
  }
  return out;
}

const Row* find_row(const NodeState& in, const std::string& event) {
  for (const auto& row : kTable) {
    if (row.state != to_string(in.state) || row.event != event) continue;
    if (row.en_route && *row.en_route != in.en_route) continue;
    if (row.retry && *row.retry != in.retry_at_ns.has_value()) continue;
    return &row;
  }
  return nullptr;
}

std::vector<NodeState> all_inputs() {
  std::vector<NodeState> out;
  for (const auto s : kAllStates) {
    for (const bool en_route : {false, true}) {
      for (const bool spot : {false, true}) {
        for (const bool retry : {false, true}) {
          NodeState n;
          n.state = s;
          n.en_route = en_route;
          n.entered_at_ns = kEntered;
          if (spot) n.spot = 3;
          if (retry) n.retry_at_ns = kRetryAt;
          out.push_back(n);
        }
      }
    }
  }
  return out;
}

}  // namespace

TEST_SUITE("lifecycle") {
  TEST_CASE("names round-trip") {
    for (const auto s : kAllStates) CHECK(parse_state(to_string(s)) == s);
    CHECK_FALSE(parse_state("FLYING"));
    for (const auto k : {CommandKind::Dropoff, CommandKind::Park, CommandKind::Retrieve}) {
      CHECK(parse_command_kind(to_string(k)) == k);
    }
    CHECK_FALSE(parse_command_kind("dropoff"));
  }

  TEST_CASE("every state x event pair matches the expected table") {
    int rows_hit = 0;
    for (const auto& in : all_inputs()) {
      for (const auto& [name, event] : all_events()) {
        INFO(to_string(in.state), " en_route=", in.en_route, " spot=", in.spot.has_value(),
             " retry=", in.retry_at_ns.has_value(), " event=", name);
        TransitionResult got;
        REQUIRE_NOTHROW(got = transition(in, event));
        const Row* row = find_row(in, name);
        if (!row) {
          CHECK(got.state == in);
          CHECK(got.actions.empty());
          continue;
        }
        ++rows_hit;
        CHECK(to_string(got.state.state) == row->next);
        const bool stays = name == "Denied" || (row->state == std::string(row->next) && name == "TickLate");
        CHECK(got.state.en_route == (stays ? in.en_route : row->next_en_route));
        std::vector<std::string> described;
        for (const auto& a : got.actions) described.push_back(describe(a));
        CHECK(described == expected_actions(*row, in));

        if (name == "Denied") {
          CHECK(got.state.retry_at_ns == event.at_ns + kDenyRetryNs);
          CHECK(got.state.entered_at_ns == in.entered_at_ns);
        } else if (stays) {
          CHECK_FALSE(got.state.retry_at_ns);
        } else {
          CHECK(got.state.entered_at_ns == event.at_ns);
          CHECK(got.state.retry_at_ns == in.retry_at_ns);
        }
        if (name == "Granted") {
          CHECK(got.state.spot == SpotId{5});
        } else if (std::string(row->actions).find("?rel") != std::string::npos) {
          CHECK_FALSE(got.state.spot);
        } else {
          CHECK(got.state.spot == in.spot);
        }
      }
    }
    CHECK(rows_hit > 0);
  }

  TEST_CASE("transition is pure") {
    for (const auto& in : all_inputs()) {
      for (const auto& [name, event] : all_events()) {
        const NodeState copy = in;
        const auto a = transition(in, event);
        const auto b = transition(in, event);
        CHECK(a == b);
        CHECK(in == copy);
      }
    }
  }

  TEST_CASE("a full lifecycle walk") {
    NodeState s;
    std::int64_t t = 0;
    auto apply = [&](auto e, std::int64_t dt = 10) {
      t += dt;
      s = transition(s, {e, t}).state;
    };
    apply(ev::Command{CommandKind::Dropoff});
    apply(ev::BayGrant{});
    apply(ev::GoalReached{});
    CHECK(s.state == LifecycleState::AtDropoffBay);
    apply(ev::Tick{}, 2'999'999'999);
    CHECK(s.state == LifecycleState::AtDropoffBay);
    apply(ev::Tick{}, 1);
    CHECK(s.state == LifecycleState::AwaitingPark);
    apply(ev::Command{CommandKind::Park});
    apply(ev::Denied{"no-spot"});
    apply(ev::Granted{2});  // ignored while a retry is pending
    CHECK(s.state == LifecycleState::SpotRequested);
    apply(ev::Tick{}, kDenyRetryNs);
    apply(ev::Granted{2});
    CHECK(s.state == LifecycleState::EnRouteSpot);
    CHECK(is_moving(s));
    apply(ev::GoalReached{});
    apply(ev::Command{CommandKind::Retrieve});
    apply(ev::Tick{});
    CHECK(s.state == LifecycleState::EnRoutePickup);
    CHECK_FALSE(s.spot);
    apply(ev::GoalReached{});
    apply(ev::Tick{}, kBayDwellNs);
    CHECK(s.state == LifecycleState::Departed);
    CHECK_FALSE(is_moving(s));
  }
}
