#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "avp/harness/tap.hpp"
#include "avp/msgbus/rtt.hpp"
#include "avp/world/lot_map.hpp"

namespace avp::harness {

using msgbus::json;
using world::SpotId;

struct TransitionRecord {
  std::int64_t t_ns = 0;
  std::string ns;
  std::string from;  // empty for the first status of a vehicle
  std::string to;
  std::uint64_t seq = 0;
  bool failed = false;
  std::optional<SpotId> spot;

  bool operator==(const TransitionRecord&) const = default;
};

struct ReservationRecord {
  std::int64_t t_ns = 0;
  std::string event;  // "grant" | "release"
  std::string ns;
  SpotId spot = 0;

  bool operator==(const ReservationRecord&) const = default;
};

struct KillRecord {
  std::string ns;
  std::int64_t at_ns = 0;

  bool operator==(const KillRecord&) const = default;
};

struct AssertionResult {
  std::string name;
  bool passed = true;
  std::string detail;

  bool operator==(const AssertionResult&) const = default;
};

struct RunReport {
  std::string scenario;
  std::string mode;
  std::uint64_t seed = 0;
  bool completed = false;     // end condition reached before the deadline
  std::string abort_reason;   // set when the run stopped early on an error
  std::int64_t started_ns = 0;
  std::int64_t finished_ns = 0;
  std::vector<TransitionRecord> transitions;
  std::vector<ReservationRecord> reservations;
  std::uint64_t collisions = 0;
  std::map<std::string, msgbus::RttStats> rtt;  // "<vehicle>-><peer>"
  std::vector<AssertionResult> assertions;
  std::map<std::string, std::string> final_states;
  std::vector<KillRecord> kills;
  json info = json::object();  // cpu / memory samples; informational only
};

/// Derives transitions, reservations, collisions, RTT and final states from
/// a tap. Reservations are the grant/release diff of successive
/// `avp/coord/reserved` snapshots.
RunReport build_report(std::span<const TapRecord> tap);

json to_json(const RunReport& report);
RunReport report_from_json(const json& doc);

/// Transition and reservation logs with every timestamp removed, one line
/// per record; equal strings mean the runs made the same decisions.
std::string canonical_logs(const RunReport& report);

/// RTT table (pair, rtt_ms, std_ms, max_rtt_ms, samples) followed by the
/// assertion table (assertion, result, detail).
std::string report_csv(const RunReport& report);

bool all_passed(const std::vector<AssertionResult>& results);

}  // namespace avp::harness
