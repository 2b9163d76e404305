#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "avp/harness/report.hpp"
#include "avp/harness/scenario.hpp"
#include "avp/harness/tap.hpp"

namespace avp::harness {

struct RunOptions {
  /// When set, tap.ndjson, report.json and per-process logs go here.
  std::optional<std::filesystem::path> out_dir;
  std::optional<RunMode> mode_override;
  /// Also launch the panel gateway (process mode) on this port.
  std::optional<std::uint16_t> gateway_port;
  /// Directory holding the component executables; see default_bin_dir().
  std::filesystem::path bin_dir;
  std::chrono::milliseconds ready_timeout{10000};
  /// Process mode: interval of the per-vehicle RTT probe to the managers.
  std::chrono::milliseconds rtt_interval{100};
};

struct RunResult {
  RunReport report;
  std::vector<TapRecord> tap;
};

/// $AVP_BIN_DIR if set, otherwise the directory of the running executable.
std::filesystem::path default_bin_dir();

/// Launches router, world, rsu, managers, vehicles (and the gateway when
/// requested) in that order, each after the previous one announced
/// readiness; plays the script and faults; stops at the deadline or once
/// every surviving vehicle reached the scenario's end state. The report's
/// assertion list is the assert_suite over the recorded tap.
RunResult run_scenario(const Scenario& scenario, const RunOptions& options = {});

}  // namespace avp::harness
