#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "avp/coordination/managers.hpp"
#include "avp/node/lifecycle.hpp"
#include "avp/perception/occupancy.hpp"

namespace avp::harness {

using runtime::json;

class ScenarioError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class RunMode { Process, Virtual };
enum class RetrievePolicy { None, AfterDelay, WhenAllParked };

std::string to_string(RunMode mode);
RunMode parse_run_mode(const std::string& text);

struct VehicleSpec {
  std::string ns;
  std::size_t spawn_index = 0;
  std::string vehicle_class = "sedan";
  double max_speed_mps = 5.0;
};

struct ScriptedCommand {
  double at_s = 0.0;
  node::CommandKind kind = node::CommandKind::Dropoff;
  std::string target_ns;
};

/// Uniform delay in [lo_s, hi_s].
struct DelayRange {
  double lo_s = 0.0;
  double hi_s = 0.0;
};

/// Automatic operator: reacts to status updates the way a person at the
/// panel would, so scenarios need not hard-code timings.
struct OperatorPolicy {
  bool auto_park = false;
  DelayRange park_delay;
  RetrievePolicy retrieve = RetrievePolicy::None;
  DelayRange retrieve_delay;
  /// Gap between successive RETRIEVE commands under WhenAllParked.
  double stagger_s = 0.0;
};

/// Kills one vehicle either at a script time or when it enters a state.
struct FaultSpec {
  std::string kill;
  std::optional<double> at_s;
  std::optional<node::LifecycleState> when_state;
};

struct Scenario {
  std::string name;
  std::filesystem::path map_file;
  std::uint64_t seed = 0;
  double duration_s = 60.0;
  RunMode mode = RunMode::Process;
  perception::DetectorModel detector;
  double theta = perception::kDefaultOverlapTheta;
  coordination::AllocationPolicy policy = coordination::AllocationPolicy::LowestId;
  std::vector<VehicleSpec> vehicles;
  std::vector<ScriptedCommand> script;
  OperatorPolicy operator_policy;
  std::vector<FaultSpec> faults;
  /// The run ends early once every surviving vehicle is in this state.
  node::LifecycleState end_state = node::LifecycleState::Departed;
};

/// YAML or JSON text (JSON is read as YAML). Relative map paths resolve
/// against `base_dir`. Throws ScenarioError with the offending field.
Scenario parse_scenario(const std::string& text, const std::filesystem::path& base_dir = {});
Scenario load_scenario(const std::filesystem::path& path);

/// Namespaces unique and well-formed, at_s nondecreasing, script and fault
/// targets known, durations positive, detector parameters in range.
void validate(const Scenario& scenario);

json to_json(const Scenario& scenario);

}  // namespace avp::harness
