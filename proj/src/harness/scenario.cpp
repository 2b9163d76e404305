#include "avp/harness/scenario.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <yaml-cpp/yaml.h>

#include "avp/node/vehicle_node.hpp"

namespace avp::harness {

namespace {

template <class T>
T get(const YAML::Node& node, const std::string& field, T fallback) {
  const auto child = node[field];
  if (!child) return fallback;
  try {
    return child.as<T>();
  } catch (const YAML::Exception&) {
    throw ScenarioError("field '" + field + "' has the wrong type");
  }
}

template <class T>
T require(const YAML::Node& node, const std::string& field, const std::string& where) {
  if (!node[field]) throw ScenarioError(where + ": missing field '" + field + "'");
  return get<T>(node, field, T{});
}

DelayRange parse_delay(const YAML::Node& node, const std::string& field) {
  const auto child = node[field];
  if (!child) return {};
  try {
    if (child.IsSequence()) {
      if (child.size() != 2) throw ScenarioError("field '" + field + "' must be a number or [lo, hi]");
      return {child[0].as<double>(), child[1].as<double>()};
    }
    const auto v = child.as<double>();
    return {v, v};
  } catch (const YAML::Exception&) {
    throw ScenarioError("field '" + field + "' must be a number or [lo, hi]");
  }
}

node::LifecycleState parse_state_field(const std::string& text, const std::string& where) {
  const auto state = node::parse_state(text);
  if (!state) throw ScenarioError(where + ": unknown lifecycle state '" + text + "'");
  return *state;
}

RetrievePolicy parse_retrieve(const std::string& text) {
  if (text == "none") return RetrievePolicy::None;
  if (text == "after_delay") return RetrievePolicy::AfterDelay;
  if (text == "when_all_parked") return RetrievePolicy::WhenAllParked;
  throw ScenarioError("operator.retrieve: expected none|after_delay|when_all_parked, got '" + text + "'");
}

std::string to_string(RetrievePolicy policy) {
  switch (policy) {
    case RetrievePolicy::None: return "none";
    case RetrievePolicy::AfterDelay: return "after_delay";
    case RetrievePolicy::WhenAllParked: return "when_all_parked";
  }
  return "none";
}

void check_delay(const DelayRange& d, const std::string& what) {
  if (!(d.lo_s >= 0.0 && d.hi_s >= d.lo_s)) throw ScenarioError(what + ": need 0 <= lo <= hi");
}

}  // namespace

std::string to_string(RunMode mode) { return mode == RunMode::Virtual ? "virtual" : "process"; }

RunMode parse_run_mode(const std::string& text) {
  if (text == "process") return RunMode::Process;
  if (text == "virtual") return RunMode::Virtual;
  throw ScenarioError("mode: expected process|virtual, got '" + text + "'");
}

Scenario parse_scenario(const std::string& text, const std::filesystem::path& base_dir) {
  YAML::Node doc;
  try {
    doc = YAML::Load(text);
  } catch (const YAML::Exception& e) {
    throw ScenarioError(std::string("scenario is not valid YAML/JSON: ") + e.what());
  }
  if (!doc.IsMap()) throw ScenarioError("scenario must be a mapping");

  Scenario s;
  s.name = get<std::string>(doc, "name", "scenario");
  const auto map = require<std::string>(doc, "map", "scenario");
  s.map_file = std::filesystem::path(map).is_absolute() ? std::filesystem::path(map) : base_dir / map;
  s.seed = get<std::uint64_t>(doc, "seed", 0);
  s.duration_s = get<double>(doc, "duration_s", 60.0);
  s.mode = parse_run_mode(get<std::string>(doc, "mode", "process"));
  try {
    s.policy = coordination::parse_policy(get<std::string>(doc, "policy", "lowest-id"));
  } catch (const std::invalid_argument& e) {
    throw ScenarioError(e.what());
  }

  if (const auto det = doc["detector"]) {
    if (const auto p = det["p_miss"]) {
      if (!p.IsMap()) throw ScenarioError("detector.p_miss must map class -> probability");
      for (const auto& kv : p) s.detector.p_miss[kv.first.as<std::string>()] = kv.second.as<double>();
    }
    s.detector.pos_noise_sigma_m = get<double>(det, "sigma_m", 0.0);
    s.detector.seed = get<std::uint64_t>(det, "seed", s.seed);
    s.theta = get<double>(det, "theta", perception::kDefaultOverlapTheta);
  } else {
    s.detector.seed = s.seed;
  }

  if (const auto vs = doc["vehicles"]) {
    if (!vs.IsSequence()) throw ScenarioError("vehicles must be a list");
    for (std::size_t i = 0; i < vs.size(); ++i) {
      const auto where = "vehicles[" + std::to_string(i) + "]";
      VehicleSpec v;
      v.ns = require<std::string>(vs[i], "ns", where);
      v.spawn_index = get<std::size_t>(vs[i], "spawn_index", i);
      v.vehicle_class = get<std::string>(vs[i], "class", "sedan");
      v.max_speed_mps = get<double>(vs[i], "max_speed_mps", 5.0);
      s.vehicles.push_back(std::move(v));
    }
  }

  if (const auto cs = doc["script"]) {
    if (!cs.IsSequence()) throw ScenarioError("script must be a list");
    for (std::size_t i = 0; i < cs.size(); ++i) {
      const auto where = "script[" + std::to_string(i) + "]";
      ScriptedCommand c;
      c.at_s = require<double>(cs[i], "at_s", where);
      const auto kind = require<std::string>(cs[i], "kind", where);
      const auto parsed = node::parse_command_kind(kind);
      if (!parsed) throw ScenarioError(where + ": unknown command kind '" + kind + "'");
      c.kind = *parsed;
      c.target_ns = require<std::string>(cs[i], "target_ns", where);
      s.script.push_back(std::move(c));
    }
  }

  if (const auto op = doc["operator"]) {
    s.operator_policy.auto_park = get<bool>(op, "auto_park", false);
    s.operator_policy.park_delay = parse_delay(op, "park_delay_s");
    s.operator_policy.retrieve = parse_retrieve(get<std::string>(op, "retrieve", "none"));
    s.operator_policy.retrieve_delay = parse_delay(op, "retrieve_delay_s");
    s.operator_policy.stagger_s = get<double>(op, "stagger_s", 0.0);
  }

  if (const auto fs = doc["faults"]) {
    if (!fs.IsSequence()) throw ScenarioError("faults must be a list");
    for (std::size_t i = 0; i < fs.size(); ++i) {
      const auto where = "faults[" + std::to_string(i) + "]";
      FaultSpec f;
      f.kill = require<std::string>(fs[i], "kill", where);
      if (fs[i]["at_s"]) f.at_s = get<double>(fs[i], "at_s", 0.0);
      if (fs[i]["when_state"]) f.when_state = parse_state_field(get<std::string>(fs[i], "when_state", ""), where);
      s.faults.push_back(std::move(f));
    }
  }

  s.end_state = parse_state_field(get<std::string>(doc, "end_when_all", "DEPARTED"), "end_when_all");
  validate(s);
  return s;
}

Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ScenarioError("cannot open scenario file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  auto s = parse_scenario(ss.str(), path.parent_path());
  if (s.name == "scenario") s.name = path.stem().string();
  return s;
}

void validate(const Scenario& s) {
  if (!(s.duration_s > 0.0)) throw ScenarioError("duration_s must be positive");
  try {
    s.detector.validate();
  } catch (const std::invalid_argument& e) {
    throw ScenarioError(std::string("detector: ") + e.what());
  }
  if (!(s.theta >= 0.0 && s.theta < 1.0)) throw ScenarioError("detector.theta must be in [0, 1)");

  std::set<std::string> names;
  std::set<std::size_t> spawns;
  for (const auto& v : s.vehicles) {
    try {
      node::validate_namespace(v.ns);
    } catch (const std::invalid_argument& e) {
      throw ScenarioError(e.what());
    }
    if (!names.insert(v.ns).second) throw ScenarioError("duplicate vehicle namespace '" + v.ns + "'");
    if (!spawns.insert(v.spawn_index).second) {
      throw ScenarioError("vehicles '" + v.ns + "' and another share spawn index " + std::to_string(v.spawn_index));
    }
    if (!(v.max_speed_mps > 0.0)) throw ScenarioError("vehicle '" + v.ns + "': max_speed_mps must be positive");
  }

  double last = 0.0;
  for (const auto& c : s.script) {
    if (c.at_s < last) throw ScenarioError("script at_s must be nondecreasing");
    last = c.at_s;
    if (!names.contains(c.target_ns)) throw ScenarioError("script targets unknown vehicle '" + c.target_ns + "'");
  }

  check_delay(s.operator_policy.park_delay, "operator.park_delay_s");
  check_delay(s.operator_policy.retrieve_delay, "operator.retrieve_delay_s");
  if (s.operator_policy.stagger_s < 0.0) throw ScenarioError("operator.stagger_s must be >= 0");

  for (const auto& f : s.faults) {
    if (!names.contains(f.kill)) throw ScenarioError("fault targets unknown vehicle '" + f.kill + "'");
    if (f.at_s.has_value() == f.when_state.has_value()) {
      throw ScenarioError("fault on '" + f.kill + "' needs exactly one of at_s and when_state");
    }
    if (f.at_s && *f.at_s < 0.0) throw ScenarioError("fault at_s must be >= 0");
  }
}

json to_json(const Scenario& s) {
  json vehicles = json::array();
  for (const auto& v : s.vehicles) {
    vehicles.push_back(
        {{"ns", v.ns}, {"spawn_index", v.spawn_index}, {"class", v.vehicle_class}, {"max_speed_mps", v.max_speed_mps}});
  }
  json script = json::array();
  for (const auto& c : s.script) {
    script.push_back({{"at_s", c.at_s}, {"kind", node::to_string(c.kind)}, {"target_ns", c.target_ns}});
  }
  json faults = json::array();
  for (const auto& f : s.faults) {
    json j{{"kill", f.kill}};
    if (f.at_s) j["at_s"] = *f.at_s;
    if (f.when_state) j["when_state"] = node::to_string(*f.when_state);
    faults.push_back(std::move(j));
  }
  const auto& op = s.operator_policy;
  return json{{"name", s.name},
              {"map", s.map_file.string()},
              {"seed", s.seed},
              {"duration_s", s.duration_s},
              {"mode", to_string(s.mode)},
              {"policy", coordination::to_string(s.policy)},
              {"detector",
               {{"p_miss", s.detector.p_miss},
                {"sigma_m", s.detector.pos_noise_sigma_m},
                {"seed", s.detector.seed},
                {"theta", s.theta}}},
              {"vehicles", vehicles},
              {"script", script},
              {"operator",
               {{"auto_park", op.auto_park},
                {"park_delay_s", {op.park_delay.lo_s, op.park_delay.hi_s}},
                {"retrieve", to_string(op.retrieve)},
                {"retrieve_delay_s", {op.retrieve_delay.lo_s, op.retrieve_delay.hi_s}},
                {"stagger_s", op.stagger_s}}},
              {"faults", faults},
              {"end_when_all", node::to_string(s.end_state)}};
}

}  // namespace avp::harness
