#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "avp/harness/assertions.hpp"
#include "avp/harness/gateway.hpp"
#include "avp/harness/runner.hpp"
#include "tool_common.hpp"

namespace {

using namespace avp::harness;

int print_assertions(const std::vector<AssertionResult>& results) {
  for (const auto& a : results) {
    std::cout << a.name << ": " << (a.passed ? "PASS" : "FAIL");
    if (!a.detail.empty()) std::cout << " (" << a.detail << ")";
    std::cout << '\n';
  }
  return all_passed(results) ? 0 : 1;
}

int cmd_run(const std::string& scenario_file, const std::string& out_dir, const std::string& mode,
            int gateway_port) {
  const auto scenario = load_scenario(scenario_file);
  RunOptions options;
  if (!out_dir.empty()) options.out_dir = out_dir;
  if (!mode.empty()) options.mode_override = parse_run_mode(mode);
  if (gateway_port >= 0) options.gateway_port = static_cast<std::uint16_t>(gateway_port);
  const auto result = run_scenario(scenario, options);
  const auto& r = result.report;
  std::cout << "scenario " << r.scenario << " (" << r.mode << "): " << (r.completed ? "completed" : "deadline reached")
            << ", " << r.transitions.size() << " transitions, " << r.collisions << " collisions\n";
  if (!r.abort_reason.empty()) std::cout << "aborted: " << r.abort_reason << '\n';
  for (const auto& [ns, state] : r.final_states) std::cout << "  " << ns << ": " << state << '\n';
  const int rc = print_assertions(r.assertions);
  if (!out_dir.empty()) std::cout << "report: " << out_dir << "/report.json\n";
  return r.abort_reason.empty() ? rc : 2;
}

int cmd_assert(const std::string& tap_file, const std::string& map_file) {
  const auto tap = read_tap(tap_file);
  std::optional<avp::world::LotMap> map;
  if (!map_file.empty()) map = avp::world::load_map_file(map_file);
  return print_assertions(assert_suite(tap, map ? &*map : nullptr));
}

int cmd_report(const std::string& in_dir, const std::string& format) {
  std::ifstream in(std::filesystem::path(in_dir) / "report.json");
  if (!in) throw std::runtime_error("no report.json in " + in_dir);
  const auto report = report_from_json(avp::msgbus::json::parse(in));
  if (format == "csv") {
    std::cout << report_csv(report);
  } else {
    std::cout << to_json(report).dump(2) << '\n';
  }
  return 0;
}

int cmd_gateway(const std::string& router, int port) {
  avp::tools::install_signal_handlers();
  GatewayOptions options;
  options.port = static_cast<std::uint16_t>(port);
  Gateway gateway(router, options);
  gateway.start();
  std::thread watcher([&] {
    while (!avp::tools::stop_flag()) std::this_thread::sleep_for(std::chrono::milliseconds(100));
    gateway.stop();
  });
  const int rc = gateway.wait();
  avp::tools::stop_flag() = true;
  watcher.join();
  return rc;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"AVP scenario harness"};
  app.require_subcommand(1);
  std::string log_level = "warn";
  app.add_option("--log-level", log_level);

  auto* run = app.add_subcommand("run", "run a scenario and write tap + report");
  std::string scenario_file, out_dir = "out", mode;
  int gateway_port = -1;
  run->add_option("--scenario", scenario_file, "scenario YAML/JSON")->required();
  run->add_option("--out", out_dir, "output directory");
  run->add_option("--mode", mode, "override the scenario mode: process | virtual");
  run->add_option("--gateway-port", gateway_port, "also start the panel gateway on this port");

  auto* check = app.add_subcommand("assert", "evaluate the assertion suite on a tap file");
  std::string tap_file, map_file;
  check->add_option("--tap", tap_file, "NDJSON tap")->required();
  check->add_option("--map", map_file, "lot map, to check occupancy frames against its spot set");

  auto* report = app.add_subcommand("report", "print a run report");
  std::string in_dir, format = "json";
  report->add_option("--in", in_dir, "run output directory")->required();
  report->add_option("--format", format, "json | csv")->check(CLI::IsMember({"json", "csv"}));

  auto* gateway = app.add_subcommand("gateway", "websocket bridge for the operator panel");
  std::string router = "127.0.0.1:7447";
  int port = 8765;
  gateway->add_option("--router", router, "router address");
  gateway->add_option("--port", port, "websocket port (0 = any)")->check(CLI::Range(0, 65535));

  CLI11_PARSE(app, argc, argv);
  avp::tools::init_logging("avp", log_level);
  try {
    if (*run) return cmd_run(scenario_file, out_dir, mode, gateway_port);
    if (*check) return cmd_assert(tap_file, map_file);
    if (*report) return cmd_report(in_dir, format);
    if (*gateway) {
      avp::tools::init_logging("gateway", "info");
      return cmd_gateway(router, port);
    }
  } catch (const std::exception& e) {
    std::cerr << "avp: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
