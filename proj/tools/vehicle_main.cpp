#include <optional>

#include <CLI11.hpp>

#include "avp/node/vehicle_node.hpp"
#include "tool_common.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Per-vehicle AVP node"};
  std::string router = "127.0.0.1:7447";
  std::string map_file;
  avp::node::VehicleOptions options;
  std::string rtt_peer;
  int rtt_interval_ms = 100;
  std::string log_level = "info";
  app.add_option("--router", router, "router address");
  app.add_option("--ns", options.ns, "vehicle namespace")->required();
  app.add_option("--map", map_file, "lot map JSON")->required();
  app.add_option("--spawn-index", options.spawn_index, "spawn point in the map");
  app.add_option("--class", options.vehicle_class, "vehicle class label");
  app.add_option("--max-speed", options.max_speed_mps, "m/s");
  app.add_option("--rtt-peer", rtt_peer, "measure round trips to this client while running");
  app.add_option("--rtt-interval-ms", rtt_interval_ms)->check(CLI::PositiveNumber);
  app.add_option("--log-level", log_level);
  CLI11_PARSE(app, argc, argv);

  avp::tools::init_logging(options.ns, log_level);
  avp::tools::install_signal_handlers();
  try {
    avp::node::VehicleNode node(avp::world::load_map_file(map_file), options);
    auto session = avp::msgbus::Session::connect(router, node.name());
    avp::msgbus::EchoResponder echo(*session, node.name());
    std::optional<avp::msgbus::RttMonitor> monitor;
    if (!rtt_peer.empty()) monitor.emplace(*session, rtt_peer, std::chrono::milliseconds(rtt_interval_ms));

    const int rc = avp::runtime::run_on_session(node, *session, avp::tools::stop_flag());
    if (monitor) {
      const auto samples = monitor->stop();
      if (!samples.empty() && session->is_open()) {
        auto stats = avp::msgbus::to_json(avp::msgbus::summarize_rtt(samples));
        stats["peer"] = rtt_peer;
        session->publish("avp/probe/rtt/" + options.ns, stats);
        session->sync();
      }
    }
    echo.stop();
    session->close();
    return rc;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
}
