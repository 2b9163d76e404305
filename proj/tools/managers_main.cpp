#include <CLI11.hpp>

#include "avp/coordination/managers.hpp"
#include "tool_common.hpp"

int main(int argc, char** argv) {
  CLI::App app{"AVP managers: vehicle count, status, drop-off queue and spot reservation"};
  std::string router = "127.0.0.1:7447";
  std::string map_file;
  std::string policy = "lowest-id";
  double heartbeat_timeout_s = 5.0;
  std::string log_level = "info";
  app.add_option("--router", router, "router address");
  app.add_option("--map", map_file, "lot map JSON (required for --policy nearest)");
  app.add_option("--policy", policy, "spot allocation: lowest-id | nearest");
  app.add_option("--heartbeat-timeout-s", heartbeat_timeout_s, "evict vehicles silent for this many seconds")
      ->check(CLI::PositiveNumber);
  app.add_option("--log-level", log_level);
  CLI11_PARSE(app, argc, argv);

  avp::tools::init_logging("managers", log_level);
  avp::tools::install_signal_handlers();
  try {
    avp::coordination::ManagerConfig config;
    config.policy = avp::coordination::parse_policy(policy);
    config.heartbeat_timeout_ns = static_cast<std::int64_t>(heartbeat_timeout_s * 1e9);
    if (!map_file.empty()) config.map = avp::world::load_map_file(map_file);
    avp::coordination::ManagerNode node(std::move(config));
    return avp::tools::serve_node(node, router);
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
}
