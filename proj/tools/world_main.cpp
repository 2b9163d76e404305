#include <CLI11.hpp>

#include "avp/world/world.hpp"
#include "tool_common.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Parking-lot world: kinematics, collisions and ground-truth poses"};
  std::string router = "127.0.0.1:7447";
  std::string map_file;
  int tick_ms = 50;
  std::uint64_t seed = 0;
  std::string log_level = "info";
  app.add_option("--router", router, "router address");
  app.add_option("--map", map_file, "lot map JSON")->required();
  app.add_option("--tick-ms", tick_ms, "simulation step")->check(CLI::Range(1, 100));
  app.add_option("--seed", seed);
  app.add_option("--log-level", log_level);
  CLI11_PARSE(app, argc, argv);

  avp::tools::init_logging("world", log_level);
  avp::tools::install_signal_handlers();
  try {
    avp::world::WorldNode node(avp::world::load_map_file(map_file), {std::chrono::milliseconds(tick_ms), seed});
    return avp::tools::serve_node(node, router);
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
}
