#include <CLI11.hpp>

#include "avp/perception/occupancy.hpp"
#include "tool_common.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Roadside unit: spot occupancy from overhead detections"};
  std::string router = "127.0.0.1:7447";
  std::string map_file;
  std::string p_miss;
  avp::perception::DetectorModel model;
  avp::perception::RsuOptions options;
  std::string log_level = "info";
  app.add_option("--router", router, "router address");
  app.add_option("--map", map_file, "lot map JSON")->required();
  app.add_option("--p-miss", p_miss, "per-class miss probability, e.g. sedan=0.1,van=0.3");
  app.add_option("--sigma", model.pos_noise_sigma_m, "detection centre noise (m)");
  app.add_option("--seed", model.seed);
  app.add_option("--theta", options.theta, "overlap ratio above which a spot is occupied");
  app.add_option("--rate-hz", options.rate_hz);
  app.add_option("--log-level", log_level);
  CLI11_PARSE(app, argc, argv);

  avp::tools::init_logging("rsu", log_level);
  avp::tools::install_signal_handlers();
  try {
    model.p_miss = avp::perception::parse_p_miss(p_miss);
    avp::perception::RsuNode node(avp::world::load_map_file(map_file), model, options);
    return avp::tools::serve_node(node, router);
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
}
