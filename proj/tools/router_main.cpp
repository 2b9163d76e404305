#include <fstream>
#include <thread>

#include <CLI11.hpp>

#include "tool_common.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Message router: forwards published envelopes to matching subscribers"};
  std::string listen = "127.0.0.1:7447";
  std::string port_file;
  std::size_t max_frame = avp::msgbus::kDefaultMaxFrameBytes;
  std::string log_level = "info";
  app.add_option("--listen", listen, "host:port to listen on (port 0 picks a free port)");
  app.add_option("--port-file", port_file, "write the bound port to this file once listening");
  app.add_option("--max-frame-bytes", max_frame, "largest accepted frame");
  app.add_option("--log-level", log_level);
  CLI11_PARSE(app, argc, argv);

  avp::tools::init_logging("router", log_level);
  avp::tools::install_signal_handlers();
  try {
    avp::msgbus::Router router({listen, max_frame});
    router.start();
    spdlog::info("listening on {}", router.address());
    if (!port_file.empty()) {
      const auto tmp = port_file + ".tmp";
      std::ofstream(tmp) << router.port() << '\n';
      std::rename(tmp.c_str(), port_file.c_str());
    }
    while (!avp::tools::stop_flag()) std::this_thread::sleep_for(std::chrono::milliseconds(100));
    router.stop();
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
  return 0;
}
