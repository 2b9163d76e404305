#pragma once

#include <csignal>
#include <atomic>
#include <memory>
#include <string>

#include <spdlog/spdlog.h>

#include "avp/msgbus/rtt.hpp"
#include "avp/msgbus/transport.hpp"
#include "avp/runtime/drivers.hpp"

namespace avp::tools {

inline std::atomic<bool>& stop_flag() {
  static std::atomic<bool> flag{false};
  return flag;
}

/// SIGINT / SIGTERM request an orderly shutdown through stop_flag().
inline void install_signal_handlers() {
  std::signal(SIGINT, [](int) { stop_flag() = true; });
  std::signal(SIGTERM, [](int) { stop_flag() = true; });
  std::signal(SIGPIPE, SIG_IGN);
}

inline void init_logging(const std::string& name, const std::string& level = "info") {
  spdlog::set_pattern("[%H:%M:%S.%e] [" + name + "] [%l] %v");
  spdlog::set_level(spdlog::level::from_str(level));
}

/// Connects as `node.name()`, answers RTT pings under the same id and runs
/// the node until a signal arrives or the router goes away.
inline int serve_node(runtime::Node& node, const std::string& router) {
  auto session = msgbus::Session::connect(router, node.name());
  msgbus::EchoResponder echo(*session, node.name());
  const int rc = runtime::run_on_session(node, *session, stop_flag());
  echo.stop();
  session->close();
  return rc;
}

}  // namespace avp::tools
