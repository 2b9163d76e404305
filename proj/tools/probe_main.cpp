#include <iostream>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "tool_common.hpp"

namespace {

void print_table(const std::string& pair, const avp::msgbus::RttStats& s, bool json) {
  if (json) {
    auto doc = avp::msgbus::to_json(s);
    doc["pair"] = pair;
    std::cout << doc.dump() << '\n';
    return;
  }
  std::cout << "pair,rtt_ms,std_ms,max_rtt_ms,samples\n"
            << fmt::format("{},{:.3f},{:.3f},{:.3f},{}\n", pair, s.mean_ms, s.std_ms, s.max_ms, s.samples);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Round-trip latency probe"};
  std::string router = "127.0.0.1:7447";
  std::string peer = "managers";
  std::string id = "probe";
  bool loopback = false;
  bool json = false;
  avp::msgbus::ProbeOptions options;
  options.count = 100;
  options.interval_ms = 10.0;
  app.add_option("--router", router, "router address");
  app.add_option("--peer", peer, "client whose echo responder is pinged");
  app.add_option("--id", id, "this probe's client id");
  app.add_option("--count", options.count, "pings to send")->check(CLI::PositiveNumber);
  app.add_option("--interval-ms", options.interval_ms, "gap between pings");
  app.add_flag("--loopback", loopback, "run router and responder in this process");
  app.add_flag("--json", json, "print the statistics as JSON");
  CLI11_PARSE(app, argc, argv);

  avp::tools::init_logging(id, "warn");
  try {
    std::unique_ptr<avp::msgbus::Router> local;
    if (loopback) {
      local = std::make_unique<avp::msgbus::Router>(avp::msgbus::RouterOptions{"127.0.0.1:0"});
      local->start();
      router = local->address();
    }
    std::unique_ptr<avp::msgbus::Session> responder_session;
    std::unique_ptr<avp::msgbus::EchoResponder> responder;
    if (loopback) {
      responder_session = avp::msgbus::Session::connect(router, peer);
      responder = std::make_unique<avp::msgbus::EchoResponder>(*responder_session, peer);
    }
    auto session = avp::msgbus::Session::connect(router, id);
    const auto stats = avp::msgbus::rtt_probe(*session, peer, options);
    print_table(id + "->" + peer, stats, json);
    session->close();
    if (responder) responder->stop();
    if (responder_session) responder_session->close();
    if (local) local->stop();
  } catch (const std::exception& e) {
    std::cerr << "probe: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
