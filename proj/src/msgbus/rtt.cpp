#include "avp/msgbus/rtt.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include <spdlog/spdlog.h>

namespace avp::msgbus {

json to_json(const RttStats& stats) {
  return json{{"mean_ms", stats.mean_ms}, {"std_ms", stats.std_ms}, {"max_ms", stats.max_ms}, {"samples", stats.samples}};
}

RttStats rtt_stats_from_json(const json& doc) {
  return RttStats{doc.at("mean_ms").get<double>(), doc.at("std_ms").get<double>(), doc.at("max_ms").get<double>(),
                  doc.at("samples").get<std::size_t>()};
}

RttStats summarize_rtt(std::span<const double> samples_ms) {
  if (samples_ms.empty()) throw BusError("rtt probe failed: no pongs received");
  RttStats stats;
  stats.samples = samples_ms.size();
  stats.mean_ms = std::accumulate(samples_ms.begin(), samples_ms.end(), 0.0) / static_cast<double>(samples_ms.size());
  stats.max_ms = *std::max_element(samples_ms.begin(), samples_ms.end());
  if (samples_ms.size() > 1) {
    double ss = 0.0;
    for (double s : samples_ms) ss += (s - stats.mean_ms) * (s - stats.mean_ms);
    stats.std_ms = std::sqrt(ss / static_cast<double>(samples_ms.size() - 1));
  }
  return stats;
}

std::string ping_key(const std::string& peer_id) { return "avp/probe/ping/" + peer_id; }
std::string pong_key(const std::string& requester_id) { return "avp/probe/pong/" + requester_id; }

RttStats rtt_probe(Session& session, const std::string& peer_id, const ProbeOptions& options) {
  if (options.count == 0) throw BusError("rtt probe count must be positive");
  using clock = std::chrono::steady_clock;
  auto pongs = session.subscribe(pong_key(session.client_id()));
  session.sync();

  std::map<std::uint64_t, clock::time_point> sent;
  std::vector<double> samples;
  samples.reserve(options.count);
  const auto interval = std::chrono::duration_cast<clock::duration>(std::chrono::duration<double, std::milli>(options.interval_ms));

  const auto collect_until = [&](clock::time_point deadline) {
    while (auto env = pongs->pop_until(deadline)) {
      const auto received = clock::now();
      const auto n = env->payload.value("n", std::uint64_t{0});
      auto it = sent.find(n);
      if (it == sent.end()) continue;  // duplicate or foreign pong
      samples.push_back(std::chrono::duration<double, std::milli>(received - it->second).count());
      sent.erase(it);
      if (samples.size() == options.count) return;
    }
  };

  auto next_send = clock::now();
  for (std::uint64_t n = 1; n <= options.count; ++n) {
    collect_until(next_send);
    sent[n] = clock::now();
    session.publish(ping_key(peer_id), json{{"n", n}, {"requester", session.client_id()}});
    next_send += interval;
  }
  const auto drain_deadline = clock::now() + std::max<clock::duration>(options.drain_timeout, interval);
  while (!sent.empty() && clock::now() < drain_deadline && !pongs->closed()) collect_until(drain_deadline);

  if (!sent.empty()) spdlog::debug("rtt probe to '{}': {} pong(s) lost", peer_id, sent.size());
  return summarize_rtt(samples);
}

RttMonitor::RttMonitor(Session& session, std::string peer_id, std::chrono::milliseconds interval)
    : session_(session), peer_id_(std::move(peer_id)), interval_(interval) {
  if (interval_.count() <= 0) throw BusError("rtt monitor interval must be positive");
  pongs_ = session_.subscribe(pong_key(session_.client_id()));
  session_.sync();
  thread_ = std::thread([this] { run(); });
}

RttMonitor::~RttMonitor() { stop(std::chrono::milliseconds(0)); }

std::vector<double> RttMonitor::stop(std::chrono::milliseconds drain) {
  if (thread_.joinable()) {
    drain_ = drain;
    running_ = false;
    thread_.join();
  }
  return samples_;
}

void RttMonitor::run() {
  using clock = std::chrono::steady_clock;
  std::map<std::uint64_t, clock::time_point> sent;
  const auto collect_until = [&](clock::time_point deadline) {
    while (auto env = pongs_->pop_until(deadline)) {
      const auto received = clock::now();
      auto it = sent.find(env->payload.value("n", std::uint64_t{0}));
      if (it == sent.end()) continue;
      samples_.push_back(std::chrono::duration<double, std::milli>(received - it->second).count());
      sent.erase(it);
    }
  };
  std::uint64_t n = 0;
  auto next_send = clock::now();
  while (running_ && !pongs_->closed()) {
    collect_until(next_send);
    if (!running_) break;
    sent[++n] = clock::now();
    try {
      session_.publish(ping_key(peer_id_), json{{"n", n}, {"requester", session_.client_id()}});
    } catch (const BusError& e) {
      spdlog::warn("rtt monitor to '{}': {}", peer_id_, e.what());
      return;
    }
    next_send += interval_;
  }
  const auto deadline = clock::now() + drain_;
  while (!sent.empty() && clock::now() < deadline && !pongs_->closed()) collect_until(deadline);
}

EchoResponder::EchoResponder(Session& session, std::string responder_id, std::chrono::microseconds delay)
    : session_(session), responder_id_(std::move(responder_id)), delay_(delay) {
  pings_ = session_.subscribe(ping_key(responder_id_));
  session_.sync();
  thread_ = std::thread([this] { run(); });
}

EchoResponder::~EchoResponder() { stop(); }

void EchoResponder::stop() {
  running_ = false;
  if (thread_.joinable()) thread_.join();
}

void EchoResponder::run() {
  while (running_) {
    auto env = pings_->pop_for(std::chrono::milliseconds(50));
    if (!env) {
      if (pings_->closed()) return;
      continue;
    }
    const auto requester = env->payload.value("requester", env->sender_id);
    if (delay_.count() > 0) std::this_thread::sleep_for(delay_);
    try {
      session_.publish(pong_key(requester), json{{"n", env->payload.value("n", std::uint64_t{0})}, {"responder", responder_id_}});
      ++answered_;
    } catch (const BusError& e) {
      spdlog::warn("echo responder '{}': {}", responder_id_, e.what());
      return;
    }
  }
}

}  // namespace avp::msgbus
