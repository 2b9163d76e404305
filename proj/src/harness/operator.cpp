#include "avp/harness/operator.hpp"

#include <algorithm>
#include <cmath>

#include <spdlog/spdlog.h>

namespace avp::harness {

namespace {
std::int64_t seconds_to_ns(double s) { return static_cast<std::int64_t>(std::llround(s * 1e9)); }
}  // namespace

OperatorNode::OperatorNode(const Scenario& scenario)
    : script_(scenario.script), policy_(scenario.operator_policy), rng_(scenario.seed ^ 0x6f70657261746f72ULL) {
  for (const auto& v : scenario.vehicles) fleet_.push_back(v.ns);
}

void OperatorNode::start(runtime::Context& ctx) {
  started_ns_ = ctx.now_ns();
  for (const auto& c : script_) schedule(started_ns_ + seconds_to_ns(c.at_s), c.kind, c.target_ns);
  flush_due(ctx);
}

std::int64_t OperatorNode::draw(const DelayRange& range) {
  if (range.hi_s <= range.lo_s) return seconds_to_ns(range.lo_s);
  std::uniform_real_distribution<double> d(range.lo_s, range.hi_s);
  return seconds_to_ns(d(rng_));
}

void OperatorNode::schedule(std::int64_t at_ns, node::CommandKind kind, const std::string& ns) {
  pending_.push_back({at_ns, order_++, kind, ns});
}

void OperatorNode::on_message(const runtime::Envelope& env, runtime::Context& ctx) {
  const auto now = ctx.now_ns();
  if (env.key == "avp/coord/evicted") {
    for (const auto& ns : env.payload.value("evicted", runtime::json::array())) gone_.insert(ns.get<std::string>());
  } else {
    const auto ns = runtime::namespace_of(env.key);
    if (std::find(fleet_.begin(), fleet_.end(), ns) == fleet_.end()) return;
    const auto state = env.payload.value("state", std::string());
    const bool changed = states_[ns] != state;
    states_[ns] = state;
    if (!changed) return;
    if (state == "AWAITING_PARK" && policy_.auto_park) {
      schedule(now + draw(policy_.park_delay), node::CommandKind::Park, ns);
    } else if (state == "PARKED" && policy_.retrieve == RetrievePolicy::AfterDelay) {
      schedule(now + draw(policy_.retrieve_delay), node::CommandKind::Retrieve, ns);
    }
  }

  if (policy_.retrieve == RetrievePolicy::WhenAllParked && !retrieve_all_sent_) {
    std::vector<std::string> live;
    for (const auto& ns : fleet_) {
      if (!gone_.contains(ns)) live.push_back(ns);
    }
    const bool all_parked = !live.empty() && std::all_of(live.begin(), live.end(), [&](const auto& ns) {
      auto it = states_.find(ns);
      return it != states_.end() && it->second == "PARKED";
    });
    if (all_parked) {
      retrieve_all_sent_ = true;
      const auto base = now + draw(policy_.retrieve_delay);
      for (std::size_t i = 0; i < live.size(); ++i) {
        schedule(base + seconds_to_ns(policy_.stagger_s * static_cast<double>(i)), node::CommandKind::Retrieve, live[i]);
      }
    }
  }
  flush_due(ctx);
}

void OperatorNode::on_tick(runtime::Context& ctx) { flush_due(ctx); }

void OperatorNode::flush_due(runtime::Context& ctx) {
  const auto now = ctx.now_ns();
  std::vector<Pending> due;
  std::erase_if(pending_, [&](const Pending& p) {
    if (p.at_ns > now) return false;
    due.push_back(p);
    return true;
  });
  std::sort(due.begin(), due.end(), [](const Pending& a, const Pending& b) {
    return a.at_ns != b.at_ns ? a.at_ns < b.at_ns : a.order < b.order;
  });
  for (const auto& p : due) {
    if (gone_.contains(p.ns)) continue;
    spdlog::debug("operator: {} -> {}", node::to_string(p.kind), p.ns);
    ctx.publish("avp/" + p.ns + "/cmd", runtime::json{{"kind", node::to_string(p.kind)}, {"target_ns", p.ns}});
    ++sent_;
  }
}

}  // namespace avp::harness
