#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "avp/harness/scenario.hpp"
#include "avp/runtime/node.hpp"

namespace avp::harness {

/// Plays the scenario's command script and automatic operator policy,
/// publishing `{kind, target_ns}` on `avp/<ns>/cmd`. Script times are
/// relative to start(). Random delays come from a generator seeded by the
/// scenario seed, so runs are reproducible.
class OperatorNode : public runtime::Node {
 public:
  explicit OperatorNode(const Scenario& scenario);

  std::string name() const override { return "operator"; }
  std::vector<std::string> subscriptions() const override { return {"avp/*/status", "avp/coord/evicted"}; }
  std::chrono::milliseconds tick_period() const override { return std::chrono::milliseconds(50); }
  void start(runtime::Context& ctx) override;
  void on_message(const runtime::Envelope& env, runtime::Context& ctx) override;
  void on_tick(runtime::Context& ctx) override;

  std::int64_t started_ns() const { return started_ns_; }
  std::size_t commands_sent() const { return sent_; }

 private:
  struct Pending {
    std::int64_t at_ns;
    std::uint64_t order;
    node::CommandKind kind;
    std::string ns;
  };

  void schedule(std::int64_t at_ns, node::CommandKind kind, const std::string& ns);
  std::int64_t draw(const DelayRange& range);
  void flush_due(runtime::Context& ctx);

  std::vector<ScriptedCommand> script_;
  OperatorPolicy policy_;
  std::vector<std::string> fleet_;
  std::mt19937_64 rng_;
  std::int64_t started_ns_ = 0;
  std::uint64_t order_ = 0;
  std::vector<Pending> pending_;
  std::map<std::string, std::string> states_;
  std::set<std::string> gone_;  // evicted
  bool retrieve_all_sent_ = false;
  std::size_t sent_ = 0;
};

}  // namespace avp::harness
