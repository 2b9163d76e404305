#include "avp/runtime/drivers.hpp"

#include <spdlog/spdlog.h>

namespace avp::runtime {

std::string namespace_of(const std::string& key) {
  const auto first = key.find('/');
  if (first == std::string::npos) return {};
  const auto second = key.find('/', first + 1);
  return key.substr(first + 1, second == std::string::npos ? std::string::npos : second - first - 1);
}

namespace {

class SessionContext : public Context {
 public:
  explicit SessionContext(msgbus::Session& session) : session_(session) {}
  std::int64_t now_ns() const override { return msgbus::wall_clock_ns(); }
  void publish(const std::string& key, json payload) override { session_.publish(key, std::move(payload)); }

 private:
  msgbus::Session& session_;
};

}  // namespace

int run_on_session(Node& node, msgbus::Session& session, const std::atomic<bool>& stop) {
  using clock = std::chrono::steady_clock;
  auto inbox = std::make_shared<msgbus::MessageStream>();
  for (const auto& pattern : node.subscriptions()) session.subscribe(pattern, inbox);
  session.sync();

  SessionContext ctx(session);
  try {
    node.start(ctx);
    ctx.publish(ready_key(node.name()), json{{"name", node.name()}});

    const auto period = std::chrono::duration_cast<clock::duration>(node.tick_period());
    auto next_tick = clock::now() + period;
    while (!stop.load() && node.exit_code() == 0) {
      const auto deadline = std::min(next_tick, clock::now() + std::chrono::milliseconds(100));
      if (auto env = inbox->pop_until(deadline)) {
        node.on_message(*env, ctx);
        continue;
      }
      if (inbox->closed() || !session.is_open()) {
        spdlog::error("{}: router connection lost", node.name());
        return 2;
      }
      const auto now = clock::now();
      if (now >= next_tick) {
        node.on_tick(ctx);
        next_tick += period;
        if (next_tick < now) next_tick = now + period;  // fell behind; don't burst
      }
    }
  } catch (const msgbus::BusError& e) {
    spdlog::error("{}: {}", node.name(), e.what());
    return 2;
  }
  return node.exit_code();
}

// --- VirtualKernel ---------------------------------------------------------

class VirtualKernel::NodeContext : public Context {
 public:
  NodeContext(VirtualKernel& kernel, std::string name) : kernel_(kernel), name_(std::move(name)) {}
  std::int64_t now_ns() const override { return kernel_.now_ns_; }
  void publish(const std::string& key, json payload) override { kernel_.publish_as(name_, key, std::move(payload)); }

 private:
  VirtualKernel& kernel_;
  std::string name_;
};

VirtualKernel::VirtualKernel(Options options) : options_(options), now_ns_(options.start_ns) {}

void VirtualKernel::push(std::int64_t at_ns, std::function<void()> fn) {
  events_.push(Event{at_ns, order_++, std::move(fn)});
}

void VirtualKernel::schedule(std::int64_t at_ns, std::function<void()> fn) { push(std::max(at_ns, now_ns_), std::move(fn)); }

void VirtualKernel::add(std::shared_ptr<Node> node) {
  const auto name = node->name();
  if (!table_.add_client(name)) throw msgbus::BusError("duplicate client id '" + name + "'");
  for (const auto& pattern : node->subscriptions()) table_.add_subscription(name, msgbus::KeyExpr::parse(pattern));
  const auto generation = ++generation_;
  nodes_[name] = Entry{node, generation};
  NodeContext ctx(*this, name);
  node->start(ctx);
  ctx.publish(ready_key(name), json{{"name", name}});
  schedule_tick(name, generation, now_ns_ + std::chrono::duration_cast<std::chrono::nanoseconds>(node->tick_period()).count());
}

void VirtualKernel::remove(const std::string& name) {
  nodes_.erase(name);
  table_.remove_client(name);
}

void VirtualKernel::schedule_tick(const std::string& name, std::int64_t generation, std::int64_t at_ns) {
  push(at_ns, [this, name, generation] {
    auto it = nodes_.find(name);
    if (it == nodes_.end() || it->second.generation != generation) return;
    auto node = it->second.node;
    NodeContext ctx(*this, name);
    node->on_tick(ctx);
    if (node->exit_code() != 0) {
      remove(name);
      return;
    }
    schedule_tick(name, generation, now_ns_ + std::chrono::duration_cast<std::chrono::nanoseconds>(node->tick_period()).count());
  });
}

void VirtualKernel::publish_as(const std::string& sender, const std::string& key, json payload) {
  const auto parsed = msgbus::parse_literal_key(key);
  Envelope env{parsed.str(), sender, ++seq_[{sender, parsed.str()}], now_ns_, std::move(payload)};
  route(std::move(env));
}

void VirtualKernel::route(Envelope env) {
  const auto deliver_at = now_ns_ + options_.latency_ns;
  if (tap_) tap_(env, deliver_at);
  for (auto& delivery : table_.route(msgbus::parse_literal_key(env.key))) {
    auto it = nodes_.find(delivery.client_id);
    if (it == nodes_.end()) continue;
    Envelope copy = env;
    copy.key = std::move(delivery.key);
    push(deliver_at, [this, name = delivery.client_id, generation = it->second.generation, copy = std::move(copy)] {
      auto target = nodes_.find(name);
      if (target == nodes_.end() || target->second.generation != generation) return;
      auto node = target->second.node;
      NodeContext ctx(*this, name);
      node->on_message(copy, ctx);
      if (node->exit_code() != 0) remove(name);
    });
  }
}

void VirtualKernel::run_until(std::int64_t until_ns, const std::function<bool()>& done) {
  while (!events_.empty() && events_.top().at_ns <= until_ns) {
    auto ev = events_.top();
    events_.pop();
    now_ns_ = ev.at_ns;
    ev.fn();
    if (done && done()) return;
  }
  now_ns_ = std::max(now_ns_, until_ns);
}

}  // namespace avp::runtime
