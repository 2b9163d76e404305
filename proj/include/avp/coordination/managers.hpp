#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "avp/perception/occupancy.hpp"
#include "avp/runtime/node.hpp"
#include "avp/world/lot_map.hpp"

namespace avp::coordination {

using runtime::json;
using world::SpotId;

enum class AllocationPolicy { LowestId, Nearest };

AllocationPolicy parse_policy(const std::string& text);
std::string to_string(AllocationPolicy policy);

struct ManagerConfig {
  AllocationPolicy policy = AllocationPolicy::LowestId;
  std::int64_t heartbeat_timeout_ns = 5'000'000'000;
  std::int64_t republish_period_ns = 1'000'000'000;
  /// Required for the nearest policy; spot centres are looked up here.
  std::optional<world::LotMap> map;
};

struct RosterEntry {
  std::int64_t joined_at_ns = 0;
  std::int64_t last_heartbeat_ns = 0;
};

struct StatusRow {
  std::string state;
  std::uint64_t seq = 0;
  std::int64_t updated_at_ns = 0;
  json detail;  // remaining status payload fields
};

struct Outgoing {
  std::string key;
  json payload;
};

struct Reply {
  bool ok = false;
  std::string reason;
};

struct RegisterReply : Reply {
  std::size_t active_count = 0;
};

struct QueueReply : Reply {
  std::size_t position = 0;  // 1-based
};

struct ReservationReply {
  bool granted = false;
  SpotId spot = 0;
  std::uint64_t frame_seq = 0;
  std::string reason;  // set on deny
};

/// The four AVP managers (vehicle count, status, drop-off queue,
/// reservation) as one deterministic state machine. Every operation appends
/// the bus messages it produces to an outbox; all state is a function of
/// the call sequence.
class Managers {
 public:
  explicit Managers(ManagerConfig config = {});

  RegisterReply register_vehicle(const std::string& ns, std::int64_t now_ns);
  /// False for an unknown namespace.
  bool heartbeat(const std::string& ns, std::int64_t now_ns);
  /// Applied iff `ns` is registered and `seq` exceeds the stored seq.
  bool update_status(const std::string& ns, const std::string& state, std::uint64_t seq, std::int64_t now_ns,
                     json detail = json::object());

  QueueReply enqueue_dropoff(const std::string& ns);
  Reply release_dropoff(const std::string& ns);

  void on_occupancy(perception::OccupancyFrame frame);
  ReservationReply request_reservation(const std::string& ns, std::optional<world::Vec2> position = std::nullopt);
  Reply release_reservation(const std::string& ns, SpotId spot);

  std::vector<std::string> expire_stale(std::int64_t now_ns);
  /// Periodic full-state republication and eviction.
  void tick(std::int64_t now_ns);

  std::vector<Outgoing> take_outbox();

  const std::map<std::string, RosterEntry>& roster() const { return roster_; }
  const std::map<std::string, StatusRow>& status_table() const { return status_; }
  const std::deque<std::string>& queue() const { return queue_; }
  const std::map<SpotId, std::string>& holders() const { return holders_; }
  const std::optional<perception::OccupancyFrame>& latest_frame() const { return latest_frame_; }

  json vehicles_payload() const;
  json status_payload() const;
  json queue_payload() const;
  json reserved_payload() const;

 private:
  void emit(std::string key, json payload) { outbox_.push_back({std::move(key), std::move(payload)}); }
  void grant_head_if_new();
  std::optional<SpotId> held_by(const std::string& ns) const;
  SpotId choose(const std::vector<SpotId>& candidates, std::optional<world::Vec2> position) const;

  ManagerConfig config_;
  std::map<std::string, RosterEntry> roster_;
  std::map<std::string, StatusRow> status_;
  std::deque<std::string> queue_;
  std::optional<std::string> granted_head_;
  std::map<SpotId, std::string> holders_;
  std::optional<perception::OccupancyFrame> latest_frame_;
  std::int64_t last_republish_ns_ = 0;
  std::vector<Outgoing> outbox_;
};

/// Bus front-end of Managers; one event loop for all coordination topics.
class ManagerNode : public runtime::Node {
 public:
  explicit ManagerNode(ManagerConfig config = {});

  std::string name() const override { return "managers"; }
  std::vector<std::string> subscriptions() const override;
  std::chrono::milliseconds tick_period() const override { return std::chrono::milliseconds(50); }
  void on_message(const runtime::Envelope& env, runtime::Context& ctx) override;
  void on_tick(runtime::Context& ctx) override;

  const Managers& managers() const { return managers_; }

 private:
  void flush(runtime::Context& ctx);

  Managers managers_;
};

}  // namespace avp::coordination
