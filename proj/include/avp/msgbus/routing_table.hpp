#pragma once

#include <string>
#include <vector>

#include "avp/msgbus/key_expr.hpp"

namespace avp::msgbus {

struct Delivery {
  std::string client_id;
  std::string key;  // after the client's remap rules
};

/// Subscription and remap state shared by the TCP router and the virtual
/// kernel. Clients are kept in registration order so fan-out order is stable.
class RoutingTable {
 public:
  /// False when `client_id` is already present.
  bool add_client(const std::string& client_id);
  void remove_client(const std::string& client_id);
  bool has_client(const std::string& client_id) const;
  std::vector<std::string> clients() const;

  void add_subscription(const std::string& client_id, KeyExpr pattern);
  void add_remap(const std::string& client_id, RemapRule rule);

  /// One delivery per client holding at least one matching subscription.
  std::vector<Delivery> route(const KeyExpr& key) const;

 private:
  struct Client {
    std::string id;
    std::vector<KeyExpr> subscriptions;
    std::vector<RemapRule> remaps;
  };

  Client* find(const std::string& client_id);
  const Client* find(const std::string& client_id) const;

  std::vector<Client> clients_;
};

}  // namespace avp::msgbus
