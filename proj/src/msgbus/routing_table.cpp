#include "avp/msgbus/routing_table.hpp"

#include <algorithm>

#include "avp/msgbus/envelope.hpp"

namespace avp::msgbus {

bool RoutingTable::add_client(const std::string& client_id) {
  if (find(client_id) != nullptr) return false;
  clients_.push_back(Client{client_id, {}, {}});
  return true;
}

void RoutingTable::remove_client(const std::string& client_id) {
  std::erase_if(clients_, [&](const Client& c) { return c.id == client_id; });
}

bool RoutingTable::has_client(const std::string& client_id) const { return find(client_id) != nullptr; }

std::vector<std::string> RoutingTable::clients() const {
  std::vector<std::string> out;
  for (const auto& c : clients_) out.push_back(c.id);
  return out;
}

void RoutingTable::add_subscription(const std::string& client_id, KeyExpr pattern) {
  auto* client = find(client_id);
  if (client == nullptr) throw BusError("unknown client '" + client_id + "'");
  client->subscriptions.push_back(std::move(pattern));
}

void RoutingTable::add_remap(const std::string& client_id, RemapRule rule) {
  auto* client = find(client_id);
  if (client == nullptr) throw BusError("unknown client '" + client_id + "'");
  client->remaps.push_back(std::move(rule));
}

std::vector<Delivery> RoutingTable::route(const KeyExpr& key) const {
  std::vector<Delivery> out;
  for (const auto& client : clients_) {
    std::string effective = key.str();
    for (const auto& rule : client.remaps) {
      if (auto mapped = rule.apply(key)) {
        effective = std::move(*mapped);
        break;
      }
    }
    const auto effective_key = effective == key.str() ? key : parse_literal_key(effective);
    const bool matched = std::any_of(client.subscriptions.begin(), client.subscriptions.end(),
                                     [&](const KeyExpr& p) { return key_matches(p, effective_key); });
    if (matched) out.push_back({client.id, std::move(effective)});
  }
  return out;
}

RoutingTable::Client* RoutingTable::find(const std::string& client_id) {
  auto it = std::find_if(clients_.begin(), clients_.end(), [&](const Client& c) { return c.id == client_id; });
  return it == clients_.end() ? nullptr : &*it;
}

const RoutingTable::Client* RoutingTable::find(const std::string& client_id) const {
  auto it = std::find_if(clients_.begin(), clients_.end(), [&](const Client& c) { return c.id == client_id; });
  return it == clients_.end() ? nullptr : &*it;
}

}  // namespace avp::msgbus
