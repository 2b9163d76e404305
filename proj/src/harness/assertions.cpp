#include "avp/harness/assertions.hpp"

#include <algorithm>
#include <deque>
#include <limits>
#include <map>
#include <optional>
#include <set>

#include <fmt/format.h>

#include "avp/runtime/node.hpp"

namespace avp::harness {

namespace {

constexpr std::int64_t kOpen = std::numeric_limits<std::int64_t>::max();

std::string topic_of(const std::string& key) { return key.substr(key.rfind('/') + 1); }

bool is_vehicle_key(const std::string& key, const std::string& topic) {
  if (!key.starts_with("avp/")) return false;
  const auto ns = runtime::namespace_of(key);
  return !ns.empty() && ns != "coord" && ns != "sim" && ns != "rsu" && ns != "probe" && !ns.starts_with('_') &&
         key == "avp/" + ns + "/" + topic;
}

AssertionResult pass(std::string name, std::string detail = {}) { return {std::move(name), true, std::move(detail)}; }
AssertionResult fail(std::string name, std::string detail) { return {std::move(name), false, std::move(detail)}; }

struct Interval {
  std::string ns;
  SpotId spot = 0;
  std::size_t begin = 0;  // tap index
  std::size_t end = 0;    // tap index, or npos while open
};

std::string describe_time(std::span<const TapRecord> tap, std::size_t index) {
  return index == std::string::npos ? std::string("end of tap") : std::to_string(tap[index].recv_ns);
}

}  // namespace

AssertionResult check_reservation_mutex(std::span<const TapRecord> tap) {
  const std::string name = "reservation-mutex";
  std::vector<Interval> closed;
  std::map<std::pair<std::string, SpotId>, std::size_t> open;  // (ns, spot) -> begin
  std::size_t snapshot_violations = 0;
  std::string first_snapshot;

  const auto close = [&](const std::string& ns, SpotId spot, std::size_t at) {
    auto it = open.find({ns, spot});
    if (it == open.end()) return;
    closed.push_back({ns, spot, it->second, at});
    open.erase(it);
  };

  for (std::size_t i = 0; i < tap.size(); ++i) {
    const auto& env = tap[i].env;
    const auto& p = env.payload;
    try {
      if (is_vehicle_key(env.key, "reserve_reply") && p.value("granted", false)) {
        const auto ns = runtime::namespace_of(env.key);
        const auto spot = p.at("spot").get<SpotId>();
        if (!open.contains({ns, spot})) open[{ns, spot}] = i;
      } else if (is_vehicle_key(env.key, "release_reply") && p.value("ok", false) && p.value("kind", "") == "spot") {
        close(runtime::namespace_of(env.key), p.at("spot").get<SpotId>(), i);
      } else if (env.key == "avp/coord/evicted") {
        for (const auto& ns : p.at("evicted")) {
          std::vector<SpotId> spots;
          for (const auto& [key, begin] : open) {
            if (key.first == ns.get<std::string>()) spots.push_back(key.second);
          }
          for (const auto s : spots) close(ns.get<std::string>(), s, i);
        }
      } else if (env.key == "avp/coord/reserved") {
        std::map<std::string, int> per_ns;
        std::map<SpotId, int> per_spot;
        for (const auto& h : p.at("holders")) {
          ++per_ns[h.at("ns").get<std::string>()];
          ++per_spot[h.at("spot").get<SpotId>()];
        }
        for (const auto& [ns, n] : per_ns) {
          if (n > 1 && snapshot_violations++ == 0) first_snapshot = fmt::format("snapshot at {} lists {} holding {} spots", tap[i].recv_ns, ns, n);
        }
        for (const auto& [spot, n] : per_spot) {
          if (n > 1 && snapshot_violations++ == 0) first_snapshot = fmt::format("snapshot at {} lists spot {} {} times", tap[i].recv_ns, spot, n);
        }
      }
    } catch (const json::exception& e) {
      return fail(name, fmt::format("malformed payload on '{}' at {}: {}", env.key, tap[i].recv_ns, e.what()));
    }
  }
  std::vector<Interval> all = closed;
  for (const auto& [key, begin] : open) all.push_back({key.first, key.second, begin, std::string::npos});

  // Intervals are half-open in tap order: a release recorded before a grant
  // frees the spot for that grant.
  std::size_t violations = 0;
  std::string first;
  const auto overlap = [](const Interval& a, const Interval& b) {
    return std::max(a.begin, b.begin) < std::min(a.end, b.end);
  };
  for (std::size_t a = 0; a < all.size(); ++a) {
    for (std::size_t b = a + 1; b < all.size(); ++b) {
      const auto& x = all[a];
      const auto& y = all[b];
      const bool same_spot = x.spot == y.spot && x.ns != y.ns;
      const bool same_ns = x.ns == y.ns && x.spot != y.spot;
      if ((!same_spot && !same_ns) || !overlap(x, y)) continue;
      if (violations++ > 0) continue;
      const auto from = std::max(x.begin, y.begin);
      const auto to = std::min(x.end, y.end);
      first = same_spot ? fmt::format("spot {} held by {} and {} during [{}, {})", x.spot, x.ns, y.ns,
                                      describe_time(tap, from), describe_time(tap, to))
                        : fmt::format("{} held spots {} and {} during [{}, {})", x.ns, x.spot, y.spot,
                                      describe_time(tap, from), describe_time(tap, to));
    }
  }
  if (violations + snapshot_violations == 0) return pass(name, fmt::format("{} holding intervals", all.size()));
  return fail(name, fmt::format("{} overlapping interval(s), {} bad snapshot(s); first: {}", violations,
                                snapshot_violations, violations ? first : first_snapshot));
}

std::vector<std::string> enqueue_order(std::span<const TapRecord> tap) {
  std::vector<std::string> out;
  for (const auto& rec : tap) {
    if (is_vehicle_key(rec.env.key, "queue_reply") && rec.env.payload.value("ok", false)) {
      out.push_back(runtime::namespace_of(rec.env.key));
    }
  }
  return out;
}

std::vector<std::string> bay_service_order(std::span<const TapRecord> tap) {
  std::vector<std::string> out;
  for (const auto& rec : tap) {
    if (is_vehicle_key(rec.env.key, "bay_grant")) out.push_back(runtime::namespace_of(rec.env.key));
  }
  return out;
}

AssertionResult check_queue_fifo(std::span<const TapRecord> tap) {
  const std::string name = "queue-fifo";
  std::deque<std::string> tickets;
  std::size_t grants = 0;
  for (const auto& rec : tap) {
    const auto& env = rec.env;
    if (is_vehicle_key(env.key, "queue_reply") && env.payload.value("ok", false)) {
      tickets.push_back(runtime::namespace_of(env.key));
    } else if (is_vehicle_key(env.key, "bay_grant")) {
      const auto ns = runtime::namespace_of(env.key);
      ++grants;
      if (tickets.empty()) return fail(name, fmt::format("bay granted to {} at {} with nothing enqueued", ns, rec.recv_ns));
      if (tickets.front() != ns) {
        return fail(name, fmt::format("bay granted to {} at {} but {} was enqueued first", ns, rec.recv_ns, tickets.front()));
      }
      tickets.pop_front();
    } else if (env.key == "avp/coord/evicted" && env.payload.contains("evicted")) {
      for (const auto& ns : env.payload.at("evicted")) std::erase(tickets, ns.get<std::string>());
    }
  }
  return pass(name, fmt::format("{} bay grant(s) in enqueue order", grants));
}

AssertionResult check_status_seq(std::span<const TapRecord> tap) {
  const std::string name = "status-seq-monotonic";
  std::map<std::string, std::uint64_t> last;
  std::size_t n = 0;
  for (const auto& rec : tap) {
    if (!is_vehicle_key(rec.env.key, "status")) continue;
    const auto ns = runtime::namespace_of(rec.env.key);
    const auto seq = rec.env.payload.value("seq", std::uint64_t{0});
    if (last.contains(ns) && seq <= last[ns]) {
      return fail(name, fmt::format("{} status seq {} after {} at {}", ns, seq, last[ns], rec.recv_ns));
    }
    last[ns] = seq;
    ++n;
  }
  return pass(name, fmt::format("{} status update(s)", n));
}

AssertionResult check_zero_collisions(std::span<const TapRecord> tap) {
  const std::string name = "zero-collisions";
  std::size_t n = 0;
  std::string first;
  for (const auto& rec : tap) {
    if (rec.env.key != "avp/sim/collision") continue;
    if (n++ == 0) {
      first = fmt::format("{} and {} at {}", rec.env.payload.value("a", "?"), rec.env.payload.value("b", "?"), rec.recv_ns);
    }
  }
  return n == 0 ? pass(name) : fail(name, fmt::format("{} collision report(s); first: {}", n, first));
}

AssertionResult check_occupancy_partition(std::span<const TapRecord> tap, const world::LotMap* map) {
  const std::string name = "occupancy-partition";
  std::optional<std::set<SpotId>> universe;
  if (map) {
    const auto ids = map->spot_ids();
    universe = std::set<SpotId>(ids.begin(), ids.end());
  }
  std::size_t frames = 0;
  for (const auto& rec : tap) {
    if (rec.env.key != "avp/rsu/occupancy") continue;
    ++frames;
    try {
      const auto occupied = rec.env.payload.at("occupied").get<std::set<SpotId>>();
      const auto available = rec.env.payload.at("available").get<std::set<SpotId>>();
      std::set<SpotId> all = occupied;
      for (const auto s : available) {
        if (!all.insert(s).second) {
          return fail(name, fmt::format("frame {} lists spot {} as both occupied and available",
                                        rec.env.payload.value("frame_seq", 0), s));
        }
      }
      if (!universe) universe = all;
      if (all != *universe) {
        return fail(name, fmt::format("frame {} covers {} spot(s), expected {}", rec.env.payload.value("frame_seq", 0),
                                      all.size(), universe->size()));
      }
    } catch (const json::exception& e) {
      return fail(name, fmt::format("malformed occupancy frame at {}: {}", rec.recv_ns, e.what()));
    }
  }
  return pass(name, fmt::format("{} frame(s)", frames));
}

AssertionResult check_grant_validity(std::span<const TapRecord> tap) {
  const std::string name = "grant-validity";
  std::map<std::uint64_t, std::set<SpotId>> available;
  std::size_t grants = 0;
  for (const auto& rec : tap) {
    const auto& p = rec.env.payload;
    try {
      if (rec.env.key == "avp/rsu/occupancy") {
        available[p.at("frame_seq").get<std::uint64_t>()] = p.at("available").get<std::set<SpotId>>();
      } else if (is_vehicle_key(rec.env.key, "reserve_reply") && p.value("granted", false)) {
        ++grants;
        const auto ns = runtime::namespace_of(rec.env.key);
        const auto spot = p.at("spot").get<SpotId>();
        const auto frame = p.at("frame_seq").get<std::uint64_t>();
        auto it = available.find(frame);
        if (it == available.end()) {
          return fail(name, fmt::format("grant of spot {} to {} cites frame {} which was never published", spot, ns, frame));
        }
        if (!it->second.contains(spot)) {
          return fail(name, fmt::format("spot {} granted to {} was not available in frame {}", spot, ns, frame));
        }
      }
    } catch (const json::exception& e) {
      return fail(name, fmt::format("malformed payload on '{}' at {}: {}", rec.env.key, rec.recv_ns, e.what()));
    }
  }
  return pass(name, fmt::format("{} grant(s)", grants));
}

AssertionResult check_per_sender_fifo(std::span<const TapRecord> tap) {
  const std::string name = "per-sender-fifo";
  std::map<std::pair<std::string, std::string>, std::uint64_t> last;
  for (const auto& rec : tap) {
    const auto k = std::make_pair(rec.env.sender_id, rec.env.key);
    auto it = last.find(k);
    if (it != last.end() && rec.env.seq <= it->second) {
      return fail(name, fmt::format("{} on '{}': seq {} recorded after {}", rec.env.sender_id, rec.env.key, rec.env.seq,
                                    it->second));
    }
    last[k] = rec.env.seq;
  }
  return pass(name, fmt::format("{} stream(s)", last.size()));
}

AssertionResult check_launch_order(std::span<const TapRecord> tap) {
  const std::string name = "launch-order";
  // rank: world 0, rsu 1, managers 2, vehicles 3, gateway 4
  const auto rank_of = [](const std::string& who) -> std::optional<int> {
    if (who == "world") return 0;
    if (who == "rsu") return 1;
    if (who == "managers") return 2;
    if (who == "gateway") return 4;
    if (who == "operator" || who == "tap" || who == "harness") return std::nullopt;
    return 3;
  };
  int highest = -1;
  std::string highest_name;
  std::size_t seen = 0;
  for (const auto& rec : tap) {
    if (!rec.env.key.starts_with("avp/_ready/")) continue;
    const auto who = topic_of(rec.env.key);
    const auto rank = rank_of(who);
    if (!rank) continue;
    ++seen;
    if (*rank < highest) return fail(name, fmt::format("{} became ready after {}", who, highest_name));
    highest = *rank;
    highest_name = who;
  }
  return pass(name, fmt::format("{} component(s)", seen));
}

std::vector<AssertionResult> assert_suite(std::span<const TapRecord> tap, const world::LotMap* map) {
  return {check_reservation_mutex(tap), check_queue_fifo(tap),           check_status_seq(tap),
          check_zero_collisions(tap),   check_occupancy_partition(tap, map), check_grant_validity(tap),
          check_per_sender_fifo(tap),   check_launch_order(tap)};
}

}  // namespace avp::harness
