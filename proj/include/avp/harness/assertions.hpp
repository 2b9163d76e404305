#pragma once

#include <span>
#include <string>
#include <vector>

#include "avp/harness/report.hpp"
#include "avp/harness/tap.hpp"
#include "avp/world/lot_map.hpp"

namespace avp::harness {

/// No spot has two holders and no vehicle holds two spots at any point.
/// Holding intervals run from a granted reserve_reply to the matching
/// release_reply or the holder's eviction; a failure names the overlap.
AssertionResult check_reservation_mutex(std::span<const TapRecord> tap);
/// Every bay_grant goes to the earliest still-queued enqueue.
AssertionResult check_queue_fifo(std::span<const TapRecord> tap);
/// Per-vehicle status seq strictly increases.
AssertionResult check_status_seq(std::span<const TapRecord> tap);
AssertionResult check_zero_collisions(std::span<const TapRecord> tap);
/// Each occupancy frame splits the spot set into disjoint occupied and
/// available parts (the map's spot set when given).
AssertionResult check_occupancy_partition(std::span<const TapRecord> tap, const world::LotMap* map = nullptr);
/// Every granted spot was available in the frame the grant cites.
AssertionResult check_grant_validity(std::span<const TapRecord> tap);
/// Per (sender, key), seq strictly increases in recorded order.
AssertionResult check_per_sender_fifo(std::span<const TapRecord> tap);
/// Ready announcements follow world, rsu, managers, vehicles, gateway.
AssertionResult check_launch_order(std::span<const TapRecord> tap);

/// All of the above, in that order. Pure function of its inputs.
std::vector<AssertionResult> assert_suite(std::span<const TapRecord> tap, const world::LotMap* map = nullptr);

/// Namespaces in the order the queue accepted them.
std::vector<std::string> enqueue_order(std::span<const TapRecord> tap);
/// Namespaces in the order they were granted the drop-off bay.
std::vector<std::string> bay_service_order(std::span<const TapRecord> tap);

}  // namespace avp::harness
