#include <doctest.h>

#include <filesystem>
#include <map>

#include "avp/harness/assertions.hpp"
#include "avp/harness/report.hpp"
#include "avp/harness/runner.hpp"
#include "avp/harness/scenario.hpp"

using namespace avp::harness;
using avp::msgbus::json;

namespace {

// Builds a tap in recording order, numbering seq per (sender, key).
class TapBuilder {
 public:
  TapBuilder& add(const std::string& key, const std::string& sender, json payload) {
    const auto seq = ++seq_[{sender, key}];
    t_ += 1'000'000;
    records_.push_back({{key, sender, seq, t_, std::move(payload)}, t_ + 100});
    return *this;
  }
  TapBuilder& grant(const std::string& ns, int spot) {
    return add("avp/" + ns + "/reserve_reply", "managers", {{"granted", true}, {"spot", spot}, {"frame_seq", 1}});
  }
  TapBuilder& release(const std::string& ns, int spot) {
    return add("avp/" + ns + "/release_reply", "managers", {{"ok", true}, {"kind", "spot"}, {"spot", spot}});
  }
  TapBuilder& enqueue(const std::string& ns, int pos) {
    return add("avp/" + ns + "/queue_reply", "managers", {{"ok", true}, {"position", pos}});
  }
  TapBuilder& bay(const std::string& ns) { return add("avp/" + ns + "/bay_grant", "managers", {{"position", 1}}); }
  TapBuilder& status(const std::string& ns, const std::string& state, std::uint64_t seq) {
    return add("avp/" + ns + "/status", ns,
               {{"ns", ns}, {"state", state}, {"seq", seq}, {"failed", false}, {"en_route", false}, {"spot", nullptr}});
  }
  const std::vector<TapRecord>& records() const { return records_; }

 private:
  std::int64_t t_ = 1'000'000'000;
  std::map<std::pair<std::string, std::string>, std::uint64_t> seq_;
  std::vector<TapRecord> records_;
};

}  // namespace

TEST_SUITE("harness") {
  TEST_CASE("empty tap passes every assertion vacuously") {
    const std::vector<TapRecord> none;
    const auto results = assert_suite(none);
    CHECK(results.size() == 8);
    CHECK(all_passed(results));
  }

  TEST_CASE("a spot held twice fails the mutex check and names the overlap") {
    TapBuilder tap;
    tap.grant("v1", 4).grant("v2", 4).release("v1", 4).release("v2", 4);
    const auto r = check_reservation_mutex(tap.records());
    CHECK_FALSE(r.passed);
    CHECK(r.detail.find("spot 4") != std::string::npos);
    CHECK(r.detail.find("v1") != std::string::npos);
    CHECK(r.detail.find("v2") != std::string::npos);
  }

  TEST_CASE("sequential holders of one spot pass") {
    TapBuilder tap;
    tap.grant("v1", 4).release("v1", 4).grant("v2", 4).grant("v1", 5);
    CHECK(check_reservation_mutex(tap.records()).passed);
  }

  TEST_CASE("eviction ends a holding interval") {
    TapBuilder tap;
    tap.grant("v1", 4).add("avp/coord/evicted", "managers", {{"evicted", {"v1"}}, {"at_ns", 0}}).grant("v2", 4);
    CHECK(check_reservation_mutex(tap.records()).passed);
  }

  TEST_CASE("queue order violations are caught") {
    TapBuilder good;
    good.enqueue("v1", 1).bay("v1").enqueue("v2", 2).enqueue("v3", 3).bay("v2").bay("v3");
    CHECK(check_queue_fifo(good.records()).passed);
    CHECK(enqueue_order(good.records()) == std::vector<std::string>{"v1", "v2", "v3"});
    CHECK(bay_service_order(good.records()) == std::vector<std::string>{"v1", "v2", "v3"});

    TapBuilder bad;
    bad.enqueue("v1", 1).enqueue("v2", 2).bay("v2");
    CHECK_FALSE(check_queue_fifo(bad.records()).passed);
  }

  TEST_CASE("status seq must increase per vehicle") {
    TapBuilder ok;
    ok.status("v1", "ARRIVING", 1).status("v2", "ARRIVING", 1).status("v1", "QUEUED_DROPOFF", 2);
    CHECK(check_status_seq(ok.records()).passed);
    TapBuilder bad;
    bad.status("v1", "ARRIVING", 2).status("v1", "QUEUED_DROPOFF", 2);
    CHECK_FALSE(check_status_seq(bad.records()).passed);
  }

  TEST_CASE("collisions and occupancy partition") {
    TapBuilder tap;
    tap.add("avp/sim/collision", "world", {{"a", "v1"}, {"b", "v2"}});
    CHECK_FALSE(check_zero_collisions(tap.records()).passed);
    TapBuilder occ;
    occ.add("avp/rsu/occupancy", "rsu", {{"frame_seq", 1}, {"occupied", {1}}, {"available", {1, 2}}});
    CHECK_FALSE(check_occupancy_partition(occ.records()).passed);
  }

  TEST_CASE("grants must cite a frame where the spot was free") {
    TapBuilder tap;
    tap.add("avp/rsu/occupancy", "rsu", {{"frame_seq", 1}, {"occupied", {4}}, {"available", {5}}});
    tap.grant("v1", 4);
    CHECK_FALSE(check_grant_validity(tap.records()).passed);
  }

  TEST_CASE("launch order") {
    TapBuilder ok;
    for (const auto* n : {"world", "rsu", "managers", "v1", "gateway"}) ok.add(std::string("avp/_ready/") + n, n, json::object());
    CHECK(check_launch_order(ok.records()).passed);
    TapBuilder bad;
    for (const auto* n : {"rsu", "world"}) bad.add(std::string("avp/_ready/") + n, n, json::object());
    CHECK_FALSE(check_launch_order(bad.records()).passed);
  }

  TEST_CASE("report derivation, JSON round trip and CSV") {
    TapBuilder tap;
    tap.status("v1", "ARRIVING", 1).status("v1", "QUEUED_DROPOFF", 2);
    tap.add("avp/coord/reserved", "managers", {{"holders", {{{"spot", 3}, {"ns", "v1"}}}}});
    tap.add("avp/coord/reserved", "managers", {{"holders", json::array()}});
    tap.add("avp/probe/rtt/v1", "v1", {{"mean_ms", 1.5}, {"std_ms", 0.1}, {"max_ms", 2.0}, {"samples", 10}, {"peer", "managers"}});
    auto report = build_report(tap.records());
    REQUIRE(report.transitions.size() == 2);
    CHECK(report.transitions[0].from == "");
    CHECK(report.transitions[1].from == "ARRIVING");
    CHECK(report.transitions[1].to == "QUEUED_DROPOFF");
    REQUIRE(report.reservations.size() == 2);
    CHECK(report.reservations[0].event == "grant");
    CHECK(report.reservations[1].event == "release");
    CHECK(report.final_states.at("v1") == "QUEUED_DROPOFF");
    REQUIRE(report.rtt.contains("v1->managers"));
    CHECK(report.rtt.at("v1->managers").samples == 10);
    report.assertions = assert_suite(tap.records());

    const auto back = report_from_json(to_json(report));
    CHECK(back.transitions == report.transitions);
    CHECK(back.reservations == report.reservations);
    CHECK(back.assertions == report.assertions);
    CHECK(back.final_states == report.final_states);
    CHECK(canonical_logs(back) == canonical_logs(report));
    CHECK(to_json(back) == to_json(report));

    const auto csv = report_csv(report);
    CHECK(csv.find("pair,rtt_ms,std_ms,max_rtt_ms,samples") == 0);
    CHECK(csv.find("v1->managers,1.5") != std::string::npos);
    CHECK(csv.find("assertion,result,detail") != std::string::npos);
  }

  TEST_CASE("scenario parsing") {
    const auto s = parse_scenario(R"(
name: t
map: lot.json
seed: 4
mode: virtual
detector: {p_miss: {sedan: 0.2}, sigma_m: 0.1}
vehicles:
  - {ns: a}
  - {ns: b, spawn_index: 3, class: van, max_speed_mps: 2}
script:
  - {at_s: 1, kind: DROPOFF, target_ns: a}
operator: {auto_park: true, park_delay_s: [1, 2], retrieve: after_delay}
faults:
  - {kill: b, when_state: PARKED}
end_when_all: PARKED
)",
                                  "/maps");
    CHECK(s.map_file == std::filesystem::path("/maps/lot.json"));
    CHECK(s.mode == RunMode::Virtual);
    CHECK(s.vehicles[1].spawn_index == 3);
    CHECK(s.vehicles[1].vehicle_class == "van");
    CHECK(s.detector.p_miss.at("sedan") == 0.2);
    CHECK(s.operator_policy.park_delay.hi_s == 2.0);
    CHECK(s.operator_policy.retrieve == RetrievePolicy::AfterDelay);
    CHECK(s.faults[0].when_state == avp::node::LifecycleState::Parked);
    CHECK(s.end_state == avp::node::LifecycleState::Parked);
    CHECK(to_json(s)["vehicles"].size() == 2);
  }

  TEST_CASE("scenario errors are reported") {
    const std::vector<std::string> bad{
        "[1, 2]",
        "name: x",                                                                   // no map
        "map: m\nmode: sideways",
        "map: m\nvehicles: [{ns: a}, {ns: a, spawn_index: 1}]",
        "map: m\nvehicles: [{ns: a}, {ns: b, spawn_index: 0}]",
        "map: m\nvehicles: [{ns: coord}]",
        "map: m\nvehicles: [{ns: 'a/b'}]",
        "map: m\nvehicles: [{ns: a}]\nscript: [{at_s: 1, kind: FLY, target_ns: a}]",
        "map: m\nvehicles: [{ns: a}]\nscript: [{at_s: 1, kind: PARK, target_ns: z}]",
        "map: m\nvehicles: [{ns: a}]\nfaults: [{kill: a}]",
        "map: m\nvehicles: [{ns: a}]\nfaults: [{kill: a, at_s: 1, when_state: PARKED}]",
        "map: m\ndetector: {p_miss: {sedan: 2}}",
        "map: m\nduration_s: 0",
        "map: m\noperator: {retrieve: sometimes}",
        "map: m\nend_when_all: GONE",
        "map: m\npolicy: random",
    };
    for (const auto& text : bad) {
      INFO(text);
      CHECK_THROWS_AS(parse_scenario(text), ScenarioError);
    }
  }

  TEST_CASE("shipped scenarios parse") {
    for (const auto* name : {"two_host", "three_host", "fifo5", "eviction", "empty"}) {
      INFO(name);
      const auto s = load_scenario(std::filesystem::path(AVP_SCENARIOS_DIR) / (std::string(name) + ".yaml"));
      CHECK(s.name == name);
      CHECK(std::filesystem::exists(s.map_file));
    }
  }

  TEST_CASE("virtual runs complete and are reproducible") {
    auto s = load_scenario(std::filesystem::path(AVP_SCENARIOS_DIR) / "three_host.yaml");
    RunOptions opts;
    opts.mode_override = RunMode::Virtual;
    const auto a = run_scenario(s, opts);
    const auto b = run_scenario(s, opts);
    CHECK(a.report.completed);
    CHECK(all_passed(a.report.assertions));
    for (const auto& [ns, state] : a.report.final_states) CHECK(state == "DEPARTED");
    CHECK(canonical_logs(a.report) == canonical_logs(b.report));
    CHECK(a.tap.size() == b.tap.size());

    auto empty = load_scenario(std::filesystem::path(AVP_SCENARIOS_DIR) / "empty.yaml");
    const auto e = run_scenario(empty, opts);
    CHECK(all_passed(e.report.assertions));
    CHECK(e.report.transitions.empty());
  }

  TEST_CASE("virtual eviction frees the queue and the survivors finish") {
    auto s = load_scenario(std::filesystem::path(AVP_SCENARIOS_DIR) / "eviction.yaml");
    RunOptions opts;
    opts.mode_override = RunMode::Virtual;
    const auto r = run_scenario(s, opts);
    CHECK(r.report.completed);
    CHECK(all_passed(r.report.assertions));
    CHECK(r.report.kills.size() == 2);
    CHECK(r.report.final_states.at("v2") == "DEPARTED");
    CHECK(r.report.final_states.at("v4") == "DEPARTED");
  }
}
