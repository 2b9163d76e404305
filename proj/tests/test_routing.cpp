#include <doctest.h>

#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <random>
#include <map>
#include <set>

#include "avp/world/routing.hpp"
#include "avp/world/world.hpp"

using namespace avp::world;

namespace {

nlohmann::json bay(double x, double y) { return {{"cx", x}, {"cy", y}, {"hx", 1.0}, {"hy", 1.0}, {"yaw", 0.0}}; }

// A map whose waypoint graph is given explicitly; no spots.
nlohmann::json graph_doc(int n, const std::vector<std::tuple<int, int, double>>& edges) {
  nlohmann::json doc{{"name", "g"}, {"spots", nlohmann::json::array()}, {"dropoff_bay", bay(0, 0)},
                     {"pickup_bay", bay(10, 0)}, {"spawn_points", nlohmann::json::array({{{"x", 0}, {"y", 0}}})}};
  auto nodes = nlohmann::json::array();
  for (int i = 1; i <= n; ++i) nodes.push_back({{"id", i}, {"x", i}, {"y", (i * 7) % 5}});
  auto es = nlohmann::json::array();
  for (const auto& [a, b, w] : edges) es.push_back({{"a", a}, {"b", b}, {"w", w}});
  doc["waypoints"] = {{"nodes", nodes}, {"edges", es}};
  return doc;
}

// Exhaustive simple-path search.
double brute_force_cost(const std::vector<std::tuple<int, int, double>>& edges, int from, int to) {
  double best = std::numeric_limits<double>::infinity();
  std::set<int> seen{from};
  std::function<void(int, double)> dfs = [&](int at, double cost) {
    if (at == to) {
      best = std::min(best, cost);
      return;
    }
    for (const auto& [a, b, w] : edges) {
      for (const auto& [u, v] : {std::pair{a, b}, std::pair{b, a}}) {
        if (u == at && !seen.contains(v)) {
          seen.insert(v);
          dfs(v, cost + w);
          seen.erase(v);
        }
      }
    }
  };
  dfs(from, 0.0);
  return best;
}

struct UnionFind {
  std::vector<int> parent;
  explicit UnionFind(int n) : parent(n + 1) { std::iota(parent.begin(), parent.end(), 0); }
  int find(int x) { return parent[x] == x ? x : parent[x] = find(parent[x]); }
  void unite(int a, int b) { parent[find(a)] = find(b); }
};

}  // namespace

TEST_SUITE("routing") {
  TEST_CASE("shortest path cost equals exhaustive search on random graphs") {
    std::mt19937_64 rng(5);
    int checked = 0;
    for (int trial = 0; trial < 150; ++trial) {
      const int n = 3 + static_cast<int>(rng() % 6);
      std::vector<std::tuple<int, int, double>> edges;
      // spanning chain keeps the graph connected; extra edges add choices
      for (int i = 2; i <= n; ++i) edges.emplace_back(static_cast<int>(1 + rng() % (i - 1)), i, 1.0 + static_cast<double>(rng() % 9));
      const int extra = static_cast<int>(rng() % (2 * n));
      for (int k = 0; k < extra; ++k) {
        const int a = 1 + static_cast<int>(rng() % n), b = 1 + static_cast<int>(rng() % n);
        if (a != b) edges.emplace_back(a, b, 1.0 + static_cast<double>(rng() % 9));
      }
      const auto map = load_map(graph_doc(n, edges));
      const int from = 1 + static_cast<int>(rng() % n), to = 1 + static_cast<int>(rng() % n);
      const auto path = shortest_path(map, from, to);
      CHECK(path.cost == doctest::Approx(brute_force_cost(edges, from, to)));
      REQUIRE(!path.nodes.empty());
      CHECK(path.nodes.front() == from);
      CHECK(path.nodes.back() == to);
      // the reported path is walkable and its edge sum is the reported cost
      double walked = 0.0;
      for (std::size_t i = 1; i < path.nodes.size(); ++i) {
        double w = std::numeric_limits<double>::infinity();
        for (const auto& [a, b, ew] : edges) {
          if ((a == path.nodes[i - 1] && b == path.nodes[i]) || (b == path.nodes[i - 1] && a == path.nodes[i])) w = std::min(w, ew);
        }
        REQUIRE(std::isfinite(w));
        walked += w;
      }
      CHECK(walked == doctest::Approx(path.cost));
      ++checked;
    }
    CHECK(checked == 150);
  }

  TEST_CASE("sparse 30-node graphs agree with exhaustive search") {
    std::mt19937_64 rng(30);
    for (int trial = 0; trial < 20; ++trial) {
      const int n = 30;
      std::vector<std::tuple<int, int, double>> edges;
      for (int i = 2; i <= n; ++i) edges.emplace_back(static_cast<int>(1 + rng() % (i - 1)), i, 1.0 + static_cast<double>(rng() % 9));
      for (int k = 0; k < 6; ++k) {
        const int a = 1 + static_cast<int>(rng() % n), b = 1 + static_cast<int>(rng() % n);
        if (a != b) edges.emplace_back(a, b, 1.0 + static_cast<double>(rng() % 9));
      }
      const auto map = load_map(graph_doc(n, edges));
      const int from = 1 + static_cast<int>(rng() % n), to = 1 + static_cast<int>(rng() % n);
      CHECK(shortest_path(map, from, to).cost == doctest::Approx(brute_force_cost(edges, from, to)));
    }
  }

  TEST_CASE("line graph") {
    const auto map = load_map(graph_doc(3, {{1, 2, 1.0}, {2, 3, 1.0}}));
    const auto path = shortest_path(map, 1, 3);
    CHECK(path.nodes == std::vector<NodeId>{1, 2, 3});
    CHECK(path.cost == 2.0);
  }

  TEST_CASE("map validation names the offending entity") {
    auto doc = graph_doc(2, {{1, 2, 1.0}});
    doc["spots"] = {{{"id", 4}, {"cx", 0}, {"cy", 0}, {"hx", 1}, {"hy", 1}},
                    {{"id", 4}, {"cx", 10}, {"cy", 0}, {"hx", 1}, {"hy", 1}}};
    doc["spot_approach"] = {{{"spot", 4}, {"node", 1}, {"x", 0}, {"y", 0}}};
    CHECK_THROWS_WITH_AS(load_map(doc), doctest::Contains("duplicate spot id 4"), MapError);
    doc["spots"][1]["id"] = 5;
    doc["spots"][1]["cx"] = 1.0;  // overlaps spot 4
    doc["spot_approach"].push_back({{"spot", 5}, {"node", 2}, {"x", 1}, {"y", 0}});
    CHECK_THROWS_AS(load_map(doc), MapError);
    doc["spots"][1]["cx"] = 10.0;
    CHECK(load_map(doc).spots.size() == 2);
  }

  TEST_CASE("the shipped lot has 12 spots on a connected graph") {
    const auto map = load_map_file(AVP_MAPS_DIR "/lot12.json");
    CHECK(map.spot_ids().size() == 12);
    std::map<NodeId, int> index;
    for (const auto& [id, pos] : map.nodes) index.emplace(id, static_cast<int>(index.size()));
    UnionFind uf(static_cast<int>(index.size()));
    for (const auto& e : map.edges) uf.unite(index.at(e.a), index.at(e.b));
    std::set<int> roots;
    for (const auto& [id, i] : index) roots.insert(uf.find(i));
    CHECK(roots.size() == 1);
    for (const auto id : map.spot_ids()) CHECK(map.nodes.contains(map.spot_approach.at(id).node));
  }

  TEST_CASE("map loading rejects exactly the disconnected graphs") {
    std::mt19937_64 rng(11);
    int rejected = 0;
    for (int trial = 0; trial < 200; ++trial) {
      const int n = 2 + static_cast<int>(rng() % 7);
      std::vector<std::tuple<int, int, double>> edges;
      UnionFind uf(n);
      const int m = static_cast<int>(rng() % (n + 2));
      for (int k = 0; k < m; ++k) {
        const int a = 1 + static_cast<int>(rng() % n), b = 1 + static_cast<int>(rng() % n);
        if (a == b) continue;
        edges.emplace_back(a, b, 1.0);
        uf.unite(a, b);
      }
      bool connected = true;
      for (int i = 2; i <= n; ++i) connected = connected && uf.find(i) == uf.find(1);
      if (connected) {
        CHECK_NOTHROW(load_map(graph_doc(n, edges)));
      } else {
        ++rejected;
        CHECK_THROWS_AS(load_map(graph_doc(n, edges)), MapError);
      }
    }
    CHECK(rejected > 20);
  }

  TEST_CASE("equal-cost ties resolve toward smaller node ids") {
    // square 1-2-4 and 1-3-4 with equal cost
    const auto map = load_map(graph_doc(4, {{1, 2, 1.0}, {2, 4, 1.0}, {1, 3, 1.0}, {3, 4, 1.0}}));
    CHECK(shortest_path(map, 1, 4).nodes == std::vector<NodeId>{1, 2, 4});
    CHECK(shortest_path(map, 4, 1).nodes == std::vector<NodeId>{4, 2, 1});
    CHECK_THROWS_AS(shortest_path(map, 1, 99), RoutingError);
  }

  TEST_CASE("planned routes on the shipped lot end at the goal pose") {
    const auto map = load_map_file(AVP_MAPS_DIR "/lot12.json");
    CHECK(map.spots.size() == 12);
    for (const auto& spawn : map.spawn_points) {
      const auto to_bay = plan_route(map, spawn, Goal::dropoff());
      REQUIRE(!to_bay.poses.empty());
      CHECK(to_bay.poses.back().x == doctest::Approx(map.dropoff_bay.cx));
      CHECK(to_bay.poses.back().y == doctest::Approx(map.dropoff_bay.cy));
    }
    for (const auto id : map.spot_ids()) {
      const auto route = plan_route(map, map.dropoff_approach().final_pose, Goal::to_spot(id));
      CHECK(route.poses.back().x == doctest::Approx(map.find_spot(id)->rect.cx));
      CHECK(route.poses.back().y == doctest::Approx(map.find_spot(id)->rect.cy));
    }
    CHECK_THROWS_AS(plan_route(map, {500, 500, 0}, Goal::pickup()), RoutingError);
  }

  TEST_CASE("starting on the approach node yields only the final pose") {
    const auto map = load_map_file(AVP_MAPS_DIR "/lot12.json");
    const auto approach = map.spot_approach.at(7);
    const auto at = map.nodes.at(approach.node);
    const auto route = plan_route(map, {at.x, at.y, 0.0}, Goal::to_spot(7));
    REQUIRE(route.poses.size() == 1);
    CHECK(route.poses[0].x == doctest::Approx(approach.final_pose.x));
  }

  TEST_CASE("driving from the entry to spot 7 ends on the spot's final pose") {
    const auto map = load_map_file(AVP_MAPS_DIR "/lot12.json");
    World world(map);
    VehicleBody body;
    body.ns = "v1";
    body.pose = map.spawn_points[0];
    body.max_speed_mps = 5.0;
    world.spawn(body);
    REQUIRE(world.assign_path("v1", plan_route(map, body.pose, Goal::to_spot(7)).poses));
    bool reached = false;
    for (int i = 0; i < 6000 && !reached; ++i) {
      for (const auto& e : world.step(0.05)) reached = reached || std::holds_alternative<GoalReached>(e);
    }
    REQUIRE(reached);
    const auto goal = map.spot_approach.at(7).final_pose;
    const auto pose = world.find("v1")->pose;
    CHECK(distance(pose.position(), goal.position()) <= 0.15);
    CHECK(std::abs(normalize_angle(pose.yaw - goal.yaw)) <= 0.05);
  }

  TEST_CASE("coincident vehicles report one collision per tick per pair") {
    const auto map = load_map_file(AVP_MAPS_DIR "/lot12.json");
    World world(map);
    for (const auto* ns : {"a", "b"}) {
      VehicleBody body;
      body.ns = ns;
      body.pose = map.spawn_points[2];
      world.spawn(body);
    }
    for (int tick = 0; tick < 3; ++tick) {
      int collisions = 0;
      for (const auto& e : world.step(0.05)) {
        if (const auto* c = std::get_if<Collision>(&e)) {
          ++collisions;
          CHECK(c->ns_a == "a");
          CHECK(c->ns_b == "b");
        }
      }
      CHECK(collisions == 1);
    }
  }

  TEST_CASE("a driven vehicle reaches its goal and overlapping vehicles collide") {
    auto map = load_map_file(AVP_MAPS_DIR "/lot12.json");
    World world(map);
    VehicleBody body;
    body.ns = "v1";
    body.pose = map.spawn_points[0];
    body.max_speed_mps = 5.0;
    world.spawn(body);
    const auto route = plan_route(map, body.pose, Goal::dropoff());
    REQUIRE(world.assign_path("v1", route.poses));
    bool reached = false;
    for (int i = 0; i < 4000 && !reached; ++i) {
      for (const auto& e : world.step(0.05)) reached = reached || std::holds_alternative<GoalReached>(e);
    }
    CHECK(reached);
    CHECK(distance(world.find("v1")->pose.position(), {map.dropoff_bay.cx, map.dropoff_bay.cy}) < kArrivalToleranceM + 1e-9);

    VehicleBody other = body;
    other.ns = "v2";
    other.pose = world.find("v1")->pose;
    other.pose.x += 1.0;
    world.spawn(other);
    bool collided = false;
    for (const auto& e : world.step(0.05)) collided = collided || std::holds_alternative<Collision>(e);
    CHECK(collided);
    CHECK_THROWS_AS(world.spawn(other), std::invalid_argument);
  }
}
