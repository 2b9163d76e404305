#include <doctest.h>

#include <cmath>
#include <random>

#include <boost/geometry.hpp>
#include <boost/geometry/geometries/point_xy.hpp>
#include <boost/geometry/geometries/polygon.hpp>

#include "avp/perception/occupancy.hpp"

using namespace avp::perception;
using avp::world::LotMap;
using avp::world::Pose2;

namespace {

LotMap one_spot_map() {
  LotMap map;
  map.spots.push_back({1, {0.0, 0.0, 2.7, 1.3, 0.0}});
  return map;
}

GroundTruthVehicle vehicle_at(double x, double y, double yaw, double length = 5.4, double width = 2.6) {
  GroundTruthVehicle v;
  v.ns = "v";
  v.pose = Pose2{x, y, yaw};
  v.length = length;
  v.width = width;
  return v;
}

}  // namespace

TEST_SUITE("perception") {
  TEST_CASE("detector miss rate converges to p_miss") {
    DetectorModel model;
    model.p_miss = {{"sedan", 0.3}};
    model.seed = 123;
    const std::vector<GroundTruthVehicle> one{vehicle_at(0, 0, 0)};
    int missed = 0;
    const int frames = 10'000;
    for (int f = 0; f < frames; ++f) missed += detect(one, model, static_cast<std::uint64_t>(f)).empty() ? 1 : 0;
    const double rate = static_cast<double>(missed) / frames;
    MESSAGE("observed miss rate ", rate);
    CHECK(std::abs(rate - 0.3) <= 0.01);
  }

  TEST_CASE("detector noise has the configured spread and is deterministic") {
    DetectorModel model;
    model.pos_noise_sigma_m = 0.2;
    model.seed = 9;
    const std::vector<GroundTruthVehicle> one{vehicle_at(3, 4, 0)};
    double sum = 0.0, sum2 = 0.0;
    const int frames = 20'000;
    for (int f = 0; f < frames; ++f) {
      const auto d = detect(one, model, static_cast<std::uint64_t>(f));
      REQUIRE(d.size() == 1);
      sum += d[0].cx - 3.0;
      sum2 += (d[0].cx - 3.0) * (d[0].cx - 3.0);
    }
    const double mean = sum / frames;
    CHECK(std::abs(mean) < 0.01);
    CHECK(std::sqrt(sum2 / frames - mean * mean) == doctest::Approx(0.2).epsilon(0.03));
    CHECK(detect(one, model, 5)[0].cx == detect(one, model, 5)[0].cx);
  }

  TEST_CASE("zero miss probability and zero noise reproduce the footprints") {
    DetectorModel model;
    const std::vector<GroundTruthVehicle> two{vehicle_at(1, 2, 0.3), vehicle_at(-4, 0, 1.0)};
    const auto d = detect(two, model, 0);
    REQUIRE(d.size() == 2);
    CHECK(d[0].cx == 1.0);
    CHECK(d[1].yaw == 1.0);
    CHECK(d[0].hx == doctest::Approx(2.7));
  }

  TEST_CASE("a straddling detection counts only above theta") {
    const auto map = one_spot_map();
    // Same-size box shifted along x: covered fraction = 1 - d / 5.4.
    const std::vector<OrientedRect> sixty{vehicle_at(0.4 * 5.4, 0, 0).footprint()};
    const std::vector<OrientedRect> two_pct{vehicle_at(0.98 * 5.4, 0, 0).footprint()};
    CHECK(compute_occupancy(sixty, map).occupied == std::set<SpotId>{1});
    CHECK(compute_occupancy(two_pct, map, 0.05).occupied.empty());
    CHECK(compute_occupancy(two_pct, map, 0.01).occupied == std::set<SpotId>{1});
    CHECK(compute_occupancy(two_pct, map).available == std::set<SpotId>{1});
  }

  TEST_CASE("class-conditional misses and empty input") {
    DetectorModel model;
    model.p_miss = {{"van", 1.0}};
    auto van = vehicle_at(0, 0, 0);
    van.vehicle_class = "van";
    const std::vector<GroundTruthVehicle> two{van, vehicle_at(10, 0, 0)};
    const auto d = detect(two, model, 1);
    REQUIRE(d.size() == 1);
    CHECK(d[0].cx == 10.0);

    const auto map = avp::world::load_map_file(AVP_MAPS_DIR "/lot12.json");
    const auto empty = compute_occupancy({}, map);
    CHECK(empty.occupied.empty());
    CHECK(empty.available.size() == 12);
    const auto& s3 = map.find_spot(3)->rect;
    const std::vector<OrientedRect> centred{{s3.cx, s3.cy, 2.25, 0.9, s3.yaw}};
    CHECK(compute_occupancy(centred, map).occupied == std::set<SpotId>{3});
  }

  TEST_CASE("a detection straddling spots 3 and 4 of the shipped lot") {
    namespace bg = boost::geometry;
    using P = bg::model::d2::point_xy<double>;
    using Poly = bg::model::polygon<P, false>;
    const auto poly = [](const OrientedRect& r) {
      Poly p;
      for (const auto& c : r.corners()) bg::append(p.outer(), P(c.x, c.y));
      bg::append(p.outer(), P(r.corners()[0].x, r.corners()[0].y));
      bg::correct(p);
      return p;
    };
    const auto ratio = [&](const OrientedRect& det, const OrientedRect& spot) {
      std::vector<Poly> out;
      bg::intersection(poly(det), poly(spot), out);
      double a = 0.0;
      for (const auto& o : out) a += bg::area(o);
      return a / bg::area(poly(spot));
    };
    const auto map = avp::world::load_map_file(AVP_MAPS_DIR "/lot12.json");
    const auto& s3 = map.find_spot(3)->rect;
    const auto& s4 = map.find_spot(4)->rect;
    // Spots face the aisle (yaw pi/2), so their width runs along x. Cover
    // x in [lo, hi] with lo leaving 60% of spot 3 and hi reaching 2% into 4.
    const double s3_right = s3.cx + s3.hy, s4_left = s4.cx - s4.hy;
    const double lo = s3_right - 0.60 * 2 * s3.hy, hi = s4_left + 0.02 * 2 * s4.hy;
    const OrientedRect det{(lo + hi) / 2, s3.cy, s3.hx, (hi - lo) / 2, s3.yaw};
    CHECK(ratio(det, s3) == doctest::Approx(0.60).epsilon(1e-6));
    CHECK(ratio(det, s4) == doctest::Approx(0.02).epsilon(1e-4));
    CHECK(compute_occupancy(std::vector<OrientedRect>{det}, map, 0.05).occupied == std::set<SpotId>{3});
  }

  TEST_CASE("validation and parsing") {
    CHECK(parse_p_miss("sedan=0.1,truck=0.5") == std::map<std::string, double>{{"sedan", 0.1}, {"truck", 0.5}});
    CHECK_THROWS_AS(parse_p_miss("sedan"), std::invalid_argument);
    CHECK_THROWS_AS(parse_p_miss("sedan=x"), std::invalid_argument);
    DetectorModel bad;
    bad.p_miss = {{"sedan", 1.5}};
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad.p_miss.clear();
    bad.pos_noise_sigma_m = -1;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    CHECK(DetectorModel{}.miss_probability("bus") == 0.0);
    const auto map = one_spot_map();
    CHECK_THROWS_AS(compute_occupancy({}, map, 1.0), std::invalid_argument);
  }

  TEST_CASE("frames round-trip through JSON") {
    OccupancyFrame f;
    f.frame_seq = 7;
    f.occupied = {1, 3};
    f.available = {2};
    const auto back = occupancy_from_json(to_json(f), 55);
    CHECK(back.frame_seq == 7);
    CHECK(back.occupied == f.occupied);
    CHECK(back.available == f.available);
    CHECK(back.timestamp_ns == 55);
  }
}
