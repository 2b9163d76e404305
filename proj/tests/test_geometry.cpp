#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include <boost/geometry.hpp>
#include <boost/geometry/geometries/point_xy.hpp>
#include <boost/geometry/geometries/polygon.hpp>

#include "avp/world/geometry.hpp"

using namespace avp::world;
namespace bg = boost::geometry;

namespace {

using BgPoint = bg::model::d2::point_xy<double>;
using BgPolygon = bg::model::polygon<BgPoint, false>;  // counter-clockwise

// Builds the rectangle from its definition (centre, half-extents, yaw)
// without going through OrientedRect::corners().
BgPolygon to_bg(const OrientedRect& r) {
  const double c = std::cos(r.yaw), s = std::sin(r.yaw);
  BgPolygon poly;
  const double local[4][2] = {{-r.hx, -r.hy}, {r.hx, -r.hy}, {r.hx, r.hy}, {-r.hx, r.hy}};
  for (const auto& p : local) bg::append(poly.outer(), BgPoint(r.cx + c * p[0] - s * p[1], r.cy + s * p[0] + c * p[1]));
  bg::append(poly.outer(), BgPoint(r.cx + c * local[0][0] - s * local[0][1], r.cy + s * local[0][0] + c * local[0][1]));
  bg::correct(poly);
  return poly;
}

double bg_overlap(const OrientedRect& a, const OrientedRect& b) {
  std::vector<BgPolygon> out;
  bg::intersection(to_bg(a), to_bg(b), out);
  double area = 0.0;
  for (const auto& p : out) area += bg::area(p);
  return area;
}

OrientedRect random_rect(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> centre(-0.5, 0.5), half(0.1, 0.5), yaw(-std::numbers::pi, std::numbers::pi);
  return {centre(rng), centre(rng), half(rng), half(rng), yaw(rng)};
}

// Uniform samples inside `a`; fraction inside `b` scaled by a's area.
double monte_carlo_overlap(const OrientedRect& a, const OrientedRect& b, std::mt19937_64& rng, int samples) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const double c = std::cos(a.yaw), s = std::sin(a.yaw);
  const double cb = std::cos(b.yaw), sb = std::sin(b.yaw);
  int hits = 0;
  for (int i = 0; i < samples; ++i) {
    const double lx = u(rng) * a.hx, ly = u(rng) * a.hy;
    const double x = a.cx + c * lx - s * ly - b.cx;
    const double y = a.cy + s * lx + c * ly - b.cy;
    const double bx = cb * x + sb * y, by = -sb * x + cb * y;
    if (std::abs(bx) <= b.hx && std::abs(by) <= b.hy) ++hits;
  }
  return a.area() * static_cast<double>(hits) / samples;
}

}  // namespace

TEST_SUITE("geometry") {
  TEST_CASE("normalize_angle wraps into (-pi, pi]") {
    CHECK(normalize_angle(3 * std::numbers::pi) == doctest::Approx(std::numbers::pi));
    CHECK(normalize_angle(-std::numbers::pi) == doctest::Approx(std::numbers::pi));
    CHECK(normalize_angle(0.5) == doctest::Approx(0.5));
    CHECK(normalize_angle(-7.0) == doctest::Approx(-7.0 + 2 * std::numbers::pi));
  }

  TEST_CASE("corners are counter-clockwise with the rectangle's area") {
    const OrientedRect r{1, 2, 3, 0.5, 0.7};
    const auto corners = r.corners();
    CHECK(polygon_area(corners) == doctest::Approx(r.area()));
    CHECK(r.contains({1, 2}));
    CHECK_FALSE(r.contains({1 + 10, 2}));
  }

  TEST_CASE("unit squares rotated by 45 degrees overlap in a regular octagon") {
    const OrientedRect a{0, 0, 0.5, 0.5, 0};
    const OrientedRect b{0, 0, 0.5, 0.5, std::numbers::pi / 4};
    const auto r = oriented_rect_overlap(a, b);
    CHECK(r.intersects);
    CHECK(std::abs(r.area - 2 * (std::numbers::sqrt2 - 1)) < 1e-6);
  }

  TEST_CASE("axis-aligned and disjoint cases") {
    CHECK(oriented_rect_overlap({0, 0, 1, 1, 0}, {1, 1, 1, 1, 0}).area == doctest::Approx(1.0));
    const auto apart = oriented_rect_overlap({0, 0, 1, 1, 0}, {3, 0, 1, 1, 0.3});
    CHECK_FALSE(apart.intersects);
    CHECK(apart.area == 0.0);
    // Edge contact is not an intersection.
    CHECK_FALSE(oriented_rect_overlap({0, 0, 1, 1, 0}, {2, 0, 1, 1, 0}).intersects);
    // Full containment.
    CHECK(oriented_rect_overlap({0, 0, 2, 2, 0.4}, {0.1, 0, 0.3, 0.2, 1.0}).area == doctest::Approx(0.24));
  }

  TEST_CASE("overlap area matches Boost.Geometry on random pairs") {
    std::mt19937_64 rng(99);
    for (int i = 0; i < 2000; ++i) {
      const auto a = random_rect(rng), b = random_rect(rng);
      const auto mine = oriented_rect_overlap(a, b);
      const double oracle = bg_overlap(a, b);
      // Boost 1.74 rescales to an integer grid inside intersection(), which
      // limits the oracle itself to roughly 1e-8.
      CHECK(std::abs(mine.area - oracle) < 1e-7);
      if (oracle > 1e-9) CHECK(mine.intersects);
      if (!mine.intersects) CHECK(oracle < 1e-9);
    }
  }

  TEST_CASE("overlap area matches a Monte Carlo estimate") {
    std::mt19937_64 rng(4242);
    std::mt19937_64 sampler(17);
    double worst = 0.0;
    for (int i = 0; i < 200; ++i) {
      const auto a = random_rect(rng), b = random_rect(rng);
      const double estimate = monte_carlo_overlap(a, b, sampler, 1'000'000);
      worst = std::max(worst, std::abs(oriented_rect_overlap(a, b).area - estimate));
    }
    MESSAGE("worst Monte Carlo deviation: ", worst);
    CHECK(worst < 3e-3);
  }
}
