#include "avp/world/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace avp::world {

double norm(Vec2 v) { return std::hypot(v.x, v.y); }
double distance(Vec2 a, Vec2 b) { return norm(a - b); }

double normalize_angle(double radians) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  double a = std::fmod(radians, two_pi);
  if (a <= -std::numbers::pi) a += two_pi;
  if (a > std::numbers::pi) a -= two_pi;
  return a;
}

std::array<Vec2, 4> OrientedRect::corners() const {
  const Vec2 ux{std::cos(yaw), std::sin(yaw)};
  const Vec2 uy{-ux.y, ux.x};
  const Vec2 c{cx, cy};
  return {c + hx * ux + (-hy) * uy, c + hx * ux + hy * uy, c + (-hx) * ux + hy * uy, c + (-hx) * ux + (-hy) * uy};
}

bool OrientedRect::contains(Vec2 p) const {
  const Vec2 d{p.x - cx, p.y - cy};
  const double c = std::cos(yaw);
  const double s = std::sin(yaw);
  const double lx = c * d.x + s * d.y;
  const double ly = -s * d.x + c * d.y;
  return std::abs(lx) <= hx && std::abs(ly) <= hy;
}

namespace {

bool separated_on(Vec2 axis, const std::array<Vec2, 4>& a, const std::array<Vec2, 4>& b) {
  double amin = std::numeric_limits<double>::infinity(), amax = -amin;
  double bmin = amin, bmax = -amin;
  for (const auto& p : a) {
    const double t = dot(p, axis);
    amin = std::min(amin, t);
    amax = std::max(amax, t);
  }
  for (const auto& p : b) {
    const double t = dot(p, axis);
    bmin = std::min(bmin, t);
    bmax = std::max(bmax, t);
  }
  return amax <= bmin || bmax <= amin;
}

}  // namespace

OverlapResult oriented_rect_overlap(const OrientedRect& a, const OrientedRect& b) {
  const auto ca = a.corners();
  const auto cb = b.corners();
  const std::array<Vec2, 4> axes{Vec2{std::cos(a.yaw), std::sin(a.yaw)}, Vec2{-std::sin(a.yaw), std::cos(a.yaw)},
                                 Vec2{std::cos(b.yaw), std::sin(b.yaw)}, Vec2{-std::sin(b.yaw), std::cos(b.yaw)}};
  for (const auto& axis : axes) {
    if (separated_on(axis, ca, cb)) return {false, 0.0};
  }
  const auto poly = clip_convex(ca, cb);
  const double area = std::abs(polygon_area(poly));
  // SAT already proved a positive-measure overlap; clipping round-off must
  // not report it as empty.
  return {true, std::max(area, std::numeric_limits<double>::min())};
}

std::vector<Vec2> clip_convex(std::span<const Vec2> subject, std::span<const Vec2> clip) {
  std::vector<Vec2> output(subject.begin(), subject.end());
  for (std::size_t i = 0; i < clip.size() && !output.empty(); ++i) {
    const Vec2 e0 = clip[i];
    const Vec2 e1 = clip[(i + 1) % clip.size()];
    const Vec2 edge = e1 - e0;
    const auto inside = [&](Vec2 p) { return cross(edge, p - e0) >= 0.0; };
    const auto intersect = [&](Vec2 p, Vec2 q) {
      const double dp = cross(edge, p - e0);
      const double dq = cross(edge, q - e0);
      const double t = dp / (dp - dq);
      return p + t * (q - p);
    };
    std::vector<Vec2> input;
    input.swap(output);
    for (std::size_t j = 0; j < input.size(); ++j) {
      const Vec2 cur = input[j];
      const Vec2 prev = input[(j + input.size() - 1) % input.size()];
      if (inside(cur)) {
        if (!inside(prev)) output.push_back(intersect(prev, cur));
        output.push_back(cur);
      } else if (inside(prev)) {
        output.push_back(intersect(prev, cur));
      }
    }
  }
  return output;
}

double polygon_area(std::span<const Vec2> polygon) {
  if (polygon.size() < 3) return 0.0;
  double twice = 0.0;
  for (std::size_t i = 0; i < polygon.size(); ++i) twice += cross(polygon[i], polygon[(i + 1) % polygon.size()]);
  return 0.5 * twice;
}

}  // namespace avp::world
