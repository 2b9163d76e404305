#pragma once

#include <array>
#include <numbers>
#include <span>
#include <vector>

namespace avp::world {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
};

inline Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
inline Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
inline Vec2 operator*(double s, Vec2 v) { return {s * v.x, s * v.y}; }
inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
double norm(Vec2 v);
double distance(Vec2 a, Vec2 b);

/// Wraps into (-pi, pi].
double normalize_angle(double radians);

struct Pose2 {
  double x = 0.0;
  double y = 0.0;
  double yaw = 0.0;

  Vec2 position() const { return {x, y}; }
};

/// Rectangle centred at (cx, cy); `hx` is the half-extent along the local x
/// axis, which points along `yaw`.
struct OrientedRect {
  double cx = 0.0;
  double cy = 0.0;
  double hx = 0.0;
  double hy = 0.0;
  double yaw = 0.0;

  /// Counter-clockwise.
  std::array<Vec2, 4> corners() const;
  double area() const { return 4.0 * hx * hy; }
  bool contains(Vec2 p) const;
};

struct OverlapResult {
  bool intersects = false;
  double area = 0.0;
};

/// Separating-axis test over both rectangles' edge normals; area by
/// Sutherland-Hodgman clipping. Touching rectangles do not intersect.
OverlapResult oriented_rect_overlap(const OrientedRect& a, const OrientedRect& b);

/// Clips `subject` against the convex, counter-clockwise `clip` polygon.
std::vector<Vec2> clip_convex(std::span<const Vec2> subject, std::span<const Vec2> clip);

/// Shoelace formula; positive for counter-clockwise vertices.
double polygon_area(std::span<const Vec2> polygon);

}  // namespace avp::world
