// Copyright 2026 The rlplace Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef RLPLACE__GEOMETRY_HPP_
#define RLPLACE__GEOMETRY_HPP_

#include <array>
#include <cmath>
#include <vector>

namespace rlplace
{

struct Vec3
{
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  friend bool operator==(const Vec3 &, const Vec3 &) = default;
  Vec3 operator+(const Vec3 & o) const { return {x + o.x, y + o.y, z + o.z}; }
  Vec3 operator-(const Vec3 & o) const { return {x - o.x, y - o.y, z - o.z}; }
  Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
  double dot(const Vec3 & o) const { return x * o.x + y * o.y + z * o.z; }
  double norm() const { return std::sqrt(dot(*this)); }
  bool finite() const { return std::isfinite(x) && std::isfinite(y) && std::isfinite(z); }
};

struct Vec2
{
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const Vec2 &, const Vec2 &) = default;
};

// Wraps an angle into [-pi, pi).
double normalize_angle(double radians);

// Rotation of (x, y) about +z by `yaw`.
inline Vec3 rotate_z(const Vec3 & v, double yaw)
{
  const double c = std::cos(yaw);
  const double s = std::sin(yaw);
  return {c * v.x - s * v.y, s * v.x + c * v.y, v.z};
}

struct Pose
{
  Vec3 position;
  double yaw = 0.0;  // [-pi, pi)

  friend bool operator==(const Pose &, const Pose &) = default;
};

struct OrientedBox
{
  Vec3 center;
  Vec3 half_extents;  // each > 0
  double yaw = 0.0;

  friend bool operator==(const OrientedBox &, const OrientedBox &) = default;

  // Footprint corners, counter-clockwise.
  std::array<Vec2, 4> bev_corners() const;
  double bev_area() const { return 4.0 * half_extents.x * half_extents.y; }
  bool contains_bev(double x, double y, double eps = 0.0) const;
  // Unsigned distance from p to the box surface (zero on the surface).
  double surface_distance(const Vec3 & p) const;
};

using Polygon = std::vector<Vec2>;

// Signed shoelace area, positive for counter-clockwise vertex order.
double signed_area(const Polygon & poly);

// Sutherland-Hodgman clip of `subject` against the convex counter-clockwise
// polygon `clip`. Returns the intersection polygon (possibly empty).
Polygon clip_convex(const Polygon & subject, const Polygon & clip);

// Area of the intersection of two convex counter-clockwise polygons.
double convex_intersection_area(const Polygon & a, const Polygon & b);

Polygon to_polygon(const std::array<Vec2, 4> & corners);

// Ray/box slab test in the box frame. Returns the entry distance along
// `dir` (unit) or a negative value on miss. Origins inside the box miss.
double ray_box_entry(const Vec3 & origin, const Vec3 & dir, const OrientedBox & box);

}  // namespace rlplace

#endif  // RLPLACE__GEOMETRY_HPP_
