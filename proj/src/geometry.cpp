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

#include "rlplace/geometry.hpp"

#include <algorithm>
#include <limits>
#include <numbers>

namespace rlplace
{

double normalize_angle(double radians)
{
  constexpr double two_pi = 2.0 * std::numbers::pi;
  double a = std::fmod(radians + std::numbers::pi, two_pi);
  if (a < 0.0) {
    a += two_pi;
  }
  a -= std::numbers::pi;
  // fmod rounding can land exactly on +pi
  if (a >= std::numbers::pi) {
    a = -std::numbers::pi;
  }
  return a;
}

std::array<Vec2, 4> OrientedBox::bev_corners() const
{
  const double c = std::cos(yaw);
  const double s = std::sin(yaw);
  const double hx = half_extents.x;
  const double hy = half_extents.y;
  const std::array<Vec2, 4> local{{{hx, hy}, {-hx, hy}, {-hx, -hy}, {hx, -hy}}};
  std::array<Vec2, 4> out{};
  for (std::size_t k = 0; k < 4; ++k) {
    out[k] = {center.x + c * local[k].x - s * local[k].y,
      center.y + s * local[k].x + c * local[k].y};
  }
  return out;
}

bool OrientedBox::contains_bev(double x, double y, double eps) const
{
  const double c = std::cos(yaw);
  const double s = std::sin(yaw);
  const double dx = x - center.x;
  const double dy = y - center.y;
  const double lx = c * dx + s * dy;
  const double ly = -s * dx + c * dy;
  return std::abs(lx) <= half_extents.x + eps && std::abs(ly) <= half_extents.y + eps;
}

double OrientedBox::surface_distance(const Vec3 & p) const
{
  const Vec3 local = rotate_z(p - center, -yaw);
  const double qx = std::abs(local.x) - half_extents.x;
  const double qy = std::abs(local.y) - half_extents.y;
  const double qz = std::abs(local.z) - half_extents.z;
  if (qx <= 0.0 && qy <= 0.0 && qz <= 0.0) {
    return -std::max({qx, qy, qz});
  }
  const double ox = std::max(qx, 0.0);
  const double oy = std::max(qy, 0.0);
  const double oz = std::max(qz, 0.0);
  return std::sqrt(ox * ox + oy * oy + oz * oz);
}

double signed_area(const Polygon & poly)
{
  double acc = 0.0;
  const std::size_t n = poly.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2 & a = poly[i];
    const Vec2 & b = poly[(i + 1) % n];
    acc += a.x * b.y - b.x * a.y;
  }
  return 0.5 * acc;
}

namespace
{

// > 0 when p is left of the directed edge a->b.
double side(const Vec2 & a, const Vec2 & b, const Vec2 & p)
{
  return (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x);
}

Vec2 edge_cross(const Vec2 & p, const Vec2 & q, double sp, double sq)
{
  const double t = sp / (sp - sq);
  return {p.x + t * (q.x - p.x), p.y + t * (q.y - p.y)};
}

}  // namespace

Polygon clip_convex(const Polygon & subject, const Polygon & clip)
{
  Polygon output = subject;
  const std::size_t n = clip.size();
  for (std::size_t e = 0; e < n && !output.empty(); ++e) {
    const Vec2 & a = clip[e];
    const Vec2 & b = clip[(e + 1) % n];
    Polygon input;
    input.swap(output);
    const std::size_t m = input.size();
    for (std::size_t i = 0; i < m; ++i) {
      const Vec2 & cur = input[i];
      const Vec2 & nxt = input[(i + 1) % m];
      const double sc = side(a, b, cur);
      const double sn = side(a, b, nxt);
      if (sc >= 0.0) {
        output.push_back(cur);
        if (sn < 0.0) {
          output.push_back(edge_cross(cur, nxt, sc, sn));
        }
      } else if (sn >= 0.0) {
        output.push_back(edge_cross(cur, nxt, sc, sn));
      }
    }
  }
  return output;
}

double convex_intersection_area(const Polygon & a, const Polygon & b)
{
  const Polygon inter = clip_convex(a, b);
  if (inter.size() < 3) {
    return 0.0;
  }
  return std::max(0.0, signed_area(inter));
}

Polygon to_polygon(const std::array<Vec2, 4> & corners)
{
  return Polygon(corners.begin(), corners.end());
}

double ray_box_entry(const Vec3 & origin, const Vec3 & dir, const OrientedBox & box)
{
  const Vec3 o = rotate_z(origin - box.center, -box.yaw);
  const Vec3 d = rotate_z(dir, -box.yaw);
  const double os[3] = {o.x, o.y, o.z};
  const double ds[3] = {d.x, d.y, d.z};
  const double hs[3] = {box.half_extents.x, box.half_extents.y, box.half_extents.z};

  double t_near = -std::numeric_limits<double>::infinity();
  double t_far = std::numeric_limits<double>::infinity();
  for (int k = 0; k < 3; ++k) {
    if (std::abs(ds[k]) < 1e-15) {
      if (std::abs(os[k]) > hs[k]) {
        return -1.0;
      }
      continue;
    }
    double t1 = (-hs[k] - os[k]) / ds[k];
    double t2 = (hs[k] - os[k]) / ds[k];
    if (t1 > t2) {
      std::swap(t1, t2);
    }
    t_near = std::max(t_near, t1);
    t_far = std::min(t_far, t2);
    if (t_near > t_far) {
      return -1.0;
    }
  }
  if (t_near <= 0.0) {
    return -1.0;
  }
  return t_near;
}

}  // namespace rlplace
