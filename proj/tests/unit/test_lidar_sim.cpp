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

#include <cmath>
#include <fstream>
#include <set>

#include "doctest.h"
#include "fixtures.hpp"
#include "oracles.hpp"
#include "rlplace/errors.hpp"
#include "rlplace/lidar_sim.hpp"
#include "rlplace/random.hpp"

using namespace rlplace;

namespace
{

// One mount at the origin looking along +x, an occluder wall and a vehicle.
Scenario wall_scene(double vehicle_x, double vehicle_y)
{
  Scenario s;
  s.seed = 1;
  s.grid = build_roi_grid(s.extent, 2.0);
  CandidateMount m;
  m.id = 0;
  m.pose.position = {0.0, 0.0, 2.0};
  s.mounts.push_back(m);
  OrientedBox wall;
  wall.center = {10.0, 0.0, 5.0};
  wall.half_extents = {0.5, 10.0, 5.0};
  s.occluders.push_back(wall);
  TrafficFrame f;
  VehicleBox v;
  v.vehicle_id = 7;
  v.box.center = {vehicle_x, vehicle_y, 0.75};
  v.box.half_extents = {2.25, 0.9, 0.75};
  f.vehicles.push_back(v);
  s.frames.push_back(f);
  return s;
}

std::size_t count_label(const PointCloud & c, int label)
{
  return static_cast<std::size_t>(std::count_if(
      c.points.begin(), c.points.end(), [&](const LabeledPoint & p) { return p.label == label; }));
}

}  // namespace

TEST_CASE("beam directions are unit and span the vertical field of view")
{
  const LidarSpec spec;
  const auto dirs = beam_directions(spec);
  CHECK(dirs.size() == spec.rays_per_frame());
  CHECK(spec.azimuth_count() == 800);
  double zmin = 1.0;
  double zmax = -1.0;
  for (const auto & d : dirs) {
    CHECK(d.norm() == doctest::Approx(1.0));
    zmin = std::min(zmin, d.z);
    zmax = std::max(zmax, d.z);
  }
  CHECK(std::asin(zmin) == doctest::Approx(-30.0 * M_PI / 180.0));
  CHECK(std::asin(zmax) == doctest::Approx(10.0 * M_PI / 180.0));
}

TEST_CASE("lidar spec validation")
{
  LidarSpec s;
  s.channels = 0;
  CHECK_THROWS_AS(s.validate(), ParameterError);
  s = LidarSpec{};
  s.vertical_fov_min_deg = 20.0;
  CHECK_THROWS_AS(s.validate(), ParameterError);
  s = LidarSpec{};
  s.max_range = -1.0;
  CHECK_THROWS_AS(s.validate(), ParameterError);
}

TEST_CASE("a vehicle behind a wall gets no points, in front of it gets many")
{
  const LidarSpec spec;
  const Scenario hidden = wall_scene(20.0, 0.0);
  const PointCloud a = cast_frame(hidden, 0, hidden.mounts[0], spec);
  CHECK(count_label(a, 7) == 0);

  const Scenario visible = wall_scene(-15.0, 0.0);
  const PointCloud b = cast_frame(visible, 0, visible.mounts[0], spec);
  CHECK(count_label(b, 7) > 20);
  CHECK(b.frame_name == "mount:0");
}

TEST_CASE("cast distances lie in (0, max_range]")
{
  const Scenario s = fixture::small_scene(3);
  LidarSpec spec;
  spec.max_range = 60.0;
  const PointCloud c = cast_frame(s, 0, s.mounts[0], spec);
  CHECK_FALSE(c.points.empty());
  for (const auto & p : c.points) {
    const double r = p.p.norm();
    CHECK(r > 0.0);
    CHECK(r <= spec.max_range + 1e-9);
  }
}

TEST_CASE("cast_ray matches the brute-force primitive oracle")
{
  const Scenario s = fixture::small_scene(12);
  const SceneGeometry g = build_geometry(s, 2);
  Rng rng(77);
  for (int i = 0; i < 500; ++i) {
    const Vec3 o{rng.uniform(-60, 60), rng.uniform(-60, 60), rng.uniform(0.5, 8)};
    Vec3 d{rng.normal(0, 1), rng.normal(0, 1), rng.normal(-0.2, 0.4)};
    d = d * (1.0 / d.norm());
    const auto hit = cast_ray(g, o, d, 100.0);
    const auto ref = oracle::cast(g, o, d, 100.0);
    REQUIRE(hit.has_value() == ref.has_value());
    if (hit) {
      CHECK(hit->primitive == ref->primitive);
      CHECK(std::abs(hit->distance - ref->distance) <= 1e-6);
    }
  }
}

TEST_CASE("transforms compose, invert and preserve distances")
{
  const Scenario s = fixture::small_scene(5);
  const PointCloud c = cast_frame(s, 0, s.mounts[0], LidarSpec{});
  const CoordinateFrame m0 = mount_frame(s.mounts[0]);
  const CoordinateFrame m1 = mount_frame(s.mounts[1]);
  const CoordinateFrame w = world_frame();

  const PointCloud direct = transform_cloud(c, m0, w);
  PointCloud via = transform_cloud(c, m0, m1);
  via = transform_cloud(via, m1, w);
  REQUIRE(direct.points.size() == via.points.size());
  for (std::size_t i = 0; i < direct.points.size(); i += 37) {
    CHECK((direct.points[i].p - via.points[i].p).norm() < 1e-9);
    CHECK(direct.points[i].label == via.points[i].label);
  }
  const PointCloud back = transform_cloud(direct, w, m0);
  for (std::size_t i = 0; i < c.points.size(); i += 37) {
    CHECK((back.points[i].p - c.points[i].p).norm() < 1e-9);
  }
  for (std::size_t i = 0; i + 1 < c.points.size(); i += 101) {
    const double before = (c.points[i].p - c.points[i + 1].p).norm();
    const double after = (direct.points[i].p - direct.points[i + 1].p).norm();
    CHECK(std::abs(before - after) <= 1e-9);
  }
  CHECK_THROWS_AS(transform_cloud(c, m1, w), FrameError);
}

TEST_CASE("fusion is a multiset union and commutes with stripping")
{
  const Scenario s = fixture::small_scene(6);
  const CoordinateFrame w = world_frame();
  const PointCloud a = transform_cloud(cast_frame(s, 1, s.mounts[0], LidarSpec{}), mount_frame(s.mounts[0]), w);
  const PointCloud b = transform_cloud(cast_frame(s, 1, s.mounts[2], LidarSpec{}), mount_frame(s.mounts[2]), w);
  const std::vector<PointCloud> both{a, b};
  const PointCloud fused = fuse_clouds(both);
  CHECK(fused.points.size() == a.points.size() + b.points.size());

  const std::vector<PointCloud> stripped{strip_vehicle_points(a), strip_vehicle_points(b)};
  CHECK(strip_vehicle_points(fused) == fuse_clouds(stripped));
  for (const auto & p : strip_vehicle_points(fused).points) {
    CHECK(p.is_static());
  }

  CHECK_THROWS_AS(fuse_clouds(std::span<const PointCloud>{}), ParameterError);
  const std::vector<PointCloud> mixed{a, cast_frame(s, 1, s.mounts[0], LidarSpec{})};
  CHECK_THROWS_AS(fuse_clouds(mixed), FrameError);
}

TEST_CASE("crop keeps exactly the closed range box")
{
  PointCloud c;
  c.frame_name = "ego";
  c.points = {{{70.0, 0.0, 0.0}}, {{70.1, 0.0, 0.0}}, {{0.0, 20.0, 4.0}}, {{0.0, 0.0, -0.1}},
    {{0.0, 0.0, 4.1}}};
  const PointCloud out = crop_to_range(c, RangeBox{});
  REQUIRE(out.points.size() == 2);
  CHECK(out.points[0].p.x == 70.0);
  CHECK(out.points[1].p.z == 4.0);
}

TEST_CASE("selective fusion refills vehicle footprints from other frames")
{
  const Scenario s = fixture::small_scene(8, 4, 6);
  const CoordinateFrame w = world_frame();
  std::vector<PointCloud> clouds;
  for (const auto & f : s.frames) {
    clouds.push_back(transform_cloud(cast_frame(s, f.index, s.mounts[0], LidarSpec{}), mount_frame(s.mounts[0]), w));
  }
  const PointCloud out = selective_fusion(clouds, s.frames, 0, w);
  const PointCloud base = strip_vehicle_points(clouds[0]);
  CHECK(out.points.size() > base.points.size());
  for (std::size_t i = base.points.size(); i < out.points.size(); ++i) {
    const auto & p = out.points[i];
    CHECK(p.is_static());
    bool inside = false;
    for (const auto & v : s.frames[0].vehicles) {
      inside = inside || v.box.contains_bev(p.p.x, p.p.y);
    }
    CHECK(inside);
  }
  CHECK_THROWS_AS(selective_fusion(clouds, s.frames, 99, w), ParameterError);
}

TEST_CASE("RLPC files round-trip and reject bad input")
{
  const Scenario s = fixture::small_scene(2);
  const PointCloud c = cast_frame(s, 0, s.mounts[0], LidarSpec{});
  const auto dir = fixture::scratch("rlpc");
  write_point_cloud(c, dir / "c.rlpc");
  const PointCloud back = read_point_cloud(dir / "c.rlpc", c.frame_name);
  REQUIRE(back.points.size() == c.points.size());
  CHECK(back.frame_id == c.frame_id);
  CHECK(back.frame_name == c.frame_name);
  // Coordinates are stored as f32.
  for (std::size_t i = 0; i < c.points.size(); ++i) {
    CHECK(back.points[i].label == c.points[i].label);
    CHECK((back.points[i].p - c.points[i].p).norm() <= 1e-6 * (1.0 + c.points[i].p.norm()));
  }
  // Once quantized, a second round trip is exact.
  write_point_cloud(back, dir / "again.rlpc");
  CHECK(read_point_cloud(dir / "again.rlpc", c.frame_name) == back);

  {
    std::ofstream bad(dir / "bad.rlpc", std::ios::binary);
    bad << "XXXXnonsense";
  }
  CHECK_THROWS_AS(read_point_cloud(dir / "bad.rlpc", "ego"), ParseError);
  {
    std::ifstream in(dir / "c.rlpc", std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    std::ofstream cut(dir / "cut.rlpc", std::ios::binary);
    cut << bytes.substr(0, bytes.size() - 5);
    bytes[4] = 9;
    std::ofstream ver(dir / "ver.rlpc", std::ios::binary);
    ver << bytes;
  }
  CHECK_THROWS_AS(read_point_cloud(dir / "cut.rlpc", "ego"), ParseError);
  CHECK_THROWS_AS(read_point_cloud(dir / "ver.rlpc", "ego"), VersionError);
  CHECK_THROWS_AS(read_point_cloud(dir / "missing.rlpc", "ego"), IoError);
}

TEST_CASE("cast cache matches direct casting and is order independent")
{
  const Scenario s = fixture::small_scene(10, 4, 3);
  const CastCache cache(s, LidarSpec{});
  const std::vector<int> frames{0, 2};
  const std::vector<int> mounts{0, 1, 2, 3};
  cache.warm(frames, mounts);
  CHECK(cache.get(2, 3) == cast_frame(s, 2, s.mounts[3], LidarSpec{}));
  CHECK(cache.get(1, 1) == cast_frame(s, 1, s.mounts[1], LidarSpec{}));
}

TEST_CASE("range noise is seeded")
{
  const Scenario s = fixture::small_scene(2, 2, 1);
  LidarSpec spec;
  spec.noise_sigma = 0.05;
  spec.noise_seed = 4;
  const PointCloud a = cast_frame(s, 0, s.mounts[0], spec);
  const PointCloud b = cast_frame(s, 0, s.mounts[0], spec);
  CHECK(a == b);
  CHECK(a != cast_frame(s, 0, s.mounts[0], LidarSpec{}));
}
