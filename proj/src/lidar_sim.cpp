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

#include "rlplace/lidar_sim.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <iterator>
#include <limits>
#include <numbers>

#include <fmt/format.h>

#include "rlplace/errors.hpp"
#include "rlplace/parallel.hpp"
#include "rlplace/random.hpp"

namespace rlplace
{

int LidarSpec::azimuth_count() const
{
  return static_cast<int>(std::lround(360.0 / azimuth_step_deg));
}

std::size_t LidarSpec::rays_per_frame() const
{
  return static_cast<std::size_t>(channels) * static_cast<std::size_t>(azimuth_count());
}

void LidarSpec::validate() const
{
  if (channels <= 0) {
    throw ParameterError("lidar channels must be positive");
  }
  if (!(vertical_fov_min_deg < vertical_fov_max_deg)) {
    throw ParameterError("lidar vertical fov must satisfy min < max");
  }
  if (!(azimuth_step_deg > 0.0) || azimuth_count() < 1) {
    throw ParameterError("lidar azimuth step must be positive");
  }
  if (!(max_range > 0.0)) {
    throw ParameterError("lidar max range must be positive");
  }
  if (!(noise_sigma >= 0.0)) {
    throw ParameterError("lidar noise sigma must be non-negative");
  }
}

std::string mount_frame_name(int mount_id) { return "mount:" + std::to_string(mount_id); }

CoordinateFrame world_frame() { return {"world", Pose{}}; }

CoordinateFrame mount_frame(const CandidateMount & m) { return {mount_frame_name(m.id), m.pose}; }

CoordinateFrame ego_frame(const CandidateMount & m) { return {"ego", m.pose}; }

SceneGeometry build_geometry(const Scenario & scenario, int frame_index)
{
  const TrafficFrame & frame = scenario.frame(frame_index);
  SceneGeometry g;
  g.boxes.reserve(scenario.occluders.size() + frame.vehicles.size());
  for (const auto & b : scenario.occluders) {
    g.boxes.push_back(b);
    g.labels.push_back(kStaticLabel);
  }
  for (const auto & v : frame.vehicles) {
    g.boxes.push_back(v.box);
    g.labels.push_back(v.vehicle_id);
  }
  return g;
}

std::optional<RayHit> cast_ray(
  const SceneGeometry & geometry, const Vec3 & origin, const Vec3 & dir, double max_range)
{
  RayHit best{-1, std::numeric_limits<double>::infinity()};
  if (dir.z < 0.0 && origin.z > 0.0) {
    const double t = -origin.z / dir.z;
    if (t > 0.0 && t <= max_range) {
      best = {0, t};
    }
  }
  for (std::size_t k = 0; k < geometry.boxes.size(); ++k) {
    const OrientedBox & box = geometry.boxes[k];
    // Bounding-sphere rejection before the slab test.
    const Vec3 oc = box.center - origin;
    const double along = oc.dot(dir);
    const double radius = box.half_extents.norm();
    if (along + radius < 0.0 || along - radius > std::min(best.distance, max_range)) {
      continue;
    }
    const double perp2 = oc.dot(oc) - along * along;
    if (perp2 > radius * radius) {
      continue;
    }
    const double t = ray_box_entry(origin, dir, box);
    if (t > 0.0 && t <= max_range && t < best.distance) {
      best = {static_cast<int>(k) + 1, t};
    }
  }
  if (best.primitive < 0) {
    return std::nullopt;
  }
  return best;
}

std::vector<Vec3> beam_directions(const LidarSpec & spec)
{
  spec.validate();
  const int n_az = spec.azimuth_count();
  std::vector<Vec3> dirs;
  dirs.reserve(spec.rays_per_frame());
  constexpr double deg = std::numbers::pi / 180.0;
  for (int c = 0; c < spec.channels; ++c) {
    const double elev_deg = spec.channels == 1 ?
      0.5 * (spec.vertical_fov_min_deg + spec.vertical_fov_max_deg) :
      spec.vertical_fov_min_deg +
      c * (spec.vertical_fov_max_deg - spec.vertical_fov_min_deg) / (spec.channels - 1);
    const double ce = std::cos(elev_deg * deg);
    const double se = std::sin(elev_deg * deg);
    for (int k = 0; k < n_az; ++k) {
      const double az = k * spec.azimuth_step_deg * deg;
      dirs.push_back({ce * std::cos(az), ce * std::sin(az), se});
    }
  }
  return dirs;
}

PointCloud cast_frame(
  const Scenario & scenario, int frame_index, const CandidateMount & mount, const LidarSpec & spec)
{
  const SceneGeometry geometry = build_geometry(scenario, frame_index);
  const std::vector<Vec3> local_dirs = beam_directions(spec);

  PointCloud cloud;
  cloud.frame_id = frame_index;
  cloud.frame_name = mount_frame_name(mount.id);
  cloud.points.reserve(local_dirs.size());

  std::optional<Rng> noise;
  if (spec.noise_sigma > 0.0) {
    noise.emplace(hash_combine(hash_combine(spec.noise_seed, static_cast<std::uint64_t>(frame_index)),
      static_cast<std::uint64_t>(mount.id)));
  }

  const Vec3 & origin = mount.pose.position;
  for (const Vec3 & local : local_dirs) {
    const Vec3 dir = rotate_z(local, mount.pose.yaw);
    const auto hit = cast_ray(geometry, origin, dir, spec.max_range);
    if (!hit) {
      continue;
    }
    double range = hit->distance;
    if (noise) {
      range += noise->normal(0.0, spec.noise_sigma);
      if (!(range > 0.0) || range > spec.max_range) {
        continue;
      }
    }
    cloud.points.push_back({local * range, geometry.label_of(hit->primitive)});
  }
  return cloud;
}

PointCloud transform_cloud(
  const PointCloud & cloud, const CoordinateFrame & from, const CoordinateFrame & to)
{
  if (cloud.frame_name != from.name) {
    throw FrameError("cloud is in frame '" + cloud.frame_name + "', expected '" + from.name + "'");
  }
  const double delta = from.pose.yaw - to.pose.yaw;
  const double c = std::cos(delta);
  const double s = std::sin(delta);
  const Vec3 shift = rotate_z(from.pose.position - to.pose.position, -to.pose.yaw);

  PointCloud out;
  out.frame_id = cloud.frame_id;
  out.frame_name = to.name;
  out.points.reserve(cloud.points.size());
  for (const auto & pt : cloud.points) {
    const Vec3 & p = pt.p;
    out.points.push_back({{c * p.x - s * p.y + shift.x, s * p.x + c * p.y + shift.y, p.z + shift.z},
        pt.label});
  }
  return out;
}

PointCloud fuse_clouds(std::span<const PointCloud> clouds)
{
  if (clouds.empty()) {
    throw ParameterError("fuse_clouds needs at least one cloud");
  }
  PointCloud out;
  out.frame_id = clouds.front().frame_id;
  out.frame_name = clouds.front().frame_name;
  std::size_t total = 0;
  for (const auto & c : clouds) {
    if (c.frame_name != out.frame_name || c.frame_id != out.frame_id) {
      throw FrameError("cannot fuse clouds from different frames");
    }
    total += c.points.size();
  }
  out.points.reserve(total);
  for (const auto & c : clouds) {
    out.points.insert(out.points.end(), c.points.begin(), c.points.end());
  }
  return out;
}

PointCloud strip_vehicle_points(const PointCloud & cloud)
{
  PointCloud out;
  out.frame_id = cloud.frame_id;
  out.frame_name = cloud.frame_name;
  out.points.reserve(cloud.points.size());
  std::copy_if(cloud.points.begin(), cloud.points.end(), std::back_inserter(out.points),
    [](const LabeledPoint & p) { return p.is_static(); });
  return out;
}

PointCloud crop_to_range(const PointCloud & cloud, const RangeBox & box)
{
  PointCloud out;
  out.frame_id = cloud.frame_id;
  out.frame_name = cloud.frame_name;
  std::copy_if(cloud.points.begin(), cloud.points.end(), std::back_inserter(out.points),
    [&](const LabeledPoint & pt) {
      const double dz = pt.p.z - box.center.z;
      return std::abs(pt.p.x - box.center.x) <= 0.5 * box.l &&
             std::abs(pt.p.y - box.center.y) <= 0.5 * box.w && dz >= 0.0 && dz <= box.h;
    });
  return out;
}

PointCloud selective_fusion(
  std::span<const PointCloud> clouds, std::span<const TrafficFrame> frames, std::size_t target,
  const CoordinateFrame & frame)
{
  if (clouds.empty() || clouds.size() != frames.size() || target >= clouds.size()) {
    throw ParameterError("selective_fusion needs one cloud per frame and a valid target");
  }
  for (const auto & c : clouds) {
    if (c.frame_name != frame.name) {
      throw FrameError("selective_fusion: cloud in frame '" + c.frame_name + "'");
    }
  }

  PointCloud out = strip_vehicle_points(clouds[target]);
  const auto & footprints = frames[target].vehicles;
  if (footprints.empty()) {
    return out;
  }
  const double c = std::cos(frame.pose.yaw);
  const double s = std::sin(frame.pose.yaw);
  for (std::size_t k = 0; k < clouds.size(); ++k) {
    if (k == target) {
      continue;
    }
    for (const auto & pt : clouds[k].points) {
      if (!pt.is_static()) {
        continue;
      }
      const double wx = c * pt.p.x - s * pt.p.y + frame.pose.position.x;
      const double wy = s * pt.p.x + c * pt.p.y + frame.pose.position.y;
      const bool inside = std::any_of(footprints.begin(), footprints.end(),
          [&](const VehicleBox & v) { return v.box.contains_bev(wx, wy); });
      if (inside) {
        out.points.push_back(pt);
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// File formats

namespace
{

constexpr char kMagic[4] = {'R', 'L', 'P', 'C'};

template<typename T>
void put_le(std::ostream & out, T value)
{
  using U = std::make_unsigned_t<T>;
  auto bits = static_cast<U>(value);
  char bytes[sizeof(T)];
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    bytes[i] = static_cast<char>((bits >> (8 * i)) & 0xff);
  }
  out.write(bytes, sizeof(T));
}

template<typename T>
T get_le(std::istream & in)
{
  using U = std::make_unsigned_t<T>;
  unsigned char bytes[sizeof(T)];
  in.read(reinterpret_cast<char *>(bytes), sizeof(T));
  if (!in) {
    throw ParseError("point cloud file truncated");
  }
  U bits = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    bits |= static_cast<U>(bytes[i]) << (8 * i);
  }
  return static_cast<T>(bits);
}

}  // namespace

void write_point_cloud(const PointCloud & cloud, const std::filesystem::path & path)
{
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw IoError("cannot open " + path.string() + " for writing");
  }
  out.write(kMagic, 4);
  put_le<std::uint32_t>(out, kPointCloudVersion);
  put_le<std::uint64_t>(out, cloud.points.size());
  put_le<std::uint64_t>(out, static_cast<std::uint64_t>(cloud.frame_id));
  for (const auto & pt : cloud.points) {
    put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(static_cast<float>(pt.p.x)));
    put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(static_cast<float>(pt.p.y)));
    put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(static_cast<float>(pt.p.z)));
    put_le<std::int32_t>(out, pt.label);
  }
  if (!out) {
    throw IoError("write failed for " + path.string());
  }
}

PointCloud read_point_cloud(const std::filesystem::path & path, const std::string & frame_name)
{
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError("cannot open " + path.string());
  }
  char magic[4];
  in.read(magic, 4);
  if (!in || !std::equal(magic, magic + 4, kMagic)) {
    throw ParseError("not an RLPC point cloud: " + path.string());
  }
  const auto version = get_le<std::uint32_t>(in);
  if (version != kPointCloudVersion) {
    throw VersionError("unsupported point cloud version " + std::to_string(version));
  }
  const auto count = get_le<std::uint64_t>(in);
  PointCloud cloud;
  cloud.frame_id = static_cast<std::int64_t>(get_le<std::uint64_t>(in));
  cloud.frame_name = frame_name;
  for (std::uint64_t i = 0; i < count; ++i) {
    LabeledPoint pt;
    pt.p.x = std::bit_cast<float>(get_le<std::uint32_t>(in));
    pt.p.y = std::bit_cast<float>(get_le<std::uint32_t>(in));
    pt.p.z = std::bit_cast<float>(get_le<std::uint32_t>(in));
    pt.label = get_le<std::int32_t>(in);
    cloud.points.push_back(pt);
  }
  return cloud;
}

void write_point_cloud_csv(const PointCloud & cloud, const std::filesystem::path & path)
{
  std::ofstream out(path, std::ios::trunc);
  if (!out) {
    throw IoError("cannot open " + path.string() + " for writing");
  }
  out << "x,y,z,label\n";
  for (const auto & pt : cloud.points) {
    out << fmt::format("{},{},{},{}\n", static_cast<float>(pt.p.x), static_cast<float>(pt.p.y),
      static_cast<float>(pt.p.z), pt.label);
  }
  if (!out) {
    throw IoError("write failed for " + path.string());
  }
}

// ---------------------------------------------------------------------------

CastCache::CastCache(const Scenario & scenario, LidarSpec spec)
: scenario_(scenario), spec_(spec),
  slots_(std::make_unique<Slot[]>(scenario.frames.size() * scenario.mounts.size()))
{
  spec_.validate();
}

const PointCloud & CastCache::get(int frame_index, int mount_id) const
{
  const CandidateMount & m = scenario_.mount(mount_id);
  scenario_.frame(frame_index);
  Slot & slot = slots_[static_cast<std::size_t>(frame_index) * scenario_.mounts.size() +
    static_cast<std::size_t>(mount_id)];
  std::call_once(slot.once, [&]() { slot.cloud = cast_frame(scenario_, frame_index, m, spec_); });
  return slot.cloud;
}

PointCloud fused_ego_cloud(const CastCache & cache, int frame_index, std::span<const int> placement)
{
  if (placement.empty()) {
    throw ParameterError("placement must be non-empty");
  }
  const Scenario & s = cache.scenario();
  const CoordinateFrame ego = ego_frame(s.mount(placement.front()));
  std::vector<PointCloud> projected;
  projected.reserve(placement.size());
  for (int id : placement) {
    const CandidateMount & m = s.mount(id);
    projected.push_back(transform_cloud(cache.get(frame_index, id), mount_frame(m), ego));
  }
  return fuse_clouds(projected);
}

void CastCache::warm(std::span<const int> frames, std::span<const int> mounts) const
{
  parallel_for(frames.size() * mounts.size(), [&](std::size_t i) {
      get(frames[i / mounts.size()], mounts[i % mounts.size()]);
    });
}

}  // namespace rlplace
