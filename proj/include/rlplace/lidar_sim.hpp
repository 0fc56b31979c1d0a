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

#ifndef RLPLACE__LIDAR_SIM_HPP_
#define RLPLACE__LIDAR_SIM_HPP_

#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rlplace/geometry.hpp"
#include "rlplace/scene.hpp"

namespace rlplace
{

struct LidarSpec
{
  int channels = 32;
  double vertical_fov_min_deg = -30.0;
  double vertical_fov_max_deg = 10.0;
  double azimuth_step_deg = 0.45;
  double max_range = 100.0;
  // Optional seeded Gaussian range noise; 0 disables it.
  double noise_sigma = 0.0;
  std::uint64_t noise_seed = 0;

  int azimuth_count() const;
  std::size_t rays_per_frame() const;
  // Throws ParameterError on an inconsistent spec.
  void validate() const;
};

inline constexpr int kStaticLabel = -1;

struct LabeledPoint
{
  Vec3 p;
  int label = kStaticLabel;  // kStaticLabel or the vehicle id

  bool is_static() const { return label == kStaticLabel; }
  friend bool operator==(const LabeledPoint &, const LabeledPoint &) = default;
};

struct PointCloud
{
  std::int64_t frame_id = 0;
  std::string frame_name;  // "world", "ego" or "mount:<id>"
  std::vector<LabeledPoint> points;

  friend bool operator==(const PointCloud &, const PointCloud &) = default;
};

// A named coordinate frame and its pose in the scene frame.
struct CoordinateFrame
{
  std::string name;
  Pose pose;
};

CoordinateFrame world_frame();
CoordinateFrame mount_frame(const CandidateMount & m);
CoordinateFrame ego_frame(const CandidateMount & m);
std::string mount_frame_name(int mount_id);

// Crop volume: |x - cx| <= l/2, |y - cy| <= w/2, 0 <= z - cz <= h.
struct RangeBox
{
  double l = 140.0;
  double w = 40.0;
  double h = 4.0;
  Vec3 center;
};

// Primitive 0 is the ground plane z = 0; primitive k >= 1 is boxes[k - 1].
struct SceneGeometry
{
  std::vector<OrientedBox> boxes;
  std::vector<int> labels;  // per box: kStaticLabel or vehicle id

  std::size_t primitive_count() const { return boxes.size() + 1; }
  int label_of(int primitive) const
  {
    return primitive == 0 ? kStaticLabel : labels[static_cast<std::size_t>(primitive - 1)];
  }
};

// Occluders first (in scenario order), then the frame's vehicles.
SceneGeometry build_geometry(const Scenario & scenario, int frame_index);

struct RayHit
{
  int primitive = -1;
  double distance = 0.0;
};

// Nearest hit in (0, max_range]; ties go to the lower primitive index.
std::optional<RayHit> cast_ray(
  const SceneGeometry & geometry, const Vec3 & origin, const Vec3 & dir, double max_range);

// Unit ray directions in the sensor frame, channel-major.
std::vector<Vec3> beam_directions(const LidarSpec & spec);

// Points are expressed in the mount frame ("mount:<id>").
PointCloud cast_frame(
  const Scenario & scenario, int frame_index, const CandidateMount & mount, const LidarSpec & spec);

// Throws FrameError when cloud.frame_name != from.name.
PointCloud transform_cloud(
  const PointCloud & cloud, const CoordinateFrame & from, const CoordinateFrame & to);

// Multiset union. Throws ParameterError on empty input, FrameError on mixed frames.
PointCloud fuse_clouds(std::span<const PointCloud> clouds);

PointCloud strip_vehicle_points(const PointCloud & cloud);

PointCloud crop_to_range(const PointCloud & cloud, const RangeBox & box);

// Builds a vehicle-free cloud for frames[target] by taking its static points
// and filling each of its vehicle footprints with static points from the
// other frames. All clouds must share one coordinate frame, given by `frame`,
// and clouds[k] must belong to frames[k].
PointCloud selective_fusion(
  std::span<const PointCloud> clouds, std::span<const TrafficFrame> frames, std::size_t target,
  const CoordinateFrame & frame);

// Binary "RLPC" file: little-endian header {magic, u32 version, u64 count,
// u64 frame_id} then count x (f32 x, f32 y, f32 z, i32 label).
void write_point_cloud(const PointCloud & cloud, const std::filesystem::path & path);
PointCloud read_point_cloud(const std::filesystem::path & path, const std::string & frame_name);
void write_point_cloud_csv(const PointCloud & cloud, const std::filesystem::path & path);

inline constexpr std::uint32_t kPointCloudVersion = 1;

// Memoizes mount-frame casts for one scenario and spec. Safe for concurrent
// readers; each (frame, mount) slot is computed at most once.
class CastCache
{
public:
  CastCache(const Scenario & scenario, LidarSpec spec);

  const Scenario & scenario() const { return scenario_; }
  const LidarSpec & spec() const { return spec_; }
  const PointCloud & get(int frame_index, int mount_id) const;
  // Casts all listed (frame, mount) pairs, in parallel when allowed.
  void warm(std::span<const int> frames, std::span<const int> mounts) const;

private:
  struct Slot
  {
    std::once_flag once;
    PointCloud cloud;
  };

  const Scenario & scenario_;
  LidarSpec spec_;
  std::unique_ptr<Slot[]> slots_;
};

// Placement clouds projected into the first mount's frame ("ego") and fused.
// Throws ParameterError on an empty placement.
PointCloud fused_ego_cloud(const CastCache & cache, int frame_index, std::span<const int> placement);

}  // namespace rlplace

#endif  // RLPLACE__LIDAR_SIM_HPP_
