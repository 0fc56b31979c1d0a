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

#ifndef RLPLACE__SCENE_HPP_
#define RLPLACE__SCENE_HPP_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "rlplace/geometry.hpp"

namespace rlplace
{

struct Extent
{
  double x_min = -80.0;
  double x_max = 80.0;
  double y_min = -80.0;
  double y_max = 80.0;

  friend bool operator==(const Extent &, const Extent &) = default;
  bool degenerate() const { return !(x_max > x_min) || !(y_max > y_min); }
  double width() const { return x_max - x_min; }
  double height() const { return y_max - y_min; }
};

struct CellIndex
{
  int row = 0;  // i, along y
  int col = 0;  // j, along x
  friend bool operator==(const CellIndex &, const CellIndex &) = default;
};

// Cell (i, j) covers [x0 + j*cell, x0 + (j+1)*cell) x [y0 + i*cell, y0 + (i+1)*cell).
struct GridSpec
{
  double x0 = 0.0;
  double y0 = 0.0;
  double cell_size = 1.0;
  int height = 0;  // H, rows
  int width = 0;  // W, columns

  friend bool operator==(const GridSpec &, const GridSpec &) = default;

  std::size_t cell_count() const
  {
    return static_cast<std::size_t>(height) * static_cast<std::size_t>(width);
  }
  std::size_t flat(int row, int col) const
  {
    return static_cast<std::size_t>(row) * static_cast<std::size_t>(width) +
           static_cast<std::size_t>(col);
  }
  // std::nullopt is the out-of-grid sentinel.
  std::optional<CellIndex> world_to_cell(double x, double y) const;
  Vec2 cell_center(int row, int col) const;
  bool covers(const Extent & e) const;
};

GridSpec build_roi_grid(const Extent & extent, double cell_size);

struct CandidateMount
{
  int id = 0;
  Pose pose;  // position.z is the mast height

  friend bool operator==(const CandidateMount &, const CandidateMount &) = default;
};

struct VehicleBox
{
  int vehicle_id = 0;
  OrientedBox box;

  friend bool operator==(const VehicleBox &, const VehicleBox &) = default;
};

struct TrafficFrame
{
  int index = 0;
  std::vector<VehicleBox> vehicles;

  friend bool operator==(const TrafficFrame &, const TrafficFrame &) = default;
};

struct Scenario
{
  std::uint64_t seed = 0;
  Extent extent;
  std::vector<OrientedBox> occluders;
  std::vector<CandidateMount> mounts;
  std::vector<TrafficFrame> frames;
  GridSpec grid;

  friend bool operator==(const Scenario &, const Scenario &) = default;

  const CandidateMount & mount(int id) const;
  const TrafficFrame & frame(int index) const;
};

struct SceneParams
{
  int n_mounts = 15;
  int n_vehicles = 20;
  int n_frames = 20;
  Extent extent;
  int occluder_count = 6;

  double mast_height = 5.0;
  double cell_size = 2.0;
  // Mounts sit on a square ring of this half-size around the scene center,
  // clamped to fit inside the extent.
  double mount_ring = 40.0;
  double lane_offset = 1.75;
  // Lanes and sidewalks are kept clear of occluders out to this distance
  // from each road centerline.
  double road_clearance = 10.0;
  double frame_interval = 0.5;  // seconds between recorded frames
  double speed_min = 6.0;
  double speed_max = 12.0;
};

// Deterministic function of (seed, params). Throws ParameterError.
Scenario generate_scene(std::uint64_t seed, const SceneParams & params);

// Checks every type invariant. Throws ValidationError.
void validate_scenario(const Scenario & s);

std::string scenario_to_json(const Scenario & s);
// Throws ParseError, VersionError, ValidationError.
Scenario scenario_from_json(const std::string & text);

// Throws IoError.
void save_scenario(const Scenario & s, const std::filesystem::path & path);
Scenario load_scenario(const std::filesystem::path & path);

inline constexpr int kScenarioVersion = 1;

}  // namespace rlplace

#endif  // RLPLACE__SCENE_HPP_
