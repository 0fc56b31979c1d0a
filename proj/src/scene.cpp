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

#include "rlplace/scene.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

#include "json.hpp"

#include "rlplace/errors.hpp"
#include "rlplace/random.hpp"

namespace rlplace
{

using nlohmann::json;

std::optional<CellIndex> GridSpec::world_to_cell(double x, double y) const
{
  if (!std::isfinite(x) || !std::isfinite(y)) {
    return std::nullopt;
  }
  const double fx = std::floor((x - x0) / cell_size);
  const double fy = std::floor((y - y0) / cell_size);
  if (fx < 0.0 || fy < 0.0 || fx >= width || fy >= height) {
    return std::nullopt;
  }
  return CellIndex{static_cast<int>(fy), static_cast<int>(fx)};
}

Vec2 GridSpec::cell_center(int row, int col) const
{
  return {x0 + (col + 0.5) * cell_size, y0 + (row + 0.5) * cell_size};
}

bool GridSpec::covers(const Extent & e) const
{
  return x0 <= e.x_min && y0 <= e.y_min && x0 + width * cell_size >= e.x_max &&
         y0 + height * cell_size >= e.y_max;
}

GridSpec build_roi_grid(const Extent & extent, double cell_size)
{
  if (!(cell_size > 0.0) || !std::isfinite(cell_size)) {
    throw ParameterError("cell_size must be positive");
  }
  if (extent.degenerate()) {
    throw ParameterError("extent is degenerate");
  }
  GridSpec g;
  g.x0 = extent.x_min;
  g.y0 = extent.y_min;
  g.cell_size = cell_size;
  g.height = static_cast<int>(std::ceil(extent.height() / cell_size));
  g.width = static_cast<int>(std::ceil(extent.width() / cell_size));
  return g;
}

const CandidateMount & Scenario::mount(int id) const
{
  for (const auto & m : mounts) {
    if (m.id == id) {
      return m;
    }
  }
  throw ParameterError("unknown mount id " + std::to_string(id));
}

const TrafficFrame & Scenario::frame(int index) const
{
  if (index < 0 || index >= static_cast<int>(frames.size())) {
    throw ParameterError("frame index " + std::to_string(index) + " out of range");
  }
  return frames[static_cast<std::size_t>(index)];
}

// ---------------------------------------------------------------------------
// Procedural generation

namespace
{

// Arc-length parametrized polyline.
class LanePath
{
public:
  explicit LanePath(std::vector<Vec2> pts) : pts_(std::move(pts))
  {
    cum_.push_back(0.0);
    for (std::size_t i = 1; i < pts_.size(); ++i) {
      cum_.push_back(cum_.back() + std::hypot(pts_[i].x - pts_[i - 1].x, pts_[i].y - pts_[i - 1].y));
    }
  }

  double length() const { return cum_.back(); }

  // Position and heading at arc length s in [0, length()).
  std::pair<Vec2, double> at(double s) const
  {
    auto it = std::upper_bound(cum_.begin(), cum_.end(), s);
    std::size_t seg = static_cast<std::size_t>(std::distance(cum_.begin(), it));
    seg = std::clamp<std::size_t>(seg, 1, pts_.size() - 1);
    const Vec2 & a = pts_[seg - 1];
    const Vec2 & b = pts_[seg];
    const double len = cum_[seg] - cum_[seg - 1];
    const double t = len > 0.0 ? (s - cum_[seg - 1]) / len : 0.0;
    return {{a.x + t * (b.x - a.x), a.y + t * (b.y - a.y)}, std::atan2(b.y - a.y, b.x - a.x)};
  }

private:
  std::vector<Vec2> pts_;
  std::vector<double> cum_;
};

enum class Maneuver { kStraight, kLeft, kRight };

constexpr double kVehicleMargin = 3.5;
constexpr double kFilletReach = 6.0;
constexpr int kFilletSegments = 8;

LanePath make_path(const Extent & extent, int arm, Maneuver maneuver, double lane_offset)
{
  const Vec2 c{0.5 * (extent.x_min + extent.x_max), 0.5 * (extent.y_min + extent.y_max)};
  const Vec2 dirs[4] = {{1, 0}, {0, 1}, {-1, 0}, {0, -1}};
  const Vec2 d = dirs[arm];
  const Vec2 r{d.y, -d.x};
  auto reach = [&](const Vec2 & axis) {
    return (axis.x != 0.0 ? 0.5 * extent.width() : 0.5 * extent.height()) - kVehicleMargin;
  };
  auto at = [&](double along_d, double along_r) {
    return Vec2{c.x + d.x * along_d + r.x * along_r, c.y + d.y * along_d + r.y * along_r};
  };

  std::vector<Vec2> pts;
  pts.push_back(at(-reach(d), lane_offset));
  if (maneuver == Maneuver::kStraight) {
    pts.push_back(at(reach(d), lane_offset));
    return LanePath(std::move(pts));
  }

  // Corner where the entry lane meets the exit lane, and the exit end.
  const bool right = maneuver == Maneuver::kRight;
  const double corner_d = right ? -lane_offset : lane_offset;
  const Vec2 corner = at(corner_d, lane_offset);
  const Vec2 out_dir = right ? r : Vec2{-r.x, -r.y};
  const Vec2 exit_end = right ? at(-lane_offset, reach(r)) : at(lane_offset, -reach(r));

  const Vec2 p0{corner.x - d.x * kFilletReach, corner.y - d.y * kFilletReach};
  const Vec2 p2{corner.x + out_dir.x * kFilletReach, corner.y + out_dir.y * kFilletReach};
  for (int k = 0; k <= kFilletSegments; ++k) {
    const double t = static_cast<double>(k) / kFilletSegments;
    const double a = (1 - t) * (1 - t);
    const double b = 2 * (1 - t) * t;
    const double e = t * t;
    pts.push_back({a * p0.x + b * corner.x + e * p2.x, a * p0.y + b * corner.y + e * p2.y});
  }
  pts.push_back(exit_end);
  return LanePath(std::move(pts));
}

Vec2 ring_point(double t, double half)
{
  // Counter-clockwise around the square starting at (+half, -half).
  const double side = 2.0 * half;
  if (t < side) {
    return {half, -half + t};
  }
  t -= side;
  if (t < side) {
    return {half - t, half};
  }
  t -= side;
  if (t < side) {
    return {-half, half - t};
  }
  t -= side;
  return {-half + t, -half};
}

void check_params(const SceneParams & p)
{
  if (p.n_mounts < 1) {
    throw ParameterError("n_mounts must be >= 1");
  }
  if (p.n_frames < 1) {
    throw ParameterError("n_frames must be >= 1");
  }
  if (p.n_vehicles < 0 || p.occluder_count < 0) {
    throw ParameterError("counts must be non-negative");
  }
  if (p.extent.degenerate()) {
    throw ParameterError("extent is degenerate");
  }
  const double min_half = 0.5 * std::min(p.extent.width(), p.extent.height());
  if (min_half < p.road_clearance + 2.0 * kFilletReach) {
    throw ParameterError("extent too small for an intersection");
  }
  if (!(p.mast_height > 0.0) || !(p.cell_size > 0.0) || !(p.frame_interval > 0.0)) {
    throw ParameterError("mast_height, cell_size and frame_interval must be positive");
  }
  if (!(p.speed_min > 0.0) || p.speed_max < p.speed_min) {
    throw ParameterError("invalid speed range");
  }
}

}  // namespace

Scenario generate_scene(std::uint64_t seed, const SceneParams & params)
{
  check_params(params);
  Rng rng(seed);

  Scenario s;
  s.seed = seed;
  s.extent = params.extent;
  s.grid = build_roi_grid(params.extent, params.cell_size);

  const double cx = 0.5 * (params.extent.x_min + params.extent.x_max);
  const double cy = 0.5 * (params.extent.y_min + params.extent.y_max);
  const double half_w = 0.5 * params.extent.width();
  const double half_h = 0.5 * params.extent.height();

  // Mounts, uniformly spaced on the ring with a seeded phase. Ring points on
  // a carriageway are pushed to the kerb.
  const double ring = std::min({params.mount_ring, half_w - 1.0, half_h - 1.0});
  const double spacing = 8.0 * ring / params.n_mounts;
  const double phase = rng.uniform() * spacing;
  const double kerb = 2.0 * params.lane_offset + 1.5;
  for (int k = 0; k < params.n_mounts; ++k) {
    Vec2 p = ring_point(std::fmod(phase + k * spacing, 8.0 * ring), ring);
    if (std::abs(p.y) < kerb && std::abs(p.x) >= ring - 1e-9) {
      p.y = p.y < 0.0 ? -kerb : kerb;
    }
    if (std::abs(p.x) < kerb && std::abs(p.y) >= ring - 1e-9) {
      p.x = p.x < 0.0 ? -kerb : kerb;
    }
    CandidateMount m;
    m.id = k;
    m.pose.position = {cx + p.x, cy + p.y, params.mast_height};
    m.pose.yaw = normalize_angle(std::atan2(-p.y, -p.x));
    s.mounts.push_back(m);
  }

  // Buildings in the four corner blocks, clear of lanes and mounts.
  for (int k = 0; k < params.occluder_count; ++k) {
    const int quadrant = k % 4;
    const double sx = (quadrant == 0 || quadrant == 3) ? 1.0 : -1.0;
    const double sy = quadrant < 2 ? 1.0 : -1.0;
    bool placed = false;
    for (int attempt = 0; attempt < 200 && !placed; ++attempt) {
      OrientedBox b;
      b.half_extents = {rng.uniform(3.0, 9.0), rng.uniform(3.0, 9.0), rng.uniform(2.0, 8.0)};
      b.yaw = normalize_angle(rng.uniform(-std::numbers::pi, std::numbers::pi));
      const double radius = std::hypot(b.half_extents.x, b.half_extents.y);
      const double lo = params.road_clearance + radius;
      const double hi_x = half_w - radius;
      const double hi_y = half_h - radius;
      if (hi_x <= lo || hi_y <= lo) {
        continue;
      }
      b.center = {cx + sx * rng.uniform(lo, hi_x), cy + sy * rng.uniform(lo, hi_y), b.half_extents.z};
      const bool hits_mount = std::any_of(s.mounts.begin(), s.mounts.end(), [&](const CandidateMount & m) {
          return b.contains_bev(m.pose.position.x, m.pose.position.y, 1.0);
        });
      if (!hits_mount) {
        s.occluders.push_back(b);
        placed = true;
      }
    }
    if (!placed) {
      throw ParameterError("could not place occluder " + std::to_string(k));
    }
  }

  // Vehicles: one lane path each, constant speed, per-vehicle spawn phase.
  struct Track
  {
    LanePath path;
    double speed;
    double phase;
    Vec3 half;
  };
  std::vector<Track> tracks;
  tracks.reserve(static_cast<std::size_t>(params.n_vehicles));
  for (int v = 0; v < params.n_vehicles; ++v) {
    const int arm = static_cast<int>(rng.below(4));
    const std::uint64_t roll = rng.below(10);
    const Maneuver man = roll < 6 ? Maneuver::kStraight : (roll < 8 ? Maneuver::kLeft : Maneuver::kRight);
    LanePath path = make_path(params.extent, arm, man, params.lane_offset);
    const double speed = rng.uniform(params.speed_min, params.speed_max);
    const double start = rng.uniform() * path.length();
    const Vec3 half{rng.uniform(2.0, 2.5), rng.uniform(0.9, 1.05), rng.uniform(0.7, 0.9)};
    tracks.push_back({std::move(path), speed, start, half});
  }

  for (int f = 0; f < params.n_frames; ++f) {
    TrafficFrame frame;
    frame.index = f;
    for (int v = 0; v < params.n_vehicles; ++v) {
      const Track & t = tracks[static_cast<std::size_t>(v)];
      const double s_along = std::fmod(t.phase + t.speed * params.frame_interval * f, t.path.length());
      const auto [pos, heading] = t.path.at(s_along);
      VehicleBox vb;
      vb.vehicle_id = v;
      vb.box.center = {pos.x, pos.y, t.half.z};
      vb.box.half_extents = t.half;
      vb.box.yaw = normalize_angle(heading);
      frame.vehicles.push_back(vb);
    }
    s.frames.push_back(std::move(frame));
  }

  validate_scenario(s);
  return s;
}

// ---------------------------------------------------------------------------
// Validation

namespace
{

bool yaw_normalized(double yaw)
{
  return std::isfinite(yaw) && yaw >= -std::numbers::pi && yaw < std::numbers::pi;
}

void check_box(const OrientedBox & b, const std::string & what)
{
  if (!b.center.finite() || !b.half_extents.finite()) {
    throw ValidationError(what + ": non-finite box");
  }
  if (!(b.half_extents.x > 0.0 && b.half_extents.y > 0.0 && b.half_extents.z > 0.0)) {
    throw ValidationError(what + ": half extents must be positive");
  }
  if (!yaw_normalized(b.yaw)) {
    throw ValidationError(what + ": yaw not normalized");
  }
}

}  // namespace

void validate_scenario(const Scenario & s)
{
  const Extent & e = s.extent;
  if (!std::isfinite(e.x_min) || !std::isfinite(e.x_max) || !std::isfinite(e.y_min) ||
    !std::isfinite(e.y_max) || e.degenerate())
  {
    throw ValidationError("extent is degenerate");
  }
  if (s.mounts.empty()) {
    throw ValidationError("scenario has no mounts");
  }
  if (s.frames.empty()) {
    throw ValidationError("scenario has no frames");
  }

  std::vector<int> seen(s.mounts.size(), 0);
  for (const auto & m : s.mounts) {
    if (m.id < 0 || m.id >= static_cast<int>(s.mounts.size())) {
      throw ValidationError("mount id " + std::to_string(m.id) + " outside 0..N-1");
    }
    if (++seen[static_cast<std::size_t>(m.id)] > 1) {
      throw ValidationError("duplicate mount id " + std::to_string(m.id));
    }
    if (!m.pose.position.finite() || !yaw_normalized(m.pose.yaw)) {
      throw ValidationError("mount " + std::to_string(m.id) + ": invalid pose");
    }
    if (!(m.pose.position.z > 0.0)) {
      throw ValidationError("mount " + std::to_string(m.id) + ": mast height must be positive");
    }
  }

  for (std::size_t k = 0; k < s.occluders.size(); ++k) {
    check_box(s.occluders[k], "occluder " + std::to_string(k));
  }

  for (std::size_t f = 0; f < s.frames.size(); ++f) {
    const TrafficFrame & frame = s.frames[f];
    if (frame.index != static_cast<int>(f)) {
      throw ValidationError("frame indices must be 0..F-1 in order");
    }
    std::set<int> ids;
    for (const auto & v : frame.vehicles) {
      const std::string what = "frame " + std::to_string(f) + " vehicle " + std::to_string(v.vehicle_id);
      if (!ids.insert(v.vehicle_id).second) {
        throw ValidationError(what + ": duplicate vehicle id");
      }
      check_box(v.box, what);
      for (const Vec2 & c : v.box.bev_corners()) {
        if (c.x < e.x_min - 1e-9 || c.x > e.x_max + 1e-9 || c.y < e.y_min - 1e-9 || c.y > e.y_max + 1e-9) {
          throw ValidationError(what + ": box leaves the scene extent");
        }
      }
    }
  }

  const GridSpec & g = s.grid;
  if (!(g.cell_size > 0.0) || g.height <= 0 || g.width <= 0 || !std::isfinite(g.x0) ||
    !std::isfinite(g.y0))
  {
    throw ValidationError("grid has invalid dimensions");
  }
  if (!g.covers(e)) {
    throw ValidationError("grid does not cover the extent");
  }
}

// ---------------------------------------------------------------------------
// Serialization

namespace
{

json vec_json(const Vec3 & v) { return json{{"x", v.x}, {"y", v.y}, {"z", v.z}}; }

Vec3 vec_from(const json & j)
{
  return {j.at("x").get<double>(), j.at("y").get<double>(), j.at("z").get<double>()};
}

json box_json(const OrientedBox & b)
{
  return json{{"center", vec_json(b.center)}, {"half_extents", vec_json(b.half_extents)}, {"yaw", b.yaw}};
}

OrientedBox box_from(const json & j)
{
  return {vec_from(j.at("center")), vec_from(j.at("half_extents")), j.at("yaw").get<double>()};
}

}  // namespace

std::string scenario_to_json(const Scenario & s)
{
  json j;
  j["version"] = kScenarioVersion;
  j["seed"] = s.seed;
  j["extent"] = {{"x_min", s.extent.x_min}, {"x_max", s.extent.x_max},
    {"y_min", s.extent.y_min}, {"y_max", s.extent.y_max}};
  j["occluders"] = json::array();
  for (const auto & b : s.occluders) {
    j["occluders"].push_back(box_json(b));
  }
  j["mounts"] = json::array();
  for (const auto & m : s.mounts) {
    j["mounts"].push_back({{"id", m.id},
        {"pose", {{"position", vec_json(m.pose.position)}, {"yaw", m.pose.yaw}}}});
  }
  j["frames"] = json::array();
  for (const auto & f : s.frames) {
    json vehicles = json::array();
    for (const auto & v : f.vehicles) {
      vehicles.push_back({{"vehicle_id", v.vehicle_id}, {"box", box_json(v.box)}});
    }
    j["frames"].push_back({{"index", f.index}, {"vehicles", std::move(vehicles)}});
  }
  j["grid"] = {{"x0", s.grid.x0}, {"y0", s.grid.y0}, {"cell_size", s.grid.cell_size},
    {"height", s.grid.height}, {"width", s.grid.width}};
  // nlohmann::json objects are std::map backed, so keys come out sorted.
  return j.dump(1) + "\n";
}

Scenario scenario_from_json(const std::string & text)
{
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception & ex) {
    throw ParseError(std::string("scenario: ") + ex.what());
  }
  if (!j.is_object() || !j.contains("version")) {
    throw ParseError("scenario: missing version field");
  }
  if (!j["version"].is_number_integer() || j["version"].get<int>() != kScenarioVersion) {
    throw VersionError("scenario: unsupported version " + j["version"].dump());
  }

  Scenario s;
  try {
    s.seed = j.at("seed").get<std::uint64_t>();
    const json & e = j.at("extent");
    s.extent = {e.at("x_min").get<double>(), e.at("x_max").get<double>(),
      e.at("y_min").get<double>(), e.at("y_max").get<double>()};
    for (const auto & b : j.at("occluders")) {
      s.occluders.push_back(box_from(b));
    }
    for (const auto & m : j.at("mounts")) {
      CandidateMount cm;
      cm.id = m.at("id").get<int>();
      cm.pose.position = vec_from(m.at("pose").at("position"));
      cm.pose.yaw = m.at("pose").at("yaw").get<double>();
      s.mounts.push_back(cm);
    }
    for (const auto & f : j.at("frames")) {
      TrafficFrame tf;
      tf.index = f.at("index").get<int>();
      for (const auto & v : f.at("vehicles")) {
        tf.vehicles.push_back({v.at("vehicle_id").get<int>(), box_from(v.at("box"))});
      }
      s.frames.push_back(std::move(tf));
    }
    const json & g = j.at("grid");
    s.grid = {g.at("x0").get<double>(), g.at("y0").get<double>(), g.at("cell_size").get<double>(),
      g.at("height").get<int>(), g.at("width").get<int>()};
  } catch (const json::exception & ex) {
    throw ParseError(std::string("scenario: ") + ex.what());
  }
  validate_scenario(s);
  return s;
}

void save_scenario(const Scenario & s, const std::filesystem::path & path)
{
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw IoError("cannot open " + path.string() + " for writing");
  }
  out << scenario_to_json(s);
  out.flush();
  if (!out) {
    throw IoError("write failed for " + path.string());
  }
}

Scenario load_scenario(const std::filesystem::path & path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError("cannot open " + path.string());
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return scenario_from_json(buf.str());
}

}  // namespace rlplace
