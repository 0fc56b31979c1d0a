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

#ifndef RLPLACE__EVAL_HPP_
#define RLPLACE__EVAL_HPP_

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "rlplace/lidar_sim.hpp"
#include "rlplace/scene.hpp"

namespace rlplace
{

struct Detection
{
  OrientedBox box;
  double confidence = 0.0;  // [0, 1]
  int source_vehicle = -1;  // debug only
};

struct ProxyDetectorConfig
{
  double n0 = 20.0;
  double sigma0 = 1.0;  // meters
  std::uint64_t seed = 0;  // usually the scenario seed
  std::uint64_t stream = 0;  // extra hash input (late fusion uses the mount id + 1)
};

// One detection per vehicle with n_v >= 1 labeled points: confidence
// 1 - exp(-n_v / n0), box shifted in BEV by sigma0 / sqrt(n_v) along a
// direction hashed from (seed, frame index, vehicle id).
std::vector<Detection> proxy_detect(
  const PointCloud & fused_cloud, const TrafficFrame & frame, const ProxyDetectorConfig & cfg);

// Area of intersection over union of the BEV footprints; z is ignored.
double bev_iou(const OrientedBox & a, const OrientedBox & b);

struct MatchCounts
{
  int tp = 0;
  int fp = 0;
  int fn = 0;
};

struct APCurve
{
  double ap = 0.0;
  MatchCounts totals;
  std::vector<MatchCounts> per_frame;
  std::vector<double> precision;  // one entry per ranked detection
  std::vector<double> recall;
};

// Detections ranked by descending confidence across all frames (ties by frame
// then input order); each takes the unmatched same-frame ground truth with the
// highest IoU >= threshold. AP is the area under the precision envelope
// (all-point interpolation). With no ground truth the AP is 0.
APCurve compute_ap(
  std::span<const std::vector<Detection>> detections,
  std::span<const std::vector<OrientedBox>> ground_truths, double iou_threshold);

inline constexpr std::array<double, 3> kApThresholds{0.3, 0.5, 0.7};

struct APResult
{
  double ap_03 = 0.0;
  double ap_05 = 0.0;
  double ap_07 = 0.0;
  std::array<std::vector<MatchCounts>, 3> per_frame;  // indexed like kApThresholds
  std::array<MatchCounts, 3> totals;
  std::vector<int> frames;
};

enum class FusionMode { kEarly, kLate };

// Early: project and fuse raw clouds, then detect. Late: detect per mount and
// merge by confidence with IoU-0.5 suppression.
APResult evaluate_placement(
  const CastCache & cache, std::span<const int> placement, std::span<const int> frames,
  FusionMode mode = FusionMode::kEarly);
APResult evaluate_placement(
  const Scenario & scenario, std::span<const int> placement, std::span<const int> frames,
  const LidarSpec & spec, FusionMode mode = FusionMode::kEarly);

// Greedy non-maximum suppression, highest confidence first.
std::vector<Detection> suppress_overlaps(std::vector<Detection> detections, double iou_threshold);

}  // namespace rlplace

#endif  // RLPLACE__EVAL_HPP_
