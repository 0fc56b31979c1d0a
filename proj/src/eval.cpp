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

#include "rlplace/eval.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <numeric>

#include "rlplace/errors.hpp"
#include "rlplace/random.hpp"

namespace rlplace
{

std::vector<Detection> proxy_detect(
  const PointCloud & fused_cloud, const TrafficFrame & frame, const ProxyDetectorConfig & cfg)
{
  std::map<int, std::size_t> counts;
  for (const auto & pt : fused_cloud.points) {
    if (!pt.is_static()) {
      ++counts[pt.label];
    }
  }
  std::vector<Detection> out;
  for (const auto & v : frame.vehicles) {
    const auto it = counts.find(v.vehicle_id);
    if (it == counts.end() || it->second == 0) {
      continue;
    }
    const double n = static_cast<double>(it->second);
    std::uint64_t h = hash_combine(cfg.seed, static_cast<std::uint64_t>(frame.index));
    h = hash_combine(h, static_cast<std::uint64_t>(v.vehicle_id));
    h = hash_combine(h, cfg.stream);
    const double angle = static_cast<double>(h >> 11) * 0x1.0p-53 * 2.0 * std::numbers::pi;
    const double offset = cfg.sigma0 / std::sqrt(n);

    Detection d;
    d.box = v.box;
    d.box.center.x += offset * std::cos(angle);
    d.box.center.y += offset * std::sin(angle);
    d.confidence = 1.0 - std::exp(-n / cfg.n0);
    d.source_vehicle = v.vehicle_id;
    out.push_back(d);
  }
  return out;
}

double bev_iou(const OrientedBox & a, const OrientedBox & b)
{
  const Polygon pa = to_polygon(a.bev_corners());
  const Polygon pb = to_polygon(b.bev_corners());
  const double inter = convex_intersection_area(pa, pb);
  const double uni = a.bev_area() + b.bev_area() - inter;
  if (!(uni > 0.0)) {
    return 0.0;
  }
  return std::clamp(inter / uni, 0.0, 1.0);
}

APCurve compute_ap(
  std::span<const std::vector<Detection>> detections,
  std::span<const std::vector<OrientedBox>> ground_truths, double iou_threshold)
{
  if (detections.size() != ground_truths.size()) {
    throw ParameterError("compute_ap: detections and ground truths cover different frame counts");
  }
  struct Ranked
  {
    double confidence;
    std::size_t frame;
    std::size_t index;
  };
  std::vector<Ranked> ranked;
  std::size_t total_gt = 0;
  for (std::size_t f = 0; f < detections.size(); ++f) {
    total_gt += ground_truths[f].size();
    for (std::size_t i = 0; i < detections[f].size(); ++i) {
      ranked.push_back({detections[f][i].confidence, f, i});
    }
  }
  std::stable_sort(ranked.begin(), ranked.end(),
    [](const Ranked & a, const Ranked & b) { return a.confidence > b.confidence; });

  APCurve curve;
  curve.per_frame.resize(detections.size());
  std::vector<std::vector<bool>> taken(ground_truths.size());
  for (std::size_t f = 0; f < ground_truths.size(); ++f) {
    taken[f].assign(ground_truths[f].size(), false);
  }

  int tp = 0;
  int fp = 0;
  for (const Ranked & r : ranked) {
    const OrientedBox & box = detections[r.frame][r.index].box;
    const auto & gts = ground_truths[r.frame];
    double best_iou = -1.0;
    std::size_t best = gts.size();
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (taken[r.frame][g]) {
        continue;
      }
      const double iou = bev_iou(box, gts[g]);
      if (iou >= iou_threshold && iou > best_iou) {
        best_iou = iou;
        best = g;
      }
    }
    if (best < gts.size()) {
      taken[r.frame][best] = true;
      ++tp;
      ++curve.per_frame[r.frame].tp;
    } else {
      ++fp;
      ++curve.per_frame[r.frame].fp;
    }
    curve.precision.push_back(static_cast<double>(tp) / static_cast<double>(tp + fp));
    curve.recall.push_back(total_gt > 0 ? static_cast<double>(tp) / static_cast<double>(total_gt) : 0.0);
  }
  for (std::size_t f = 0; f < ground_truths.size(); ++f) {
    curve.per_frame[f].fn = static_cast<int>(ground_truths[f].size()) - curve.per_frame[f].tp;
    curve.totals.tp += curve.per_frame[f].tp;
    curve.totals.fp += curve.per_frame[f].fp;
    curve.totals.fn += curve.per_frame[f].fn;
  }

  if (total_gt == 0 || ranked.empty()) {
    return curve;
  }
  // Precision envelope, swept from the lowest-ranked detection upward.
  std::vector<double> envelope(curve.precision);
  for (std::size_t i = envelope.size() - 1; i > 0; --i) {
    envelope[i - 1] = std::max(envelope[i - 1], envelope[i]);
  }
  double prev_recall = 0.0;
  for (std::size_t i = 0; i < envelope.size(); ++i) {
    curve.ap += (curve.recall[i] - prev_recall) * envelope[i];
    prev_recall = curve.recall[i];
  }
  return curve;
}

std::vector<Detection> suppress_overlaps(std::vector<Detection> detections, double iou_threshold)
{
  std::stable_sort(detections.begin(), detections.end(),
    [](const Detection & a, const Detection & b) { return a.confidence > b.confidence; });
  std::vector<Detection> kept;
  for (const auto & d : detections) {
    const bool overlaps = std::any_of(kept.begin(), kept.end(),
        [&](const Detection & k) { return bev_iou(k.box, d.box) > iou_threshold; });
    if (!overlaps) {
      kept.push_back(d);
    }
  }
  return kept;
}

APResult evaluate_placement(
  const CastCache & cache, std::span<const int> placement, std::span<const int> frames,
  FusionMode mode)
{
  if (placement.empty()) {
    throw ParameterError("placement must be non-empty");
  }
  const Scenario & s = cache.scenario();
  std::vector<std::vector<Detection>> detections;
  std::vector<std::vector<OrientedBox>> truths;
  for (int f : frames) {
    const TrafficFrame & frame = s.frame(f);
    std::vector<OrientedBox> gt;
    for (const auto & v : frame.vehicles) {
      gt.push_back(v.box);
    }
    truths.push_back(std::move(gt));

    ProxyDetectorConfig cfg;
    cfg.seed = s.seed;
    if (mode == FusionMode::kEarly) {
      detections.push_back(proxy_detect(fused_ego_cloud(cache, f, placement), frame, cfg));
      continue;
    }
    std::vector<Detection> merged;
    for (int id : placement) {
      cfg.stream = static_cast<std::uint64_t>(id) + 1;
      const auto local = proxy_detect(cache.get(f, id), frame, cfg);
      merged.insert(merged.end(), local.begin(), local.end());
    }
    detections.push_back(suppress_overlaps(std::move(merged), 0.5));
  }

  APResult out;
  out.frames.assign(frames.begin(), frames.end());
  double * slots[3] = {&out.ap_03, &out.ap_05, &out.ap_07};
  for (std::size_t t = 0; t < kApThresholds.size(); ++t) {
    const APCurve curve = compute_ap(detections, truths, kApThresholds[t]);
    *slots[t] = curve.ap;
    out.per_frame[t] = curve.per_frame;
    out.totals[t] = curve.totals;
  }
  return out;
}

APResult evaluate_placement(
  const Scenario & scenario, std::span<const int> placement, std::span<const int> frames,
  const LidarSpec & spec, FusionMode mode)
{
  const CastCache cache(scenario, spec);
  return evaluate_placement(cache, placement, frames, mode);
}

}  // namespace rlplace
