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

#ifndef RLPLACE__PERCEPTION_HPP_
#define RLPLACE__PERCEPTION_HPP_

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "rlplace/lidar_sim.hpp"
#include "rlplace/scene.hpp"

namespace rlplace
{

// Row-major H x W grid of reals.
struct GridValues
{
  GridSpec grid;
  std::vector<double> values;

  GridValues() = default;
  GridValues(const GridSpec & g, double fill) : grid(g), values(g.cell_count(), fill) {}

  double at(int row, int col) const { return values[grid.flat(row, col)]; }
  double & at(int row, int col) { return values[grid.flat(row, col)]; }

  friend bool operator==(const GridValues &, const GridValues &) = default;
};

// Per-cell detection ability if a vehicle stood there; values in (0, 1).
struct AbilityMap : GridValues
{
  using GridValues::GridValues;
};

// Per-cell supervision confidence; values in [0, 1].
struct ConfidenceMap : GridValues
{
  using GridValues::GridValues;
};

// Binary gate on the supervision loss; values in {0, 1}.
struct SupervisionMask : GridValues
{
  using GridValues::GridValues;
};

inline constexpr std::size_t kFeatureCount = 4;
using CellFeatures = std::array<double, kFeatureCount>;

// f1 = log(1 + count), f2 = mean z, f3 = z span, f4 = occupied fraction of
// the in-bounds 8-neighbour ring. Empty cells are all zero.
struct FeatureGrid
{
  GridSpec grid;
  std::vector<CellFeatures> cells;

  const CellFeatures & at(int row, int col) const { return cells[grid.flat(row, col)]; }
};

struct TrainConfig
{
  double gamma = 0.1;
  double threshold = 0.2;
  double lr = 0.5;
  int epochs = 200;
  std::uint64_t seed = 0;

  void validate() const;
};

struct TrainMeta
{
  std::uint64_t seed = 0;
  int epochs = 0;
  double lr = 0.0;
  double gamma = 0.0;
  double threshold = 0.0;
  double final_loss = 0.0;

  friend bool operator==(const TrainMeta &, const TrainMeta &) = default;
};

// Logistic model over FeatureGrid features: A = sigmoid(w . f + b).
struct PredictorModel
{
  std::array<double, kFeatureCount> weights{};
  double bias = 0.0;
  TrainMeta meta;

  friend bool operator==(const PredictorModel &, const PredictorModel &) = default;
};

// Throws ContractError if the cloud holds vehicle points.
FeatureGrid extract_features(const PointCloud & x_hat, const GridSpec & grid);

AbilityMap predict_ability(const PredictorModel & model, const FeatureGrid & feats);

// Point-count surrogate for a detector's per-cell confidence:
// c_v = 1 - exp(-n_v / n0) written over each vehicle footprint.
inline constexpr double kSurrogateN0 = 20.0;

ConfidenceMap surrogate_confidence(
  const Scenario & scenario, int frame_index, std::span<const int> placement,
  const LidarSpec & spec, const GridSpec & grid);
ConfidenceMap surrogate_confidence(
  const CastCache & cache, int frame_index, std::span<const int> placement, const GridSpec & grid);

// Strict: K = 1 iff C > threshold.
SupervisionMask build_mask(const ConfidenceMap & confidence, double threshold);

// Masked mean absolute error. Throws ShapeError on mismatched grids.
double loss_sup(const AbilityMap & a, const ConfidenceMap & c, const SupervisionMask & k);

// Mean over cells of the summed absolute 4-neighbour differences, with
// out-of-bounds terms omitted. Throws ShapeError below 2 x 2.
double loss_smooth(const AbilityMap & a);

// Average |A_p - A_q| over unordered in-bounds 4-neighbour pairs.
double mean_neighbor_difference(const AbilityMap & a);

double perception_score(const AbilityMap & a);

struct FeatureSample
{
  FeatureGrid features;
  ConfidenceMap confidence;
};

struct LossGradient
{
  double loss = 0.0;
  std::array<double, kFeatureCount + 1> gradient{};  // weights then bias
};

// Mean over samples of L_sup + gamma * L_smooth, with the analytic gradient
// (sign(0) = 0 at the kinks of the absolute values).
LossGradient loss_and_gradient(
  const PredictorModel & model, std::span<const FeatureSample> samples, const TrainConfig & cfg);

struct TrainingSample
{
  PointCloud x_hat;  // vehicle-free, in the confidence grid's frame
  ConfidenceMap confidence;
};

struct TrainResult
{
  PredictorModel model;
  std::vector<double> loss_history;  // loss before the first step, then after each
};

// Full-batch gradient descent from zero weights. A step that would raise the
// loss is halved until it does not, so the history is non-increasing.
// Throws ParameterError on empty samples, DivergenceError on a non-finite loss.
TrainResult train_predictor(std::span<const TrainingSample> samples, const TrainConfig & cfg);
TrainResult train_on_features(std::span<const FeatureSample> samples, const TrainConfig & cfg);

// Vehicle-free cloud in world coordinates: the placement's fused ego cloud
// with vehicle returns removed (the default x_hat).
PointCloud stripped_world_cloud(
  const CastCache & cache, int frame_index, std::span<const int> placement);

// Multi-frame variant of x_hat: each vehicle footprint is refilled with static
// returns from every other frame of the scenario.
PointCloud vehicle_free_cloud(
  const CastCache & cache, int frame_index, std::span<const int> placement);

// Random-subset training samples: each sample picks
// a frame, a subset of mounts of uniform size in [1, N] and a random ego.
std::vector<TrainingSample> make_training_samples(
  const CastCache & cache, std::span<const int> frames, std::size_t n_samples,
  std::uint64_t seed);

enum class ScorerMode { kFused, kNoisyOr };

std::string to_string(ScorerMode mode);
ScorerMode scorer_mode_from_string(const std::string & name);

// Fused: project the placement's clouds into the first mount's frame, fuse,
// strip vehicles, bin on the scenario grid and predict. NoisyOr: predict each
// mount alone and combine as 1 - prod(1 - A_p). Throws ParameterError on an
// empty placement.
AbilityMap ability_for_placement(
  const Scenario & scenario, int frame_index, std::span<const int> placement,
  const PredictorModel & model, ScorerMode mode, const LidarSpec & spec);
AbilityMap ability_for_placement(
  const CastCache & cache, int frame_index, std::span<const int> placement,
  const PredictorModel & model, ScorerMode mode);

// Cellwise 1 - prod(1 - A_p).
AbilityMap noisy_or(std::span<const AbilityMap> maps);

void write_grid_csv(const GridValues & map, const std::filesystem::path & path);
// 8-bit binary PGM, value = round(255 * clamp(cell, 0, 1)), row 0 first.
void write_grid_pgm(const GridValues & map, const std::filesystem::path & path);

std::string model_to_json(const PredictorModel & model);
PredictorModel model_from_json(const std::string & text);
void save_model(const PredictorModel & model, const std::filesystem::path & path);
PredictorModel load_model(const std::filesystem::path & path);

inline constexpr int kModelVersion = 1;

}  // namespace rlplace

#endif  // RLPLACE__PERCEPTION_HPP_
