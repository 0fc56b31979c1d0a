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

#include "rlplace/perception.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include <fmt/format.h>

#include "json.hpp"

#include "rlplace/errors.hpp"
#include "rlplace/random.hpp"

namespace rlplace
{

using nlohmann::json;

void TrainConfig::validate() const
{
  if (!(gamma >= 0.0) || !std::isfinite(gamma)) {
    throw ParameterError("gamma must be >= 0");
  }
  if (!(threshold > 0.0 && threshold < 1.0)) {
    throw ParameterError("threshold must lie in (0, 1)");
  }
  if (!(lr > 0.0) || !std::isfinite(lr)) {
    throw ParameterError("lr must be positive");
  }
  if (epochs <= 0) {
    throw ParameterError("epochs must be positive");
  }
}

namespace
{

// Logits are clamped so the output stays strictly inside (0, 1).
constexpr double kLogitLimit = 30.0;

double sigmoid(double z)
{
  z = std::clamp(z, -kLogitLimit, kLogitLimit);
  if (z >= 0.0) {
    return 1.0 / (1.0 + std::exp(-z));
  }
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

void require_same_grid(const GridValues & a, const GridValues & b, const char * what)
{
  if (!(a.grid == b.grid) || a.values.size() != b.values.size()) {
    throw ShapeError(std::string(what) + ": grid mismatch");
  }
}

}  // namespace

FeatureGrid extract_features(const PointCloud & x_hat, const GridSpec & grid)
{
  const std::size_t n = grid.cell_count();
  std::vector<std::size_t> count(n, 0);
  std::vector<double> sum_z(n, 0.0);
  std::vector<double> min_z(n, std::numeric_limits<double>::infinity());
  std::vector<double> max_z(n, -std::numeric_limits<double>::infinity());

  for (const auto & pt : x_hat.points) {
    if (!pt.is_static()) {
      throw ContractError("extract_features: input holds vehicle points");
    }
    const auto cell = grid.world_to_cell(pt.p.x, pt.p.y);
    if (!cell) {
      continue;
    }
    const std::size_t idx = grid.flat(cell->row, cell->col);
    ++count[idx];
    sum_z[idx] += pt.p.z;
    min_z[idx] = std::min(min_z[idx], pt.p.z);
    max_z[idx] = std::max(max_z[idx], pt.p.z);
  }

  FeatureGrid out;
  out.grid = grid;
  out.cells.assign(n, CellFeatures{});
  for (int r = 0; r < grid.height; ++r) {
    for (int c = 0; c < grid.width; ++c) {
      const std::size_t idx = grid.flat(r, c);
      if (count[idx] == 0) {
        continue;
      }
      int ring = 0;
      int occupied = 0;
      for (int dr = -1; dr <= 1; ++dr) {
        for (int dc = -1; dc <= 1; ++dc) {
          const int rr = r + dr;
          const int cc = c + dc;
          if ((dr == 0 && dc == 0) || rr < 0 || cc < 0 || rr >= grid.height || cc >= grid.width) {
            continue;
          }
          ++ring;
          occupied += count[grid.flat(rr, cc)] > 0 ? 1 : 0;
        }
      }
      CellFeatures & f = out.cells[idx];
      f[0] = std::log1p(static_cast<double>(count[idx]));
      f[1] = sum_z[idx] / static_cast<double>(count[idx]);
      f[2] = max_z[idx] - min_z[idx];
      f[3] = ring > 0 ? static_cast<double>(occupied) / ring : 0.0;
    }
  }
  return out;
}

AbilityMap predict_ability(const PredictorModel & model, const FeatureGrid & feats)
{
  AbilityMap a(feats.grid, 0.0);
  for (std::size_t i = 0; i < feats.cells.size(); ++i) {
    const CellFeatures & f = feats.cells[i];
    double z = model.bias;
    for (std::size_t k = 0; k < kFeatureCount; ++k) {
      z += model.weights[k] * f[k];
    }
    a.values[i] = sigmoid(z);
  }
  return a;
}

namespace
{

ConfidenceMap confidence_from_counts(
  const TrafficFrame & frame, const std::vector<std::size_t> & counts_by_index, const GridSpec & grid)
{
  ConfidenceMap c(grid, 0.0);
  for (std::size_t v = 0; v < frame.vehicles.size(); ++v) {
    const double conf = 1.0 - std::exp(-static_cast<double>(counts_by_index[v]) / kSurrogateN0);
    if (conf <= 0.0) {
      continue;
    }
    const OrientedBox & box = frame.vehicles[v].box;
    const Polygon footprint = to_polygon(box.bev_corners());
    double lo_x = footprint[0].x;
    double hi_x = lo_x;
    double lo_y = footprint[0].y;
    double hi_y = lo_y;
    for (const Vec2 & p : footprint) {
      lo_x = std::min(lo_x, p.x);
      hi_x = std::max(hi_x, p.x);
      lo_y = std::min(lo_y, p.y);
      hi_y = std::max(hi_y, p.y);
    }
    const int c0 = std::max(0, static_cast<int>(std::floor((lo_x - grid.x0) / grid.cell_size)));
    const int c1 = std::min(grid.width - 1, static_cast<int>(std::floor((hi_x - grid.x0) / grid.cell_size)));
    const int r0 = std::max(0, static_cast<int>(std::floor((lo_y - grid.y0) / grid.cell_size)));
    const int r1 = std::min(grid.height - 1, static_cast<int>(std::floor((hi_y - grid.y0) / grid.cell_size)));
    for (int r = r0; r <= r1; ++r) {
      for (int col = c0; col <= c1; ++col) {
        const double x = grid.x0 + col * grid.cell_size;
        const double y = grid.y0 + r * grid.cell_size;
        const Polygon cell{{x, y}, {x + grid.cell_size, y}, {x + grid.cell_size, y + grid.cell_size},
          {x, y + grid.cell_size}};
        if (convex_intersection_area(cell, footprint) > 1e-12) {
          c.at(r, col) = std::max(c.at(r, col), conf);
        }
      }
    }
  }
  return c;
}

}  // namespace

ConfidenceMap surrogate_confidence(
  const CastCache & cache, int frame_index, std::span<const int> placement, const GridSpec & grid)
{
  const PointCloud fused = fused_ego_cloud(cache, frame_index, placement);
  const TrafficFrame & frame = cache.scenario().frame(frame_index);
  std::vector<std::size_t> counts(frame.vehicles.size(), 0);
  for (const auto & pt : fused.points) {
    if (pt.is_static()) {
      continue;
    }
    for (std::size_t v = 0; v < frame.vehicles.size(); ++v) {
      if (frame.vehicles[v].vehicle_id == pt.label) {
        ++counts[v];
        break;
      }
    }
  }
  return confidence_from_counts(frame, counts, grid);
}

ConfidenceMap surrogate_confidence(
  const Scenario & scenario, int frame_index, std::span<const int> placement,
  const LidarSpec & spec, const GridSpec & grid)
{
  const CastCache cache(scenario, spec);
  return surrogate_confidence(cache, frame_index, placement, grid);
}

SupervisionMask build_mask(const ConfidenceMap & confidence, double threshold)
{
  SupervisionMask k(confidence.grid, 0.0);
  for (std::size_t i = 0; i < confidence.values.size(); ++i) {
    k.values[i] = confidence.values[i] > threshold ? 1.0 : 0.0;
  }
  return k;
}

double loss_sup(const AbilityMap & a, const ConfidenceMap & c, const SupervisionMask & k)
{
  require_same_grid(a, c, "loss_sup");
  require_same_grid(a, k, "loss_sup");
  double sum = 0.0;
  double masked = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    sum += k.values[i] * std::abs(c.values[i] - a.values[i]);
    masked += k.values[i];
  }
  return sum / std::max(1.0, masked);
}

double loss_smooth(const AbilityMap & a)
{
  const GridSpec & g = a.grid;
  if (g.height < 2 || g.width < 2) {
    throw ShapeError("loss_smooth needs at least a 2 x 2 grid");
  }
  // Each unordered neighbour pair appears twice in the per-cell sum.
  double sum = 0.0;
  for (int r = 0; r < g.height; ++r) {
    for (int c = 0; c < g.width; ++c) {
      const double v = a.at(r, c);
      if (r + 1 < g.height) {
        sum += 2.0 * std::abs(v - a.at(r + 1, c));
      }
      if (c + 1 < g.width) {
        sum += 2.0 * std::abs(v - a.at(r, c + 1));
      }
    }
  }
  return sum / static_cast<double>(g.cell_count());
}

double mean_neighbor_difference(const AbilityMap & a)
{
  const GridSpec & g = a.grid;
  double sum = 0.0;
  std::size_t pairs = 0;
  for (int r = 0; r < g.height; ++r) {
    for (int c = 0; c < g.width; ++c) {
      if (r + 1 < g.height) {
        sum += std::abs(a.at(r, c) - a.at(r + 1, c));
        ++pairs;
      }
      if (c + 1 < g.width) {
        sum += std::abs(a.at(r, c) - a.at(r, c + 1));
        ++pairs;
      }
    }
  }
  return pairs > 0 ? sum / static_cast<double>(pairs) : 0.0;
}

double perception_score(const AbilityMap & a)
{
  return std::accumulate(a.values.begin(), a.values.end(), 0.0);
}

LossGradient loss_and_gradient(
  const PredictorModel & model, std::span<const FeatureSample> samples, const TrainConfig & cfg)
{
  LossGradient out;
  if (samples.empty()) {
    return out;
  }
  for (const FeatureSample & s : samples) {
    require_same_grid(s.confidence, GridValues(s.features.grid, 0.0), "loss_and_gradient");
    const GridSpec & g = s.features.grid;
    const AbilityMap a = predict_ability(model, s.features);
    const SupervisionMask k = build_mask(s.confidence, cfg.threshold);
    const double masked = std::accumulate(k.values.begin(), k.values.end(), 0.0);
    const double sup_norm = std::max(1.0, masked);
    const double hw = static_cast<double>(g.cell_count());

    double sample_loss = loss_sup(a, s.confidence, k);
    if (cfg.gamma > 0.0) {
      sample_loss += cfg.gamma * loss_smooth(a);
    }
    out.loss += sample_loss;

    for (int r = 0; r < g.height; ++r) {
      for (int c = 0; c < g.width; ++c) {
        const std::size_t idx = g.flat(r, c);
        const double av = a.values[idx];
        double d_a = -k.values[idx] * sign(s.confidence.values[idx] - av) / sup_norm;
        if (cfg.gamma > 0.0) {
          double acc = 0.0;
          if (r > 0) {acc += sign(av - a.at(r - 1, c));}
          if (r + 1 < g.height) {acc += sign(av - a.at(r + 1, c));}
          if (c > 0) {acc += sign(av - a.at(r, c - 1));}
          if (c + 1 < g.width) {acc += sign(av - a.at(r, c + 1));}
          d_a += cfg.gamma * 2.0 * acc / hw;
        }
        if (d_a == 0.0) {
          continue;
        }
        const double d_z = d_a * av * (1.0 - av);
        const CellFeatures & f = s.features.cells[idx];
        for (std::size_t j = 0; j < kFeatureCount; ++j) {
          out.gradient[j] += d_z * f[j];
        }
        out.gradient[kFeatureCount] += d_z;
      }
    }
  }
  const double n = static_cast<double>(samples.size());
  out.loss /= n;
  for (double & v : out.gradient) {
    v /= n;
  }
  return out;
}

TrainResult train_on_features(std::span<const FeatureSample> samples, const TrainConfig & cfg)
{
  cfg.validate();
  if (samples.empty()) {
    throw ParameterError("train_predictor needs at least one sample");
  }

  PredictorModel model;
  model.meta = {cfg.seed, cfg.epochs, cfg.lr, cfg.gamma, cfg.threshold, 0.0};

  TrainResult result;
  LossGradient current = loss_and_gradient(model, samples, cfg);
  if (!std::isfinite(current.loss)) {
    throw DivergenceError("initial loss is not finite");
  }
  result.loss_history.push_back(current.loss);

  constexpr int kMaxHalvings = 40;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    double step = cfg.lr;
    bool accepted = false;
    PredictorModel trial = model;
    LossGradient next;
    for (int h = 0; h <= kMaxHalvings; ++h, step *= 0.5) {
      for (std::size_t j = 0; j < kFeatureCount; ++j) {
        trial.weights[j] = model.weights[j] - step * current.gradient[j];
      }
      trial.bias = model.bias - step * current.gradient[kFeatureCount];
      next = loss_and_gradient(trial, samples, cfg);
      if (!std::isfinite(next.loss)) {
        throw DivergenceError(fmt::format("loss became non-finite at epoch {}", epoch));
      }
      if (next.loss <= current.loss) {
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      // No descent along the (sub)gradient at any tried step: converged.
      result.loss_history.push_back(current.loss);
      continue;
    }
    model.weights = trial.weights;
    model.bias = trial.bias;
    current = next;
    result.loss_history.push_back(current.loss);
  }
  model.meta.final_loss = current.loss;
  result.model = model;
  return result;
}

TrainResult train_predictor(std::span<const TrainingSample> samples, const TrainConfig & cfg)
{
  cfg.validate();
  if (samples.empty()) {
    throw ParameterError("train_predictor needs at least one sample");
  }
  std::vector<FeatureSample> feats;
  feats.reserve(samples.size());
  for (const auto & s : samples) {
    feats.push_back({extract_features(s.x_hat, s.confidence.grid), s.confidence});
  }
  return train_on_features(feats, cfg);
}

PointCloud stripped_world_cloud(
  const CastCache & cache, int frame_index, std::span<const int> placement)
{
  const Scenario & s = cache.scenario();
  const CoordinateFrame ego = ego_frame(s.mount(placement.front()));
  const PointCloud fused = fused_ego_cloud(cache, frame_index, placement);
  return transform_cloud(strip_vehicle_points(fused), ego, world_frame());
}

PointCloud vehicle_free_cloud(
  const CastCache & cache, int frame_index, std::span<const int> placement)
{
  const Scenario & s = cache.scenario();
  const CoordinateFrame ego = ego_frame(s.mount(placement.front()));
  std::vector<PointCloud> clouds;
  clouds.reserve(s.frames.size());
  for (const auto & f : s.frames) {
    clouds.push_back(fused_ego_cloud(cache, f.index, placement));
  }
  const PointCloud filled =
    selective_fusion(clouds, s.frames, static_cast<std::size_t>(frame_index), ego);
  return transform_cloud(filled, ego, world_frame());
}

std::vector<TrainingSample> make_training_samples(
  const CastCache & cache, std::span<const int> frames, std::size_t n_samples,
  std::uint64_t seed)
{
  if (frames.empty()) {
    throw ParameterError("make_training_samples needs at least one frame");
  }
  const Scenario & s = cache.scenario();
  Rng rng(hash_combine(seed, 0x7472616eULL));
  std::vector<TrainingSample> out;
  out.reserve(n_samples);
  const std::size_t n_mounts = s.mounts.size();
  for (std::size_t i = 0; i < n_samples; ++i) {
    const int frame = frames[rng.below(frames.size())];
    const std::size_t subset = 1 + rng.below(n_mounts);
    std::vector<int> ids(n_mounts);
    std::iota(ids.begin(), ids.end(), 0);
    for (std::size_t k = 0; k < subset; ++k) {
      std::swap(ids[k], ids[k + rng.below(n_mounts - k)]);
    }
    ids.resize(subset);
    // Random ego: move it to the front.
    std::swap(ids[0], ids[rng.below(subset)]);

    TrainingSample sample;
    sample.x_hat = stripped_world_cloud(cache, frame, ids);
    sample.confidence = surrogate_confidence(cache, frame, ids, s.grid);
    out.push_back(std::move(sample));
  }
  return out;
}

std::string to_string(ScorerMode mode) { return mode == ScorerMode::kFused ? "fused" : "noisyor"; }

ScorerMode scorer_mode_from_string(const std::string & name)
{
  if (name == "fused") {
    return ScorerMode::kFused;
  }
  if (name == "noisyor") {
    return ScorerMode::kNoisyOr;
  }
  throw ParameterError("unknown scorer mode '" + name + "'");
}

AbilityMap noisy_or(std::span<const AbilityMap> maps)
{
  if (maps.empty()) {
    throw ParameterError("noisy_or needs at least one map");
  }
  if (maps.size() == 1) {
    return maps.front();
  }
  AbilityMap out(maps.front().grid, 1.0);
  for (const auto & m : maps) {
    require_same_grid(out, m, "noisy_or");
    for (std::size_t i = 0; i < m.values.size(); ++i) {
      out.values[i] *= 1.0 - m.values[i];
    }
  }
  for (double & v : out.values) {
    v = 1.0 - v;
  }
  return out;
}

AbilityMap ability_for_placement(
  const CastCache & cache, int frame_index, std::span<const int> placement,
  const PredictorModel & model, ScorerMode mode)
{
  if (placement.empty()) {
    throw ParameterError("placement must be non-empty");
  }
  const Scenario & s = cache.scenario();
  auto single = [&](std::span<const int> ids) {
    return predict_ability(model, extract_features(stripped_world_cloud(cache, frame_index, ids), s.grid));
  };
  if (mode == ScorerMode::kFused) {
    return single(placement);
  }
  std::vector<AbilityMap> maps;
  maps.reserve(placement.size());
  for (std::size_t i = 0; i < placement.size(); ++i) {
    maps.push_back(single(placement.subspan(i, 1)));
  }
  return noisy_or(maps);
}

AbilityMap ability_for_placement(
  const Scenario & scenario, int frame_index, std::span<const int> placement,
  const PredictorModel & model, ScorerMode mode, const LidarSpec & spec)
{
  const CastCache cache(scenario, spec);
  return ability_for_placement(cache, frame_index, placement, model, mode);
}

// ---------------------------------------------------------------------------
// Export

void write_grid_csv(const GridValues & map, const std::filesystem::path & path)
{
  std::ofstream out(path, std::ios::trunc);
  if (!out) {
    throw IoError("cannot open " + path.string() + " for writing");
  }
  for (int r = 0; r < map.grid.height; ++r) {
    for (int c = 0; c < map.grid.width; ++c) {
      out << (c ? "," : "") << fmt::format("{}", map.at(r, c));
    }
    out << '\n';
  }
  if (!out) {
    throw IoError("write failed for " + path.string());
  }
}

void write_grid_pgm(const GridValues & map, const std::filesystem::path & path)
{
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw IoError("cannot open " + path.string() + " for writing");
  }
  out << "P5\n" << map.grid.width << ' ' << map.grid.height << "\n255\n";
  for (double v : map.values) {
    const double clamped = std::clamp(v, 0.0, 1.0);
    out.put(static_cast<char>(static_cast<unsigned char>(std::lround(255.0 * clamped))));
  }
  if (!out) {
    throw IoError("write failed for " + path.string());
  }
}

std::string model_to_json(const PredictorModel & model)
{
  json j;
  j["version"] = kModelVersion;
  j["weights"] = model.weights;
  j["bias"] = model.bias;
  j["train_meta"] = {{"seed", model.meta.seed}, {"epochs", model.meta.epochs}, {"lr", model.meta.lr},
    {"gamma", model.meta.gamma}, {"threshold", model.meta.threshold},
    {"final_loss", model.meta.final_loss}};
  return j.dump(1) + "\n";
}

PredictorModel model_from_json(const std::string & text)
{
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception & ex) {
    throw ParseError(std::string("model: ") + ex.what());
  }
  if (!j.is_object() || !j.contains("version")) {
    throw ParseError("model: missing version field");
  }
  if (!j["version"].is_number_integer() || j["version"].get<int>() != kModelVersion) {
    throw VersionError("model: unsupported version " + j["version"].dump());
  }
  PredictorModel m;
  try {
    const auto w = j.at("weights").get<std::vector<double>>();
    if (w.size() != kFeatureCount) {
      throw ParseError("model: expected 4 weights");
    }
    std::copy(w.begin(), w.end(), m.weights.begin());
    m.bias = j.at("bias").get<double>();
    const json & meta = j.at("train_meta");
    m.meta.seed = meta.at("seed").get<std::uint64_t>();
    m.meta.epochs = meta.at("epochs").get<int>();
    m.meta.lr = meta.at("lr").get<double>();
    m.meta.gamma = meta.at("gamma").get<double>();
    m.meta.threshold = meta.at("threshold").get<double>();
    m.meta.final_loss = meta.at("final_loss").get<double>();
  } catch (const json::exception & ex) {
    throw ParseError(std::string("model: ") + ex.what());
  }
  for (double w : m.weights) {
    if (!std::isfinite(w)) {
      throw ValidationError("model: non-finite weight");
    }
  }
  if (!std::isfinite(m.bias)) {
    throw ValidationError("model: non-finite bias");
  }
  return m;
}

void save_model(const PredictorModel & model, const std::filesystem::path & path)
{
  std::ofstream out(path, std::ios::trunc);
  if (!out) {
    throw IoError("cannot open " + path.string() + " for writing");
  }
  out << model_to_json(model);
  if (!out) {
    throw IoError("write failed for " + path.string());
  }
}

PredictorModel load_model(const std::filesystem::path & path)
{
  std::ifstream in(path);
  if (!in) {
    throw IoError("cannot open " + path.string());
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return model_from_json(buf.str());
}

}  // namespace rlplace
