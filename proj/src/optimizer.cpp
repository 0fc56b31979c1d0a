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

#include "rlplace/optimizer.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <set>

#include "rlplace/errors.hpp"
#include "rlplace/parallel.hpp"
#include "rlplace/random.hpp"

namespace rlplace
{

std::vector<int> evenly_spaced_frames(int n_frames, int count)
{
  if (n_frames < 1 || count < 1) {
    throw ParameterError("evenly_spaced_frames needs positive counts");
  }
  count = std::min(count, n_frames);
  std::vector<int> out;
  for (int k = 0; k < count; ++k) {
    out.push_back(static_cast<int>((static_cast<long long>(k) * n_frames) / count));
  }
  return out;
}

PerceptionScorer::PerceptionScorer(
  const CastCache & cache, PredictorModel model, ScorerMode mode, std::vector<int> frames)
: cache_(cache), model_(std::move(model)), mode_(mode), frames_(std::move(frames))
{
  if (frames_.empty()) {
    throw ParameterError("scorer needs at least one frame");
  }
  for (int f : frames_) {
    cache_.scenario().frame(f);
  }
  if (mode_ != ScorerMode::kNoisyOr) {
    return;
  }
  const std::size_t n_mounts = cache_.scenario().mounts.size();
  single_.assign(frames_.size(), std::vector<std::vector<double>>(n_mounts));
  parallel_for(frames_.size() * n_mounts, [&](std::size_t i) {
      const std::size_t slot = i / n_mounts;
      const int mount = static_cast<int>(i % n_mounts);
      const int ids[1] = {mount};
      single_[slot][static_cast<std::size_t>(mount)] =
      ability_for_placement(cache_, frames_[slot], ids, model_, ScorerMode::kFused).values;
    });
}

double PerceptionScorer::evaluate(std::span<const int> placement) const
{
  double total = 0.0;
  if (mode_ == ScorerMode::kFused) {
    for (int f : frames_) {
      total += perception_score(ability_for_placement(cache_, f, placement, model_, mode_));
    }
    return total / static_cast<double>(frames_.size());
  }

  const std::size_t cells = cache_.scenario().grid.cell_count();
  std::vector<double> miss(cells);
  for (std::size_t slot = 0; slot < frames_.size(); ++slot) {
    std::fill(miss.begin(), miss.end(), 1.0);
    for (int id : placement) {
      cache_.scenario().mount(id);
      const auto & a = single_[slot][static_cast<std::size_t>(id)];
      for (std::size_t c = 0; c < cells; ++c) {
        miss[c] *= 1.0 - a[c];
      }
    }
    double k = 0.0;
    for (double m : miss) {
      k += 1.0 - m;
    }
    total += k;
  }
  return total / static_cast<double>(frames_.size());
}

AbilityMap PerceptionScorer::mean_ability(std::span<const int> placement) const
{
  AbilityMap mean(cache_.scenario().grid, 0.0);
  for (int f : frames_) {
    const AbilityMap a = ability_for_placement(cache_, f, placement, model_, mode_);
    for (std::size_t c = 0; c < a.values.size(); ++c) {
      mean.values[c] += a.values[c] / static_cast<double>(frames_.size());
    }
  }
  return mean;
}

double perceptual_gain(const Scorer & scorer, std::span<const int> placement, int candidate)
{
  if (std::find(placement.begin(), placement.end(), candidate) != placement.end()) {
    throw ParameterError("candidate " + std::to_string(candidate) + " already placed");
  }
  std::vector<int> extended(placement.begin(), placement.end());
  extended.push_back(candidate);
  return scorer.score(extended) - scorer.score(placement);
}

namespace
{

std::vector<int> sorted_unique(std::span<const int> candidates)
{
  std::vector<int> ids(candidates.begin(), candidates.end());
  std::sort(ids.begin(), ids.end());
  if (std::adjacent_find(ids.begin(), ids.end()) != ids.end()) {
    throw ParameterError("candidate ids must be distinct");
  }
  return ids;
}

void check_m(std::size_t n, int m)
{
  if (m < 1 || static_cast<std::size_t>(m) > n) {
    throw ParameterError("M must satisfy 1 <= M <= |P| (M=" + std::to_string(m) +
            ", |P|=" + std::to_string(n) + ")");
  }
}

}  // namespace

GreedyResult greedy_select(std::span<const int> candidates, int m, const Scorer & scorer)
{
  std::vector<int> remaining = sorted_unique(candidates);
  check_m(remaining.size(), m);

  GreedyResult result;
  std::vector<double> scores;
  for (int round = 0; round < m; ++round) {
    const double before = scorer.score(result.placement);
    scores.assign(remaining.size(), 0.0);
    parallel_for(remaining.size(), [&](std::size_t i) {
        std::vector<int> trial = result.placement;
        trial.push_back(remaining[i]);
        scores[i] = scorer.score(trial);
      });

    // remaining is ascending, so the strict comparison keeps the smallest id.
    std::size_t best = 0;
    double best_gain = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < remaining.size(); ++i) {
      const double gain = scores[i] - before;
      if (gain > best_gain) {
        best_gain = gain;
        best = i;
      }
    }
    const int chosen = remaining[best];
    result.trace.push_back({chosen, before, scores[best], scores[best] - before});
    result.placement.push_back(chosen);
    remaining.erase(remaining.begin() + static_cast<std::ptrdiff_t>(best));
  }
  return result;
}

std::uint64_t binomial(std::uint64_t n, std::uint64_t k)
{
  if (k > n) {
    return 0;
  }
  k = std::min(k, n - k);
  unsigned __int128 acc = 1;
  for (std::uint64_t i = 1; i <= k; ++i) {
    acc = acc * (n - k + i) / i;
    if (acc > std::numeric_limits<std::uint64_t>::max()) {
      return std::numeric_limits<std::uint64_t>::max();
    }
  }
  return static_cast<std::uint64_t>(acc);
}

BruteForceResult brute_force_select(
  std::span<const int> candidates, int m, const Scorer & scorer, std::uint64_t budget)
{
  const std::vector<int> ids = sorted_unique(candidates);
  check_m(ids.size(), m);
  const std::uint64_t total = binomial(ids.size(), static_cast<std::uint64_t>(m));
  if (total > budget) {
    throw BudgetError("brute force needs C(" + std::to_string(ids.size()) + "," + std::to_string(m) +
            ")=" + std::to_string(total) + " evaluations, budget is " + std::to_string(budget));
  }

  // Materialize the subsets in lexicographic order, score them (possibly in
  // parallel), then reduce in order so ties keep the first subset.
  const std::size_t n = ids.size();
  const std::size_t k = static_cast<std::size_t>(m);
  std::vector<std::size_t> pick(k);
  std::iota(pick.begin(), pick.end(), 0);
  std::vector<int> flat;
  flat.reserve(total * k);
  while (true) {
    for (std::size_t j = 0; j < k; ++j) {
      flat.push_back(ids[pick[j]]);
    }
    std::size_t j = k;
    while (j > 0 && pick[j - 1] == n - k + (j - 1)) {
      --j;
    }
    if (j == 0) {
      break;
    }
    ++pick[j - 1];
    for (std::size_t t = j; t < k; ++t) {
      pick[t] = pick[t - 1] + 1;
    }
  }

  std::vector<double> scores(total);
  parallel_for(total, [&](std::size_t i) {
      scores[i] = scorer.score(std::span<const int>(flat).subspan(i * k, k));
    });

  BruteForceResult best;
  best.score = -std::numeric_limits<double>::infinity();
  best.evaluations = total;
  std::size_t best_index = 0;
  for (std::size_t i = 0; i < total; ++i) {
    if (scores[i] > best.score) {
      best.score = scores[i];
      best_index = i;
    }
  }
  best.placement.assign(flat.begin() + static_cast<std::ptrdiff_t>(best_index * k),
    flat.begin() + static_cast<std::ptrdiff_t>((best_index + 1) * k));
  return best;
}

Placement random_select(std::span<const int> candidates, int m, std::uint64_t seed)
{
  std::vector<int> ids = sorted_unique(candidates);
  check_m(ids.size(), m);
  Rng rng(seed);
  for (std::size_t i = 0; i < static_cast<std::size_t>(m); ++i) {
    std::swap(ids[i], ids[i + rng.below(ids.size() - i)]);
  }
  ids.resize(static_cast<std::size_t>(m));
  return ids;
}

Placement coverage_density_select(
  const CastCache & cache, std::span<const int> candidates, int m, std::span<const int> frames,
  const GridSpec & grid)
{
  std::vector<int> remaining = sorted_unique(candidates);
  check_m(remaining.size(), m);
  if (frames.empty()) {
    throw ParameterError("coverage_density_select needs at least one frame");
  }
  const Scenario & s = cache.scenario();
  const std::size_t cells = grid.cell_count();

  // Per mount: covered cells (frame-major) and static point count.
  struct Footprint
  {
    std::vector<char> covered;
    std::size_t points = 0;
  };
  std::vector<Footprint> foot(remaining.size());
  parallel_for(remaining.size(), [&](std::size_t i) {
      const CandidateMount & mount = s.mount(remaining[i]);
      Footprint & fp = foot[i];
      fp.covered.assign(cells * frames.size(), 0);
      for (std::size_t f = 0; f < frames.size(); ++f) {
        const PointCloud world = transform_cloud(
          strip_vehicle_points(cache.get(frames[f], mount.id)), mount_frame(mount), world_frame());
        fp.points += world.points.size();
        for (const auto & pt : world.points) {
          if (const auto cell = grid.world_to_cell(pt.p.x, pt.p.y)) {
            fp.covered[f * cells + grid.flat(cell->row, cell->col)] = 1;
          }
        }
      }
    });

  std::vector<char> covered(cells * frames.size(), 0);
  std::size_t density = 0;
  std::vector<bool> used(remaining.size(), false);
  Placement out;
  for (int round = 0; round < m; ++round) {
    std::size_t best = remaining.size();
    std::size_t best_cover = 0;
    std::size_t best_density = 0;
    for (std::size_t i = 0; i < remaining.size(); ++i) {
      if (used[i]) {
        continue;
      }
      std::size_t cover = 0;
      for (std::size_t c = 0; c < covered.size(); ++c) {
        cover += (covered[c] || foot[i].covered[c]) ? 1 : 0;
      }
      const std::size_t dens = density + foot[i].points;
      if (best == remaining.size() || cover > best_cover ||
        (cover == best_cover && dens > best_density))
      {
        best = i;
        best_cover = cover;
        best_density = dens;
      }
    }
    used[best] = true;
    density = best_density;
    for (std::size_t c = 0; c < covered.size(); ++c) {
      covered[c] = static_cast<char>(covered[c] || foot[best].covered[c]);
    }
    out.push_back(remaining[best]);
  }
  return out;
}

AuditResult submodularity_audit(
  const Scorer & scorer, std::span<const int> candidates, int n_samples, std::uint64_t seed)
{
  const std::vector<int> ids = sorted_unique(candidates);
  if (ids.size() < 3) {
    throw ParameterError("submodularity audit needs at least 3 candidates");
  }
  if (n_samples < 0) {
    throw ParameterError("n_samples must be non-negative");
  }
  Rng rng(hash_combine(seed, 0x61756469ULL));
  AuditResult out;
  constexpr double kTol = 1e-9;
  for (int sample = 0; sample < n_samples; ++sample) {
    std::vector<int> shuffled = ids;
    for (std::size_t i = 0; i + 1 < shuffled.size(); ++i) {
      std::swap(shuffled[i], shuffled[i + rng.below(shuffled.size() - i)]);
    }
    // T is a prefix of size in [1, N-1], p the element right after it.
    const std::size_t t_size = 1 + rng.below(ids.size() - 1);
    const std::vector<int> t(shuffled.begin(), shuffled.begin() + static_cast<std::ptrdiff_t>(t_size));
    const int p = shuffled[t_size];
    std::vector<int> s;
    for (int id : t) {
      if (rng.below(2) == 1) {
        s.push_back(id);
      }
    }
    const double gain_s = perceptual_gain(scorer, s, p);
    const double gain_t = perceptual_gain(scorer, t, p);
    ++out.checks;
    if (gain_s < gain_t - kTol) {
      ++out.violations;
      out.max_violation = std::max(out.max_violation, gain_t - gain_s);
    }
    if (gain_s < -kTol || gain_t < -kTol) {
      ++out.monotonicity_violations;
    }
  }
  return out;
}

}  // namespace rlplace
