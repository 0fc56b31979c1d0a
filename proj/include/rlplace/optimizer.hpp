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

#ifndef RLPLACE__OPTIMIZER_HPP_
#define RLPLACE__OPTIMIZER_HPP_

#include <atomic>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "rlplace/lidar_sim.hpp"
#include "rlplace/perception.hpp"

namespace rlplace
{

// Mount ids in selection order.
using Placement = std::vector<int>;

struct GainStep
{
  int chosen_id = -1;
  double before = 0.0;  // k_S
  double after = 0.0;  // k_{S + p}
  double gain = 0.0;  // after - before
};

using GainTrace = std::vector<GainStep>;

// Set-function contract for placement search. score() is deterministic,
// returns 0 for the empty placement and counts every call (including the
// empty one) so evaluation budgets can be audited. Implementations must be
// safe for concurrent const use.
class Scorer
{
public:
  virtual ~Scorer() = default;

  double score(std::span<const int> placement) const
  {
    evaluations_.fetch_add(1, std::memory_order_relaxed);
    return placement.empty() ? 0.0 : evaluate(placement);
  }

  std::uint64_t evaluations() const { return evaluations_.load(); }
  void reset_evaluations() { evaluations_.store(0); }

protected:
  virtual double evaluate(std::span<const int> placement) const = 0;

private:
  mutable std::atomic<std::uint64_t> evaluations_{0};
};

class FunctionScorer : public Scorer
{
public:
  explicit FunctionScorer(std::function<double(std::span<const int>)> fn) : fn_(std::move(fn)) {}

protected:
  double evaluate(std::span<const int> placement) const override { return fn_(placement); }

private:
  std::function<double(std::span<const int>)> fn_;
};

// Mean perception score over a fixed frame subset. NoisyOr mode precomputes
// one ability map per (frame, mount) at construction.
class PerceptionScorer : public Scorer
{
public:
  PerceptionScorer(
    const CastCache & cache, PredictorModel model, ScorerMode mode, std::vector<int> frames);

  ScorerMode mode() const { return mode_; }
  const std::vector<int> & frames() const { return frames_; }
  // Mean ability map over the scored frames (for inspection and export).
  AbilityMap mean_ability(std::span<const int> placement) const;

protected:
  double evaluate(std::span<const int> placement) const override;

private:
  const CastCache & cache_;
  PredictorModel model_;
  ScorerMode mode_;
  std::vector<int> frames_;
  // [frame slot][mount id] -> single-mount ability values
  std::vector<std::vector<std::vector<double>>> single_;
};

// `count` frame indices spread evenly over [0, n_frames).
std::vector<int> evenly_spaced_frames(int n_frames, int count);

// Throws ParameterError when p is already in S.
double perceptual_gain(const Scorer & scorer, std::span<const int> placement, int candidate);

struct GreedyResult
{
  Placement placement;
  GainTrace trace;
};

// M rounds; each round scores S once and every remaining candidate once, and
// keeps the max-gain candidate (ties to the smallest id).
// Throws ParameterError unless 1 <= M <= |P|.
GreedyResult greedy_select(std::span<const int> candidates, int m, const Scorer & scorer);

inline constexpr std::uint64_t kDefaultBruteForceBudget = 1'000'000;

// C(n, k), saturating at UINT64_MAX.
std::uint64_t binomial(std::uint64_t n, std::uint64_t k);

struct BruteForceResult
{
  Placement placement;  // ascending ids
  double score = 0.0;
  std::uint64_t evaluations = 0;
};

// Every M-subset in lexicographic order; ties to the lexicographically
// smallest. Throws BudgetError when C(|P|, M) exceeds the budget.
BruteForceResult brute_force_select(
  std::span<const int> candidates, int m, const Scorer & scorer,
  std::uint64_t budget = kDefaultBruteForceBudget);

// Seeded Fisher-Yates prefix of length M.
Placement random_select(std::span<const int> candidates, int m, std::uint64_t seed);

// Greedy on covered-cell count (cells with at least one static point from the
// placement, summed over frames); ties on total static point count, then on
// the smallest id.
Placement coverage_density_select(
  const CastCache & cache, std::span<const int> candidates, int m, std::span<const int> frames,
  const GridSpec & grid);

struct AuditResult
{
  int violations = 0;  // gain(S, p) < gain(T, p) - 1e-9
  int checks = 0;
  double max_violation = 0.0;
  int monotonicity_violations = 0;  // a sampled gain below -1e-9
};

// Samples (S, T, p) with S subset of T and p outside T. Throws ParameterError
// when |P| < 3.
AuditResult submodularity_audit(
  const Scorer & scorer, std::span<const int> candidates, int n_samples, std::uint64_t seed);

}  // namespace rlplace

#endif  // RLPLACE__OPTIMIZER_HPP_
