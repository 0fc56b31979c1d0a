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

#ifndef RLPLACE__CLI_HPP_
#define RLPLACE__CLI_HPP_

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "rlplace/eval.hpp"
#include "rlplace/optimizer.hpp"
#include "rlplace/perception.hpp"
#include "rlplace/scene.hpp"

namespace rlplace
{

enum class Method { kGreedy, kBrute, kRandom, kCovDens };

std::string to_string(Method method);
Method method_from_string(const std::string & name);

struct RunConfig
{
  std::string command;  // gen-scene, simulate, train, optimize, eval, audit, report
  std::filesystem::path scenario;
  std::filesystem::path out = "runs";
  std::filesystem::path model;  // optional; trained inline when empty
  std::uint64_t seed = 0;
  int m = 2;
  Method method = Method::kGreedy;
  ScorerMode scorer = ScorerMode::kFused;
  // A bare count picks that many evenly spaced frames; a comma list is explicit.
  std::string frames = "4";
  std::vector<int> placement;  // eval only; empty means "use --method"
  FusionMode fusion = FusionMode::kEarly;
  TrainConfig train;
  int train_samples = 8;
  int audit_samples = 200;
  int random_repeats = 3;
  std::uint64_t budget = kDefaultBruteForceBudget;
  SceneParams scene;  // gen-scene only

  // Throws ParameterError.
  void validate() const;
};

std::vector<std::string> pipeline_commands();

// Resolves --frames against a scenario with n_frames frames.
std::vector<int> resolve_frames(const std::string & spec, int n_frames);

// Fully resolved config as canonical JSON (sorted keys, no output path).
std::string config_to_json(const RunConfig & cfg);

// FNV-1a 64 over the canonical config plus the scenario file bytes, as 16 hex digits.
std::string config_hash(const RunConfig & cfg);

std::filesystem::path run_directory(const RunConfig & cfg);

struct ReportEntry
{
  std::string method;  // "Random", "Ours", "CovDens", "Upper bound", ...
  int m = 0;
  std::uint64_t seed = 0;
  APResult result;
  double runtime_ms = 0.0;
};

// Writes report.csv (one row per entry) and report.md (one row per method and
// M; repeated entries show mean ± sample std). Throws ParameterError on empty
// input and IoError when a file cannot be written.
void emit_report(std::span<const ReportEntry> entries, const std::filesystem::path & out_dir);

// Runs one subcommand. Returns 0 on success; on any library error prints one
// diagnostic line to stderr and returns 1.
int run_pipeline(const RunConfig & cfg);

// The same, but lets errors propagate; returns the run directory.
std::filesystem::path execute(const RunConfig & cfg);

}  // namespace rlplace

#endif  // RLPLACE__CLI_HPP_
