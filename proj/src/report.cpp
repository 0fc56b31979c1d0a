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

#include <cmath>
#include <fstream>
#include <map>
#include <numeric>

#include <fmt/format.h>

#include "rlplace/cli.hpp"
#include "rlplace/errors.hpp"

namespace rlplace
{

namespace
{

std::ofstream open_for_write(const std::filesystem::path & path)
{
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw IoError("cannot open '" + path.string() + "' for writing");
  }
  return out;
}

// Mean, or mean ± sample std when there is more than one value.
std::string summarize(const std::vector<double> & values)
{
  const double n = static_cast<double>(values.size());
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  if (values.size() < 2) {
    return fmt::format("{:.3f}", mean);
  }
  double ss = 0.0;
  for (double v : values) {
    ss += (v - mean) * (v - mean);
  }
  return fmt::format("{:.3f}±{:.3f}", mean, std::sqrt(ss / (n - 1.0)));
}

std::string join_frames(const std::vector<int> & frames)
{
  std::string out;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    out += (i ? ";" : "") + std::to_string(frames[i]);
  }
  return out;
}

}  // namespace

void emit_report(std::span<const ReportEntry> entries, const std::filesystem::path & out_dir)
{
  if (entries.empty()) {
    throw ParameterError("emit_report needs at least one result");
  }
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) {
    throw IoError("cannot create '" + out_dir.string() + "': " + ec.message());
  }

  auto csv = open_for_write(out_dir / "report.csv");
  csv << "method,M,seed,ap_03,ap_05,ap_07,frames,runtime_ms\n";
  for (const auto & e : entries) {
    csv << fmt::format("{},{},{},{:.6f},{:.6f},{:.6f},{},{:.1f}\n", e.method, e.m, e.seed,
      e.result.ap_03, e.result.ap_05, e.result.ap_07, join_frames(e.result.frames), e.runtime_ms);
  }
  if (!csv) {
    throw IoError("failed writing report.csv");
  }

  // Rows keep first-appearance order of (method, M).
  std::vector<std::pair<std::string, int>> order;
  std::map<std::pair<std::string, int>, std::array<std::vector<double>, 3>> groups;
  for (const auto & e : entries) {
    const auto key = std::make_pair(e.method, e.m);
    auto [it, inserted] = groups.try_emplace(key);
    if (inserted) {
      order.push_back(key);
    }
    it->second[0].push_back(e.result.ap_03);
    it->second[1].push_back(e.result.ap_05);
    it->second[2].push_back(e.result.ap_07);
  }

  auto md = open_for_write(out_dir / "report.md");
  md << "| Method | M | AP@0.3 | AP@0.5 | AP@0.7 | runs |\n";
  md << "|---|---|---|---|---|---|\n";
  for (const auto & key : order) {
    const auto & g = groups.at(key);
    md << fmt::format("| {} | {} | {} | {} | {} | {} |\n", key.first, key.second, summarize(g[0]),
      summarize(g[1]), summarize(g[2]), g[0].size());
  }
  if (!md) {
    throw IoError("failed writing report.md");
  }
}

}  // namespace rlplace
