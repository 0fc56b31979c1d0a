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

#ifndef RLPLACE_TESTS__FIXTURES_HPP_
#define RLPLACE_TESTS__FIXTURES_HPP_

#include <filesystem>
#include <numeric>
#include <string>
#include <vector>

#include "rlplace/scene.hpp"

namespace fixture
{

inline rlplace::Scenario small_scene(std::uint64_t seed, int n_mounts = 6, int n_frames = 6)
{
  rlplace::SceneParams p;
  p.n_mounts = n_mounts;
  p.n_vehicles = 10;
  p.n_frames = n_frames;
  return rlplace::generate_scene(seed, p);
}

inline std::vector<int> iota_ids(int n)
{
  std::vector<int> ids(static_cast<std::size_t>(n));
  std::iota(ids.begin(), ids.end(), 0);
  return ids;
}

// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch(const std::string & name)
{
  const auto dir = std::filesystem::temp_directory_path() / ("rlplace_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace fixture

#endif  // RLPLACE_TESTS__FIXTURES_HPP_
