// Copyright 2026 The pimdse Authors.
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

// Random instance generators shared by unit and acceptance tests.

#pragma once

#include <algorithm>
#include <random>
#include <vector>

#include "pimdse/scheduler.hpp"

namespace testing_support {

struct SharingInstance {
  pimdse::Mesh mesh{1, 1};
  std::vector<pimdse::SharingSet> sets;
};

// 1-2 sets of 2..max_members distinct nodes on a mesh of at most 4x4.
inline SharingInstance random_sharing_instance(std::mt19937_64& rng, int max_members = 7) {
  auto uni = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  int rows = uni(1, 4), cols = uni(1, 4);
  while (rows * cols < 2) {
    rows = uni(1, 4);
    cols = uni(1, 4);
  }
  SharingInstance inst{pimdse::Mesh(rows, cols, 64), {}};
  int n_sets = uni(1, 2);
  for (int s = 0; s < n_sets; ++s) {
    std::vector<int> ids(static_cast<std::size_t>(rows * cols));
    for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = static_cast<int>(i);
    std::shuffle(ids.begin(), ids.end(), rng);
    int n = uni(2, std::min(max_members, rows * cols));
    pimdse::SharingSet set;
    for (int i = 0; i < n; ++i) set.members.push_back(inst.mesh.coord(ids[static_cast<std::size_t>(i)]));
    set.chunk_bits = 64 * uni(1, 8);
    set.payload = s == 0 ? pimdse::Payload::input : pimdse::Payload::weight;
    inst.sets.push_back(std::move(set));
  }
  return inst;
}

// Sets of `members` nodes interleaved with the given stride: set (i, j)
// holds the nodes (i + stride * a, j + stride * b).
inline std::vector<pimdse::SharingSet> interleaved_sets(int rows, int cols, int stride, std::int64_t chunk_bits) {
  std::vector<pimdse::SharingSet> sets;
  for (int i = 0; i < stride; ++i)
    for (int j = 0; j < stride; ++j) {
      pimdse::SharingSet s;
      for (int r = i; r < rows; r += stride)
        for (int c = j; c < cols; c += stride) s.members.push_back({r, c});
      s.chunk_bits = chunk_bits;
      sets.push_back(std::move(s));
    }
  return sets;
}

}  // namespace testing_support
