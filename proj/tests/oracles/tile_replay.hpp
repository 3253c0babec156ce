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

// Walks the tile loop nest (K tiles, then B/P/Q tiles, then C tiles) with
// one resident tile per buffer and counts the bytes each miss fetches.

#pragma once

#include <algorithm>
#include <array>
#include <cstdint>

#include "pimdse/costmodel.hpp"

namespace oracle {

struct TileTraffic {
  std::int64_t ifmap = 0, weight = 0, ofmap = 0;
};

inline TileTraffic replay_tiles(const pimdse::LoopBounds& b, const pimdse::Tiling& t) {
  auto span = [](std::int64_t len, std::int64_t tile, std::int64_t i) { return std::min(tile, len - i * tile); };
  auto tiles = [](std::int64_t len, std::int64_t tile) { return (len + tile - 1) / tile; };
  auto bytes = [&](std::int64_t elems) { return (elems * b.data_bits + 7) / 8; };
  TileTraffic tr;
  std::array<std::int64_t, 4> in_res{-1, -1, -1, -1};
  std::array<std::int64_t, 2> w_res{-1, -1};
  for (std::int64_t k = 0; k < tiles(b.K, t.K); ++k)
    for (std::int64_t bb = 0; bb < tiles(b.B, t.B); ++bb)
      for (std::int64_t p = 0; p < tiles(b.P, t.P); ++p)
        for (std::int64_t q = 0; q < tiles(b.Q, t.Q); ++q) {
          for (std::int64_t c = 0; c < tiles(b.C, t.C); ++c) {
            std::array<std::int64_t, 2> w_id{k, c};
            if (w_id != w_res) {
              tr.weight += bytes(span(b.K, t.K, k) * span(b.C, t.C, c) * b.HK * b.WK);
              w_res = w_id;
            }
            std::array<std::int64_t, 4> in_id{bb, p, q, c};
            if (in_id != in_res) {
              std::int64_t rows = std::min((span(b.P, t.P, p) - 1) * b.stride_h + b.HK, b.in_h);
              std::int64_t cols = std::min((span(b.Q, t.Q, q) - 1) * b.stride_w + b.WK, b.in_w);
              tr.ifmap += bytes(span(b.B, t.B, bb) * span(b.C, t.C, c) * rows * cols);
              in_res = in_id;
            }
          }
          tr.ofmap += bytes(span(b.B, t.B, bb) * span(b.K, t.K, k) * span(b.P, t.P, p) * span(b.Q, t.Q, q));
        }
  return tr;
}

}  // namespace oracle
