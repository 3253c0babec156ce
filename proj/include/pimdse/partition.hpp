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

// Regions of the node array, per-layer loop partitioning and the placement
// of part-layers onto nodes.

#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <string>
#include <tuple>
#include <vector>

#include "pimdse/error.hpp"
#include "pimdse/noc.hpp"
#include "pimdse/workload.hpp"

namespace pimdse {

enum class Loop { B = 0, P = 1, Q = 2, K = 3, C = 4 };
inline constexpr std::array<Loop, 5> kAllLoops{Loop::B, Loop::P, Loop::Q, Loop::K, Loop::C};

inline char loop_char(Loop l) { return "BPQKC"[static_cast<int>(l)]; }

// Loop nest of a (part-)layer. in_h / in_w hold the ifmap extent the part
// actually reads, which for a partitioned P or Q includes the halo.
struct LoopBounds {
  std::int64_t B = 1, K = 1, C = 1, P = 1, Q = 1, HK = 1, WK = 1;
  int stride_h = 1, stride_w = 1;
  std::int64_t in_h = 1, in_w = 1;
  int data_bits = 16;
  int psum_bits = 32;

  static LoopBounds of(const Layer& l) {
    LoopBounds b;
    b.B = l.batch;
    b.K = l.out_channels;
    b.C = l.in_channels;
    b.P = l.out_h;
    b.Q = l.out_w;
    b.HK = l.kernel_h;
    b.WK = l.kernel_w;
    b.stride_h = l.stride_h;
    b.stride_w = l.stride_w;
    b.in_h = std::max<std::int64_t>(1, l.in_h());
    b.in_w = std::max<std::int64_t>(1, l.in_w());
    b.data_bits = l.data_bits;
    b.psum_bits = l.psum_bits;
    return b;
  }

  std::int64_t get(Loop l) const {
    switch (l) {
      case Loop::B: return B;
      case Loop::P: return P;
      case Loop::Q: return Q;
      case Loop::K: return K;
      case Loop::C: return C;
    }
    return 1;
  }

  std::int64_t macs() const { return B * K * C * P * Q * HK * WK; }
  std::int64_t weight_count() const { return K * C * HK * WK; }
  std::int64_t ifmap_count() const { return B * C * in_h * in_w; }
  std::int64_t ofmap_count() const { return B * K * P * Q; }
  std::int64_t weight_bytes() const { return weight_count() * data_bits / 8; }
  std::int64_t ifmap_bytes() const { return ifmap_count() * data_bits / 8; }
  std::int64_t ofmap_bytes() const { return ofmap_count() * data_bits / 8; }
  std::int64_t psum_bytes() const { return ofmap_count() * psum_bits / 8; }

  // Rows of ifmap read to produce `p` consecutive output rows.
  std::int64_t rows_for(std::int64_t p) const { return std::min((p - 1) * stride_h + HK, in_h); }
  std::int64_t cols_for(std::int64_t q) const { return std::min((q - 1) * stride_w + WK, in_w); }
};

inline std::int64_t ceil_div(std::int64_t a, std::int64_t b) { return (a + b - 1) / b; }

struct Region {
  int h_pos = 0, w_pos = 0;
  int h_shape = 1, w_shape = 1;

  int nodes() const { return h_shape * w_shape; }
  bool contains(const Coord& c) const {
    return c.row >= h_pos && c.row < h_pos + h_shape && c.col >= w_pos && c.col < w_pos + w_shape;
  }
  friend bool operator==(const Region&, const Region&) = default;
};

inline std::string to_string(const Region& r) {
  return "(" + std::to_string(r.h_pos) + "," + std::to_string(r.w_pos) + ")+" + std::to_string(r.h_shape) +
         "x" + std::to_string(r.w_shape);
}

// Partition counts (Ph, Pw) per loop plus the placement order. Node rows of
// a region are split among the loops as a mixed-radix number whose most
// significant digit belongs to order[0]; likewise for columns.
struct LayerMapping {
  std::array<int, 5> ph{1, 1, 1, 1, 1};
  std::array<int, 5> pw{1, 1, 1, 1, 1};
  std::array<Loop, 5> order = kAllLoops;

  int h(Loop l) const { return ph[static_cast<int>(l)]; }
  int w(Loop l) const { return pw[static_cast<int>(l)]; }
  int parts(Loop l) const { return h(l) * w(l); }
  int h_product() const { return ph[0] * ph[1] * ph[2] * ph[3] * ph[4]; }
  int w_product() const { return pw[0] * pw[1] * pw[2] * pw[3] * pw[4]; }

  std::string order_string() const {
    std::string s;
    for (Loop l : order) s += loop_char(l);
    return s;
  }

  // Stable textual encoding; also the tie-break key.
  std::string encode() const {
    std::string s;
    for (Loop l : kAllLoops)
      s += std::string(1, loop_char(l)) + "(" + std::to_string(h(l)) + "," + std::to_string(w(l)) + ")";
    return s + "/" + order_string();
  }

  friend bool operator==(const LayerMapping&, const LayerMapping&) = default;
};

inline Loop parse_loop(char c) {
  switch (c) {
    case 'B': return Loop::B;
    case 'P': return Loop::P;
    case 'Q': return Loop::Q;
    case 'K': return Loop::K;
    case 'C': return Loop::C;
  }
  throw ParseError(std::string("unknown loop '") + c + "'");
}

inline bool lm_fits(const LayerMapping& lm, const Region& r) {
  return lm.h_product() == r.h_shape && lm.w_product() == r.w_shape;
}

// Bounds of one part-layer; ceiling division pads uneven splits.
inline LoopBounds part_bounds(const LoopBounds& full, const LayerMapping& lm) {
  LoopBounds p = full;
  p.B = ceil_div(full.B, lm.parts(Loop::B));
  p.K = ceil_div(full.K, lm.parts(Loop::K));
  p.C = ceil_div(full.C, lm.parts(Loop::C));
  p.P = ceil_div(full.P, lm.parts(Loop::P));
  p.Q = ceil_div(full.Q, lm.parts(Loop::Q));
  p.in_h = full.rows_for(p.P);
  p.in_w = full.cols_for(p.Q);
  return p;
}

// Partition index of each loop for the node at region-local (h, w).
inline std::array<int, 5> part_indices(const LayerMapping& lm, int local_h, int local_w) {
  std::array<int, 5> idx{};
  int rh = local_h, rw = local_w;
  std::array<int, 5> dh{}, dw{};
  for (int i = 4; i >= 0; --i) {
    int li = static_cast<int>(lm.order[static_cast<std::size_t>(i)]);
    dh[li] = rh % lm.ph[li];
    rh /= lm.ph[li];
    dw[li] = rw % lm.pw[li];
    rw /= lm.pw[li];
  }
  for (int li = 0; li < 5; ++li) idx[li] = dh[li] * lm.pw[li] + dw[li];
  return idx;
}

struct NodePart {
  Coord node;                // absolute coordinate
  std::array<int, 5> index;  // per-loop partition index
};

inline std::vector<NodePart> place(const LayerMapping& lm, const Region& r) {
  if (!lm_fits(lm, r)) throw ConfigError("layer mapping " + lm.encode() + " does not fit region " + to_string(r));
  std::vector<NodePart> out;
  out.reserve(static_cast<std::size_t>(r.nodes()));
  for (int h = 0; h < r.h_shape; ++h)
    for (int w = 0; w < r.w_shape; ++w) out.push_back({{r.h_pos + h, r.w_pos + w}, part_indices(lm, h, w)});
  return out;
}

}  // namespace pimdse
