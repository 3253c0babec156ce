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

// Feature-map layouts in DRAM and the port-width / row-buffer cost of
// streaming a rectangular footprint out of a tensor stored in a layout.

#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <tuple>
#include <string>
#include <vector>

#include "pimdse/error.hpp"

namespace pimdse {

enum class LayoutOrder { BCHW, BHWC };
enum class GroupDim { none, C, W };

// Flattening order plus optional grouping: grouping dimension X by g splits
// X into (X/g, g) and moves the g-sized part to the fastest position.
struct DataLayout {
  LayoutOrder order = LayoutOrder::BCHW;
  GroupDim group_dim = GroupDim::none;
  int group_factor = 1;

  static DataLayout bchw() { return {}; }
  static DataLayout bhwc() { return {LayoutOrder::BHWC, GroupDim::none, 1}; }
  static DataLayout grouped(LayoutOrder o, GroupDim d, int g) {
    if (g == 1) return {o, GroupDim::none, 1};
    return {o, d, g};
  }

  bool valid() const { return (group_factor == 1) == (group_dim == GroupDim::none) && group_factor >= 1; }

  friend bool operator==(const DataLayout&, const DataLayout&) = default;
  friend bool operator<(const DataLayout& a, const DataLayout& b) {
    return std::tuple(a.order, a.group_dim, a.group_factor) <
           std::tuple(b.order, b.group_dim, b.group_factor);
  }
};

inline std::string to_string(const DataLayout& dl) {
  std::string s = dl.order == LayoutOrder::BCHW ? "BCHW" : "BHWC";
  if (dl.group_dim != GroupDim::none)
    s += std::string("[") + (dl.group_dim == GroupDim::C ? "C" : "W") + std::to_string(dl.group_factor) + "]";
  return s;
}

inline DataLayout parse_layout(const std::string& s) {
  DataLayout dl;
  if (s.rfind("BCHW", 0) == 0 || s.rfind("NCHW", 0) == 0) dl.order = LayoutOrder::BCHW;
  else if (s.rfind("BHWC", 0) == 0 || s.rfind("NHWC", 0) == 0) dl.order = LayoutOrder::BHWC;
  else throw ParseError("layout '" + s + "': unknown order");
  if (s.size() == 4) return dl;
  if (s.size() < 7 || s[4] != '[' || s.back() != ']' || (s[5] != 'C' && s[5] != 'W'))
    throw ParseError("layout '" + s + "': expected ORDER[Cg] or ORDER[Wg]");
  int g = 0;
  try {
    g = std::stoi(s.substr(6, s.size() - 7));
  } catch (...) {
    throw ParseError("layout '" + s + "': bad group factor");
  }
  if (g < 1) throw ParseError("layout '" + s + "': bad group factor");
  return DataLayout::grouped(dl.order, s[5] == 'C' ? GroupDim::C : GroupDim::W, g);
}

struct TensorShape {
  std::int64_t b = 1, c = 1, h = 1, w = 1;
  std::int64_t elements() const { return b * c * h * w; }
};

// Half-open footprint [b0, b0+nb) x [c0, c0+nc) x [h0, h0+nh) x [w0, w0+nw).
struct Box {
  std::int64_t b0 = 0, nb = 1, c0 = 0, nc = 1, h0 = 0, nh = 1, w0 = 0, nw = 1;

  static Box whole(const TensorShape& s) { return {0, s.b, 0, s.c, 0, s.h, 0, s.w}; }
  std::int64_t elements() const { return nb * nc * nh * nw; }
};

struct AccessStats {
  std::int64_t accesses = 0;
  std::int64_t row_activations = 0;

  AccessStats& operator+=(const AccessStats& o) {
    accesses += o.accesses;
    row_activations += o.row_activations;
    return *this;
  }
  AccessStats scaled(std::int64_t n) const { return {accesses * n, row_activations * n}; }
};

namespace detail {

enum Dim { kB = 0, kC = 1, kH = 2, kW = 3 };

// Storage axes from slowest to fastest. `dim` is the tensor dimension an axis
// indexes; `inner` marks the fastest-moving part of a grouped dimension.
struct Axis {
  int dim;
  bool inner;
  std::int64_t extent;
};

inline std::vector<Axis> storage_axes(const TensorShape& s, const DataLayout& dl) {
  const std::array<std::int64_t, 4> ext{s.b, s.c, s.h, s.w};
  std::array<int, 4> order = dl.order == LayoutOrder::BCHW ? std::array<int, 4>{kB, kC, kH, kW}
                                                           : std::array<int, 4>{kB, kH, kW, kC};
  int gd = dl.group_dim == GroupDim::C ? kC : dl.group_dim == GroupDim::W ? kW : -1;
  std::int64_t g = dl.group_factor;
  std::vector<Axis> axes;
  for (int d : order) {
    if (d == gd) axes.push_back({d, false, (ext[d] + g - 1) / g});
    else axes.push_back({d, false, ext[d]});
  }
  if (gd >= 0) axes.push_back({gd, true, g});
  return axes;
}

struct Run {
  std::int64_t start;  // element index
  std::int64_t length;
};

// Footprint over the storage axes as a product of intervals.
using AxisIntervals = std::vector<std::pair<std::int64_t, std::int64_t>>;  // (start, count)

inline void emit_runs(const std::vector<Axis>& axes, const AxisIntervals& iv, std::vector<Run>& out) {
  const std::size_t m = axes.size();
  // Largest suffix k.. such that every axis after k is fully covered.
  std::size_t k = m - 1;
  while (k > 0 && iv[k].first == 0 && iv[k].second == axes[k].extent) --k;
  std::vector<std::int64_t> stride(m, 1);
  for (std::size_t i = m - 1; i > 0; --i) stride[i - 1] = stride[i] * axes[i].extent;
  const std::int64_t run_len = iv[k].second * stride[k];
  std::int64_t base = 0;
  for (std::size_t i = 0; i < m; ++i) base += iv[i].first * stride[i];
  // Iterate the outer axes 0..k-1 as an odometer.
  std::vector<std::int64_t> idx(k, 0);
  while (true) {
    std::int64_t start = base;
    for (std::size_t i = 0; i < k; ++i) start += idx[i] * stride[i];
    out.push_back({start, run_len});
    std::size_t i = k;
    while (i > 0) {
      --i;
      if (++idx[i] < iv[i].second) break;
      idx[i] = 0;
      if (i == 0) return;
    }
    if (k == 0) return;
  }
}

}  // namespace detail

// Counts DRAM accesses and row activations for streaming `box` out of a
// tensor of `shape` stored in `layout`. Each maximal run of consecutive
// addresses is fetched as the port-aligned words it touches; runs are visited
// in address order and a row activation is charged whenever a word lies
// outside the currently open row. The tensor starts at a row boundary.
inline AccessStats stream_box(const TensorShape& shape, const Box& box, const DataLayout& layout,
                              int elem_bits, std::int64_t port_bits, std::int64_t row_bytes) {
  if (!layout.valid()) throw ConfigError("invalid layout " + to_string(layout));
  if (box.nb <= 0 || box.nc <= 0 || box.nh <= 0 || box.nw <= 0) return {};
  auto axes = detail::storage_axes(shape, layout);
  const std::array<std::int64_t, 4> start{box.b0, box.c0, box.h0, box.w0};
  const std::array<std::int64_t, 4> count{box.nb, box.nc, box.nh, box.nw};

  int gd = -1;
  for (const auto& a : axes)
    if (a.inner) gd = a.dim;
  const std::int64_t g = layout.group_factor;

  // A grouped dimension's interval is split into group-aligned pieces so each
  // piece is a product of per-axis intervals.
  std::vector<std::pair<std::int64_t, std::int64_t>> pieces;  // (start, count) along gd
  if (gd >= 0) {
    std::int64_t s = start[gd], e = start[gd] + count[gd];
    while (s < e) {
      std::int64_t group_end = (s / g + 1) * g;
      if (s % g == 0 && e - s >= g) {
        std::int64_t full_end = s + ((e - s) / g) * g;
        pieces.push_back({s, full_end - s});
        s = full_end;
      } else {
        std::int64_t pe = std::min(e, group_end);
        pieces.push_back({s, pe - s});
        s = pe;
      }
    }
  } else {
    pieces.push_back({0, 0});
  }

  std::vector<detail::Run> runs;
  for (const auto& [ps, pc] : pieces) {
    detail::AxisIntervals iv;
    for (const auto& a : axes) {
      if (a.dim != gd) {
        iv.push_back({start[a.dim], count[a.dim]});
      } else if (!a.inner) {
        iv.push_back({ps / g, (ps % g == 0 && pc >= g) ? pc / g : 1});
      } else {
        iv.push_back((ps % g == 0 && pc >= g) ? std::pair<std::int64_t, std::int64_t>{0, g}
                                               : std::pair<std::int64_t, std::int64_t>{ps % g, pc});
      }
    }
    detail::emit_runs(axes, iv, runs);
  }
  std::sort(runs.begin(), runs.end(), [](const auto& a, const auto& b) { return a.start < b.start; });
  // Pieces can abut in address order; merge them back into maximal runs.
  std::vector<detail::Run> merged;
  for (const auto& r : runs) {
    if (!merged.empty() && merged.back().start + merged.back().length == r.start)
      merged.back().length += r.length;
    else
      merged.push_back(r);
  }

  AccessStats st;
  std::int64_t open_row = -1;
  const std::int64_t row_bits = row_bytes * 8;
  for (const auto& r : merged) {
    std::int64_t first_word = r.start * elem_bits / port_bits;
    std::int64_t last_word = ((r.start + r.length) * elem_bits - 1) / port_bits;
    st.accesses += last_word - first_word + 1;
    std::int64_t first_row = first_word * port_bits / row_bits;
    std::int64_t last_row = last_word * port_bits / row_bits;
    st.row_activations += last_row - first_row + 1 - (first_row == open_row ? 1 : 0);
    open_row = last_row;
  }
  return st;
}

// Sequential stream of `bytes` from a row boundary.
inline AccessStats stream_sequential(std::int64_t bytes, std::int64_t port_bits, std::int64_t row_bytes) {
  if (bytes <= 0) return {};
  std::int64_t bits = bytes * 8;
  return {(bits + port_bits - 1) / port_bits, (bytes + row_bytes - 1) / row_bytes};
}

// Layout choices the optimizers enumerate: both orders, ungrouped or grouped
// along C or W with power-of-two factors that fit the DRAM port.
inline std::vector<DataLayout> layout_choices(int elem_bits, std::int64_t port_bits, int max_group = 16) {
  std::vector<DataLayout> out;
  for (auto order : {LayoutOrder::BCHW, LayoutOrder::BHWC}) {
    out.push_back({order, GroupDim::none, 1});
    for (auto gd : {GroupDim::C, GroupDim::W}) {
      for (int g = 2; g <= max_group && std::int64_t{g} * elem_bits <= port_bits; g *= 2)
        out.push_back({order, gd, g});
    }
  }
  return out;
}

}  // namespace pimdse
