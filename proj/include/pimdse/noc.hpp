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

// 2-D mesh with XY routing and per-directed-link load accounting.

#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <string>
#include <vector>

#include "pimdse/error.hpp"

namespace pimdse {

struct Coord {
  int row = 0;
  int col = 0;

  friend bool operator==(const Coord&, const Coord&) = default;
  friend auto operator<=>(const Coord&, const Coord&) = default;
};

inline int manhattan(const Coord& a, const Coord& b) { return std::abs(a.row - b.row) + std::abs(a.col - b.col); }

enum class Dir { east = 0, west = 1, south = 2, north = 3 };

class Mesh {
 public:
  Mesh(int rows, int cols, std::int64_t flit_bits = 64) : rows_(rows), cols_(cols), flit_bits_(flit_bits) {
    if (rows < 1 || cols < 1) throw ConfigError("mesh must have at least one node");
    if (flit_bits < 1) throw ConfigError("flit width must be positive");
  }

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  std::int64_t flit_bits() const { return flit_bits_; }
  int node_count() const { return rows_ * cols_; }
  bool contains(const Coord& c) const { return c.row >= 0 && c.row < rows_ && c.col >= 0 && c.col < cols_; }
  int node_id(const Coord& c) const { return c.row * cols_ + c.col; }
  Coord coord(int id) const { return {id / cols_, id % cols_}; }

  // Link ids are node_id * 4 + direction of the outgoing port. Ports on the
  // mesh boundary exist in the id space but never carry traffic.
  int link_slots() const { return node_count() * 4; }
  int link_id(const Coord& from, Dir d) const { return node_id(from) * 4 + static_cast<int>(d); }
  Coord link_source(int link) const { return coord(link / 4); }
  Dir link_dir(int link) const { return static_cast<Dir>(link % 4); }

  bool link_exists(int link) const {
    Coord s = link_source(link);
    switch (link_dir(link)) {
      case Dir::east: return s.col + 1 < cols_;
      case Dir::west: return s.col > 0;
      case Dir::south: return s.row + 1 < rows_;
      case Dir::north: return s.row > 0;
    }
    return false;
  }

  std::vector<int> links() const {
    std::vector<int> out;
    for (int l = 0; l < link_slots(); ++l)
      if (link_exists(l)) out.push_back(l);
    return out;
  }

  // XY dimension-order route: along the row (column index) first, then
  // along the column (row index).
  std::vector<int> route(const Coord& a, const Coord& b) const {
    check(a);
    check(b);
    std::vector<int> path;
    path.reserve(static_cast<std::size_t>(manhattan(a, b)));
    Coord cur = a;
    while (cur.col != b.col) {
      Dir d = b.col > cur.col ? Dir::east : Dir::west;
      path.push_back(link_id(cur, d));
      cur.col += d == Dir::east ? 1 : -1;
    }
    while (cur.row != b.row) {
      Dir d = b.row > cur.row ? Dir::south : Dir::north;
      path.push_back(link_id(cur, d));
      cur.row += d == Dir::south ? 1 : -1;
    }
    return path;
  }

  int path_indicator(const Coord& a, const Coord& b, int link) const {
    auto p = route(a, b);
    return std::find(p.begin(), p.end(), link) != p.end() ? 1 : 0;
  }

 private:
  void check(const Coord& c) const {
    if (!contains(c))
      throw ConfigError("coordinate (" + std::to_string(c.row) + "," + std::to_string(c.col) + ") outside " +
                        std::to_string(rows_) + "x" + std::to_string(cols_) + " mesh");
  }

  int rows_;
  int cols_;
  std::int64_t flit_bits_;
};

// Bits carried per directed link.
class LinkLoadMap {
 public:
  explicit LinkLoadMap(int slots = 0) : load_(static_cast<std::size_t>(slots), 0) {}

  void add(int link, std::int64_t bits) { load_[static_cast<std::size_t>(link)] += bits; }
  void add_path(const std::vector<int>& path, std::int64_t bits) {
    for (int l : path) add(l, bits);
  }
  void add_transfer(const Mesh& m, const Coord& a, const Coord& b, std::int64_t bits) {
    add_path(m.route(a, b), bits);
  }
  LinkLoadMap& operator+=(const LinkLoadMap& o) {
    if (load_.size() < o.load_.size()) load_.resize(o.load_.size(), 0);
    for (std::size_t i = 0; i < o.load_.size(); ++i) load_[i] += o.load_[i];
    return *this;
  }

  std::int64_t at(int link) const { return load_[static_cast<std::size_t>(link)]; }
  std::int64_t max_load() const { return load_.empty() ? 0 : *std::max_element(load_.begin(), load_.end()); }
  std::int64_t total() const {
    std::int64_t s = 0;
    for (auto v : load_) s += v;
    return s;
  }
  const std::vector<std::int64_t>& values() const { return load_; }
  int slots() const { return static_cast<int>(load_.size()); }

 private:
  std::vector<std::int64_t> load_;
};

struct TransferCost {
  std::int64_t cycles = 0;
  double pj = 0.0;
};

// Latency follows the heaviest link; energy charges every bit on every hop.
// The summed link loads already equal bits times hops.
inline TransferCost transfer_metrics(const LinkLoadMap& loads, std::int64_t flit_bits, double pj_per_bit_hop) {
  std::int64_t mx = loads.max_load();
  return {(mx + flit_bits - 1) / flit_bits, static_cast<double>(loads.total()) * pj_per_bit_hop};
}

}  // namespace pimdse
