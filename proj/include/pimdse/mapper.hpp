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

// Mapping of a DNN onto the node array: region candidates per segment,
// per-layer partitioning and weight-replication candidates, capacity-aware
// selection by dynamic programming, data-layout assignment, and the
// alternating driver. Also a whole-array baseline mapper.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "pimdse/arch.hpp"
#include "pimdse/costmodel.hpp"
#include "pimdse/error.hpp"
#include "pimdse/layout.hpp"
#include "pimdse/noc.hpp"
#include "pimdse/partition.hpp"
#include "pimdse/scheduler.hpp"
#include "pimdse/workload.hpp"

namespace pimdse {

// Regions tiling the array plus the region index of every branch.
struct SegmentMapping {
  std::vector<Region> regions;
  std::vector<int> branch_region;

  friend bool operator==(const SegmentMapping&, const SegmentMapping&) = default;
};

struct CandidateEntry {
  int wr = 1;
  LayerMapping lm;
  std::int64_t perf = 0;        // cycles
  std::int64_t size_bytes = 0;  // weights stored on the fullest node
};

// ---- segment mapping candidates ----------------------------------------

namespace detail {

// Branch groups for `groups` regions: the heaviest branches seed the groups
// in order, the rest go to the lightest group (ties to the higher index).
inline std::vector<int> group_branches(const std::vector<std::int64_t>& ops, int groups) {
  std::vector<int> order(ops.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return ops[static_cast<std::size_t>(a)] > ops[static_cast<std::size_t>(b)]; });
  std::vector<int> assign(ops.size(), 0);
  std::vector<std::int64_t> load(static_cast<std::size_t>(groups), 0);
  for (std::size_t i = 0; i < order.size(); ++i) {
    int b = order[i];
    int g = 0;
    if (static_cast<int>(i) < groups) {
      g = static_cast<int>(i);
    } else {
      for (int k = 0; k < groups; ++k)
        if (load[static_cast<std::size_t>(k)] <= load[static_cast<std::size_t>(g)]) g = k;
    }
    assign[static_cast<std::size_t>(b)] = g;
    load[static_cast<std::size_t>(g)] += ops[static_cast<std::size_t>(b)];
  }
  return assign;
}

// Slicing-tree bisection: split the group list in half and cut the longer
// side (columns when square) in proportion to the halves' work.
inline bool slice(const Region& r, const std::vector<std::int64_t>& weight, std::size_t lo, std::size_t hi,
                  std::vector<Region>& out) {
  std::size_t n = hi - lo;
  if (n == 1) {
    out[lo] = r;
    return true;
  }
  if (static_cast<std::size_t>(r.nodes()) < n) return false;
  std::size_t mid = lo + n / 2;
  std::int64_t wl = 0, wt = 0;
  for (std::size_t i = lo; i < hi; ++i) {
    wt += std::max<std::int64_t>(1, weight[i]);
    if (i < mid) wl += std::max<std::int64_t>(1, weight[i]);
  }
  const std::int64_t need_l = static_cast<std::int64_t>(mid - lo), need_r = static_cast<std::int64_t>(hi - mid);
  for (int attempt = 0; attempt < 2; ++attempt) {
    bool vertical = (r.w_shape >= r.h_shape) == (attempt == 0);
    int len = vertical ? r.w_shape : r.h_shape;
    int other = vertical ? r.h_shape : r.w_shape;
    if (len < 2) continue;
    int min_cut = static_cast<int>(ceil_div(need_l, other));
    int max_cut = len - static_cast<int>(ceil_div(need_r, other));
    if (min_cut > max_cut || min_cut < 1 || max_cut > len - 1) continue;
    int cut = static_cast<int>(std::lround(static_cast<double>(len) * static_cast<double>(wl) / static_cast<double>(wt)));
    cut = std::clamp(cut, min_cut, max_cut);
    Region a = r, b = r;
    if (vertical) {
      a.w_shape = cut;
      b.w_pos = r.w_pos + cut;
      b.w_shape = r.w_shape - cut;
    } else {
      a.h_shape = cut;
      b.h_pos = r.h_pos + cut;
      b.h_shape = r.h_shape - cut;
    }
    if (slice(a, weight, lo, mid, out) && slice(b, weight, mid, hi, out)) return true;
  }
  return false;
}

}  // namespace detail

// One candidate per region count 1..branches whose regions can be carved
// from the array.
inline std::vector<SegmentMapping> gen_sm_candidates(std::size_t branches, int rows, int cols,
                                                     const std::vector<std::int64_t>& ops_per_branch) {
  if (branches == 0) throw GraphError("empty segment");
  std::vector<SegmentMapping> out;
  for (int n_reg = 1; n_reg <= static_cast<int>(branches); ++n_reg) {
    if (n_reg > rows * cols) break;
    SegmentMapping sm;
    sm.branch_region = detail::group_branches(ops_per_branch, n_reg);
    std::vector<std::int64_t> weight(static_cast<std::size_t>(n_reg), 0);
    for (std::size_t b = 0; b < branches; ++b)
      weight[static_cast<std::size_t>(sm.branch_region[b])] += ops_per_branch[b];
    sm.regions.assign(static_cast<std::size_t>(n_reg), Region{});
    if (!detail::slice(Region{0, 0, rows, cols}, weight, 0, static_cast<std::size_t>(n_reg), sm.regions)) continue;
    if (std::find(out.begin(), out.end(), sm) == out.end()) out.push_back(std::move(sm));
  }
  return out;
}

inline std::vector<SegmentMapping> gen_sm_candidates(const Segment& seg, const DnnGraph& g, int rows, int cols) {
  std::vector<std::int64_t> ops;
  for (const auto& b : seg.branches) {
    std::int64_t s = 0;
    for (int id : b.layers) s += g.layer(id).macs();
    ops.push_back(s);
  }
  return gen_sm_candidates(seg.branches.size(), rows, cols, ops);
}

// ---- weight replication schedule ------------------------------------------

// Geometric sweep from the node count down to 1.
inline std::vector<int> wr_schedule(int nodes, int n_can) {
  std::vector<int> out;
  if (nodes <= 1 || n_can <= 1) return {std::max(1, nodes)};
  for (int i = 0; i < n_can; ++i) {
    double e = 1.0 - static_cast<double>(i) / (n_can - 1);
    int v = static_cast<int>(std::lround(std::pow(static_cast<double>(nodes), e)));
    v = std::clamp(v, 1, nodes);
    if (out.empty() || out.back() != v) out.push_back(v);
  }
  if (out.back() != 1) out.push_back(1);
  return out;
}

// ---- partition enumeration -------------------------------------------------

namespace detail {

inline void factorizations(int n, int slot, std::array<int, 5>& cur, std::vector<std::array<int, 5>>& out) {
  if (slot == 4) {
    cur[4] = n;
    out.push_back(cur);
    return;
  }
  for (int d = 1; d <= n; ++d) {
    if (n % d) continue;
    cur[static_cast<std::size_t>(slot)] = d;
    factorizations(n / d, slot + 1, cur, out);
  }
}

inline const std::vector<std::array<int, 5>>& ordered_factorizations(int n) {
  static std::map<int, std::vector<std::array<int, 5>>> cache;
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;
  std::vector<std::array<int, 5>> out;
  std::array<int, 5> cur{};
  factorizations(n, 0, cur, out);
  return cache.emplace(n, std::move(out)).first->second;
}

// Placement orders that give distinct node assignments for the given sets
// of row-split and column-split loops; the first order in enumeration
// order represents each class.
inline const std::vector<std::array<Loop, 5>>& distinct_orders(int h_mask, int w_mask) {
  static std::map<int, std::vector<std::array<Loop, 5>>> cache;
  int key = h_mask * 32 + w_mask;
  auto it = cache.find(key);
  if (it != cache.end()) return it->second;
  std::array<int, 5> perm{0, 1, 2, 3, 4};
  std::vector<std::array<Loop, 5>> out;
  std::vector<std::pair<std::vector<int>, std::vector<int>>> seen;
  do {
    std::vector<int> hs, ws;
    for (int li : perm) {
      if (h_mask & (1 << li)) hs.push_back(li);
      if (w_mask & (1 << li)) ws.push_back(li);
    }
    auto sig = std::make_pair(hs, ws);
    if (std::find(seen.begin(), seen.end(), sig) != seen.end()) continue;
    seen.push_back(sig);
    std::array<Loop, 5> order{};
    for (std::size_t i = 0; i < 5; ++i) order[i] = static_cast<Loop>(perm[i]);
    out.push_back(order);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return cache.emplace(key, std::move(out)).first->second;
}

inline std::array<int, 15> encoding_key(const LayerMapping& lm) {
  std::array<int, 15> k{};
  for (std::size_t i = 0; i < 5; ++i) {
    k[i] = lm.ph[i];
    k[5 + i] = lm.pw[i];
    k[10 + i] = static_cast<int>(lm.order[i]);
  }
  return k;
}

}  // namespace detail

// Tie-break order for equal-cost mappings.
inline bool encoding_less(const LayerMapping& a, const LayerMapping& b) {
  return detail::encoding_key(a) < detail::encoding_key(b);
}

struct DlPair {
  DataLayout in;
  DataLayout out;
  friend bool operator==(const DlPair&, const DlPair&) = default;
};

struct MapperOptions {
  int iterations = 3;
  int n_can = 5;
  std::int64_t quantum_bytes = 64 * 1024;
  IlpOptions ilp;
  double alpha = 1.0;  // exponents used to rank the schemes of each iteration
  double beta = 1.0;
};

// Cost evaluation with memoisation for one hardware configuration.
class CostEngine {
 public:
  CostEngine(const DnnGraph& graph, const HwParams& hw, const HwConstraints& c, MapperOptions opt = {})
      : graph_(graph), hw_(hw), c_(c), opt_(opt), np_(derive_node_props(hw, c)) {
    for (const auto& l : graph.layers())
      if (l.kind == LayerKind::aux) {
        int host = graph.aux_host(l.id);
        if (host >= 0) extra_[host] += graph.aux_traffic_bytes(l.id);
      }
  }

  const HwParams& hw() const { return hw_; }
  const HwConstraints& constraints() const { return c_; }
  const NodeProps& node() const { return np_; }
  const MapperOptions& options() const { return opt_; }
  const DnnGraph& graph() const { return graph_; }
  Mesh mesh() const { return Mesh(hw_.node_rows, hw_.node_cols, np_.flit_bits); }
  std::int64_t extra_bytes(int layer_id) const {
    auto it = extra_.find(layer_id);
    return it == extra_.end() ? 0 : it->second;
  }

  // Per-node compute and DRAM phase of a layer under a mapping.
  const NodePhase& node_phase(const Layer& l, const LayerMapping& lm, int wr, const std::optional<DlPair>& dl,
                              int nodes) {
    LoopBounds part = part_bounds(LoopBounds::of(l), lm);
    int share = static_cast<int>(std::lround(1.0 / local_weight_fraction(lm, wr)));
    std::int64_t extra = ceil_div(extra_bytes(l.id), nodes);
    std::array<std::int64_t, 12> key{l.id, part.B, part.K, part.C, part.P, part.Q, share, extra, -1, -1, -1, -1};
    if (dl) {
      key[8] = static_cast<std::int64_t>(dl->in.order) * 100 + static_cast<std::int64_t>(dl->in.group_dim) * 20 + dl->in.group_factor;
      key[9] = static_cast<std::int64_t>(dl->out.order) * 100 + static_cast<std::int64_t>(dl->out.group_dim) * 20 + dl->out.group_factor;
    }
    auto it = phase_cache_.find(key);
    if (it != phase_cache_.end()) return it->second;
    std::optional<DataLayout> di, dout;
    if (dl) {
      di = dl->in;
      dout = dl->out;
    }
    return phase_cache_.emplace(key, pimdse::node_phase(part, hw_, c_, np_, 1.0 / share, di, dout, extra))
        .first->second;
  }

  // Lower bound on the NoC cycles of a mapping that holds for any cycle
  // choice: each cycle edge crosses at least one link.
  std::int64_t noc_lower_bound(const Layer& l, const LayerMapping& lm, int wr) const {
    LoopBounds full = LoopBounds::of(l), part = part_bounds(full, lm);
    std::int64_t pro = 0, epi = 0;
    int pk = lm.parts(Loop::K), pc = lm.parts(Loop::C);
    if (pk > 1) pro = std::max(pro, (pk - 1) * ceil_div(part.ifmap_count() * part.data_bits, pk));
    int n_cls = lm.parts(Loop::B) * lm.parts(Loop::P) * lm.parts(Loop::Q);
    if (wr < n_cls) {
      for (const auto& g : weight_groups(n_cls, wr)) {
        auto n = static_cast<std::int64_t>(g.size());
        if (n > 1) pro = std::max(pro, (n - 1) * ceil_div(part.weight_count() * part.data_bits, n));
      }
    }
    if (pc > 1) epi = (pc - 1) * ceil_div(part.ofmap_count() * part.psum_bits, pc);
    return ceil_div(pro, np_.flit_bits) + ceil_div(epi, np_.flit_bits);
  }

  // Snake-cycle estimate of the NoC phases, memoised per placement shape.
  NocPhase noc_estimate(const Layer& l, const LayerMapping& lm, int wr, const Region& region) {
    const Profile& prof = profile(lm, wr, region);
    LoopBounds part = part_bounds(LoopBounds::of(l), lm);
    double in_bits = static_cast<double>(part.ifmap_count() * part.data_bits);
    double w_bits = static_cast<double>(part.weight_count() * part.data_bits);
    double ps_bits = static_cast<double>(part.ofmap_count() * part.psum_bits);
    double pro = 0, epi = 0, hops = 0;
    for (const auto& e : prof.links) {
      pro = std::max(pro, e.in * in_bits + e.w * w_bits);
      epi = std::max(epi, e.ps * ps_bits);
      hops += (e.in * in_bits + e.w * w_bits) + e.ps * ps_bits;
    }
    NocPhase n;
    n.prologue_cycles = static_cast<std::int64_t>(std::ceil(pro / static_cast<double>(np_.flit_bits) - 1e-9));
    n.epilogue_cycles = static_cast<std::int64_t>(std::ceil(epi / static_cast<double>(np_.flit_bits) - 1e-9));
    n.pj = hops * c_.noc_pj_per_bit_hop;
    return n;
  }

  // Estimated cost of a layer, used to score candidates.
  CostReport estimate(const Layer& l, const LayerMapping& lm, int wr, const Region& region,
                      const std::optional<DlPair>& dl) {
    const NodePhase& ph = node_phase(l, lm, wr, dl, region.nodes());
    if (!ph.feasible) return combine(ph, {}, region.nodes());
    return combine(ph, noc_estimate(l, lm, wr, region), region.nodes());
  }

  // Exact evaluation used for reported schemes.
  CostReport evaluate(const Layer& l, const LayerMapping& lm, int wr, const Region& region, const DlPair& dl) {
    LayerCostOptions o;
    o.exact_noc = true;
    o.ilp = opt_.ilp;
    o.extra_dram_bytes = extra_bytes(l.id);
    return layer_cost(l, lm, wr, dl.in, dl.out, region, hw_, c_, o);
  }

 private:
  struct LinkUnits {
    double in = 0, w = 0, ps = 0;
  };
  struct Profile {
    std::vector<LinkUnits> links;  // only links with traffic
  };

  const Profile& profile(const LayerMapping& lm, int wr, const Region& region) {
    int n_cls = lm.parts(Loop::B) * lm.parts(Loop::P) * lm.parts(Loop::Q);
    int wr_eff = std::min(wr, n_cls);
    std::array<int, 18> key{};
    for (std::size_t i = 0; i < 5; ++i) {
      key[i] = lm.ph[i];
      key[5 + i] = lm.pw[i];
      key[10 + i] = static_cast<int>(lm.order[i]);
    }
    key[15] = wr_eff;
    key[16] = region.h_shape;
    key[17] = region.w_shape;
    auto it = profiles_.find(key);
    if (it != profiles_.end()) return it->second;

    // Unit-size tensors give per-link coefficients of the real bit counts.
    Region local{0, 0, region.h_shape, region.w_shape};
    Mesh mesh(region.h_shape, region.w_shape, 1);
    LoopBounds unit;
    unit.K = lm.parts(Loop::K);
    unit.C = lm.parts(Loop::C);
    unit.B = lm.parts(Loop::B);
    unit.P = lm.parts(Loop::P);
    unit.Q = lm.parts(Loop::Q);
    auto sets = build_sharing_sets(unit, lm, wr, local);
    std::vector<LinkUnits> dense(static_cast<std::size_t>(mesh.link_slots()));
    for (const auto& s : sets) {
      auto cyc = snake_cycle(s);
      double coef = static_cast<double>(s.size() - 1) / s.size();
      for (std::size_t i = 0; i < cyc.size(); ++i) {
        for (int link : mesh.route(s.members[static_cast<std::size_t>(cyc[i])],
                                   s.members[static_cast<std::size_t>(cyc[(i + 1) % cyc.size()])])) {
          auto& u = dense[static_cast<std::size_t>(link)];
          (s.payload == Payload::input ? u.in : s.payload == Payload::weight ? u.w : u.ps) += coef;
        }
      }
    }
    Profile p;
    for (const auto& u : dense)
      if (u.in > 0 || u.w > 0 || u.ps > 0) p.links.push_back(u);
    return profiles_.emplace(key, std::move(p)).first->second;
  }

  const DnnGraph& graph_;
  HwParams hw_;
  HwConstraints c_;
  MapperOptions opt_;
  NodeProps np_;
  std::map<int, std::int64_t> extra_;
  std::map<std::array<std::int64_t, 12>, NodePhase> phase_cache_;
  std::map<std::array<int, 18>, Profile> profiles_;
};

struct LmChoice {
  LayerMapping lm;
  CostReport cost;
};

// Exhaustive search over partition counts and placement orders for the
// lowest estimated latency; equal latencies fall to the smallest encoding.
// Order only affects the NoC phase, so shapes are visited by their
// order-independent lower bound and the search stops once that bound
// exceeds the incumbent.
inline std::optional<LmChoice> enumerate_lm(CostEngine& eng, const Layer& layer, const Region& region, int wr,
                                            const std::optional<DlPair>& dl) {
  LoopBounds full = LoopBounds::of(layer);
  struct Shape {
    LayerMapping lm;
    std::int64_t bound;
  };
  std::vector<Shape> shapes;
  for (const auto& ph : detail::ordered_factorizations(region.h_shape)) {
    for (const auto& pw : detail::ordered_factorizations(region.w_shape)) {
      bool ok = true;
      for (Loop l : kAllLoops) {
        int i = static_cast<int>(l);
        if (static_cast<std::int64_t>(ph[static_cast<std::size_t>(i)]) * pw[static_cast<std::size_t>(i)] > full.get(l)) ok = false;
      }
      if (!ok) continue;
      LayerMapping lm;
      lm.ph = ph;
      lm.pw = pw;
      const NodePhase& node = eng.node_phase(layer, lm, wr, dl, region.nodes());
      if (!node.feasible) continue;
      std::int64_t bound = std::max(node.compute_cycles, node.dram.cycles) + eng.noc_lower_bound(layer, lm, wr);
      shapes.push_back({lm, bound});
    }
  }
  std::sort(shapes.begin(), shapes.end(), [](const Shape& a, const Shape& b) {
    return a.bound != b.bound ? a.bound < b.bound : encoding_less(a.lm, b.lm);
  });
  std::optional<LmChoice> best;
  for (const auto& s : shapes) {
    if (best && s.bound > best->cost.latency_cycles) break;
    int h_mask = 0, w_mask = 0;
    for (int i = 0; i < 5; ++i) {
      if (s.lm.ph[static_cast<std::size_t>(i)] > 1) h_mask |= 1 << i;
      if (s.lm.pw[static_cast<std::size_t>(i)] > 1) w_mask |= 1 << i;
    }
    int n_cls = s.lm.parts(Loop::B) * s.lm.parts(Loop::P) * s.lm.parts(Loop::Q);
    bool sharing = s.lm.parts(Loop::K) > 1 || s.lm.parts(Loop::C) > 1 || wr < n_cls;
    const auto& orders = detail::distinct_orders(sharing ? h_mask : 0, sharing ? w_mask : 0);
    for (const auto& order : orders) {
      LayerMapping lm = s.lm;
      lm.order = order;
      CostReport r = eng.estimate(layer, lm, wr, region, dl);
      if (!r.feasible) continue;
      if (!best || r.latency_cycles < best->cost.latency_cycles ||
          (r.latency_cycles == best->cost.latency_cycles && encoding_less(lm, best->lm)))
        best = LmChoice{lm, r};
    }
  }
  return best;
}

// One entry per WR value in the schedule, sorted by descending Size.
inline std::vector<CandidateEntry> gen_wr_lm_candidates(CostEngine& eng, const Layer& layer, const Region& region,
                                                        const std::optional<DlPair>& dl) {
  std::vector<CandidateEntry> out;
  LoopBounds full = LoopBounds::of(layer);
  for (int wr : wr_schedule(region.nodes(), eng.options().n_can)) {
    auto choice = enumerate_lm(eng, layer, region, wr, dl);
    if (!choice) continue;
    out.push_back({wr, choice->lm, choice->cost.latency_cycles, max_stored_weight_bytes(full, choice->lm, wr)});
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const CandidateEntry& a, const CandidateEntry& b) { return a.size_bytes > b.size_bytes; });
  return out;
}

// ---- dynamic-programming selection ----------------------------------------

// Candidates of one region: per layer, the alternatives (perf, size).
struct RegionCandidates {
  std::vector<int> layer_ids;
  std::vector<std::vector<CandidateEntry>> per_layer;
};

struct SmCandidates {
  SegmentMapping sm;
  std::vector<RegionCandidates> regions;
};

struct SegmentCandidates {
  std::vector<SmCandidates> sms;
};

struct DpSelection {
  std::vector<int> sm;                                  // per segment
  std::vector<std::vector<std::vector<int>>> entry;     // [segment][region][layer]
  std::int64_t latency = 0;
  std::vector<std::int64_t> segment_quanta;             // capacity granted to each segment
};

namespace detail {

constexpr std::int64_t kInf = std::numeric_limits<std::int64_t>::max() / 4;

// Multiple-choice knapsack over one region's layers: table[c] is the least
// summed latency with every layer's Size total at most c quanta.
struct RegionTable {
  std::vector<std::vector<std::int64_t>> best;  // [layer + 1][c]
  std::vector<std::vector<int>> pick;           // [layer][c]
};

inline RegionTable region_table(const RegionCandidates& rc, std::int64_t quantum, std::int64_t cap) {
  RegionTable t;
  const auto width = static_cast<std::size_t>(cap + 1);
  t.best.assign(1, std::vector<std::int64_t>(width, 0));
  for (const auto& cands : rc.per_layer) {
    const auto& prev = t.best.back();
    std::vector<std::int64_t> cur(width, kInf);
    std::vector<int> pick(width, -1);
    for (std::size_t k = 0; k < cands.size(); ++k) {
      std::int64_t q = ceil_div(cands[k].size_bytes, quantum);
      for (std::int64_t c = q; c <= cap; ++c) {
        std::int64_t before = prev[static_cast<std::size_t>(c - q)];
        if (before >= kInf) continue;
        std::int64_t v = before + cands[k].perf;
        if (v < cur[static_cast<std::size_t>(c)]) {
          cur[static_cast<std::size_t>(c)] = v;
          pick[static_cast<std::size_t>(c)] = static_cast<int>(k);
        }
      }
    }
    t.best.push_back(std::move(cur));
    t.pick.push_back(std::move(pick));
  }
  return t;
}

inline std::vector<int> backtrack(const RegionTable& t, const RegionCandidates& rc, std::int64_t quantum,
                                  std::int64_t c) {
  std::vector<int> out(rc.per_layer.size(), -1);
  for (std::size_t l = rc.per_layer.size(); l-- > 0;) {
    int k = t.pick[l][static_cast<std::size_t>(c)];
    out[l] = k;
    c -= ceil_div(rc.per_layer[l][static_cast<std::size_t>(k)].size_bytes, quantum);
  }
  return out;
}

}  // namespace detail

// Picks one SM per segment and one candidate per layer minimising the sum
// over segments of the slowest region's summed latency, subject to the sum
// over segments of the fullest region's weight quanta fitting in CAP.
inline DpSelection dp_select(const std::vector<SegmentCandidates>& segs, std::int64_t cap_bytes,
                             std::int64_t quantum_bytes) {
  using detail::kInf;
  if (quantum_bytes <= 0) throw ConfigError("capacity quantum must be positive");
  std::int64_t cap = cap_bytes / quantum_bytes;
  // Nothing can use more than the largest candidates everywhere.
  std::int64_t need = 0;
  for (const auto& s : segs) {
    std::int64_t seg_max = 0;
    for (const auto& sm : s.sms)
      for (const auto& r : sm.regions) {
        std::int64_t sum = 0;
        for (const auto& cands : r.per_layer) {
          std::int64_t mx = 0;
          for (const auto& e : cands) mx = std::max(mx, ceil_div(e.size_bytes, quantum_bytes));
          sum += mx;
        }
        seg_max = std::max(seg_max, sum);
      }
    need += seg_max;
  }
  cap = std::min(cap, need);
  const auto width = static_cast<std::size_t>(cap + 1);

  struct SegTable {
    std::vector<std::int64_t> best;  // min over SMs of max over regions
    std::vector<int> sm;
    std::vector<std::vector<detail::RegionTable>> tables;  // [sm][region]
  };
  std::vector<SegTable> seg_tables;
  for (const auto& s : segs) {
    SegTable st;
    st.best.assign(width, kInf);
    st.sm.assign(width, -1);
    for (std::size_t m = 0; m < s.sms.size(); ++m) {
      std::vector<detail::RegionTable> tabs;
      for (const auto& r : s.sms[m].regions) tabs.push_back(detail::region_table(r, quantum_bytes, cap));
      for (std::size_t c = 0; c < width; ++c) {
        std::int64_t v = 0;
        for (const auto& t : tabs) v = std::max(v, t.best.back()[c]);
        if (v < st.best[c]) {
          st.best[c] = v;
          st.sm[c] = static_cast<int>(m);
        }
      }
      st.tables.push_back(std::move(tabs));
    }
    seg_tables.push_back(std::move(st));
  }

  // Fold segments. Only capacities where a segment's table drops matter.
  std::vector<std::vector<std::int64_t>> fold(segs.size() + 1, std::vector<std::int64_t>(width, kInf));
  std::vector<std::vector<std::int64_t>> grant(segs.size(), std::vector<std::int64_t>(width, -1));
  std::fill(fold[0].begin(), fold[0].end(), 0);
  for (std::size_t s = 0; s < segs.size(); ++s) {
    const auto& g = seg_tables[s].best;
    std::vector<std::int64_t> breaks;
    for (std::size_t c = 0; c < width; ++c)
      if (g[c] < kInf && (c == 0 || g[c] < g[c - 1])) breaks.push_back(static_cast<std::int64_t>(c));
    for (std::size_t c = 0; c < width; ++c) {
      for (std::int64_t b : breaks) {
        if (b > static_cast<std::int64_t>(c)) break;
        std::int64_t prev = fold[s][c - static_cast<std::size_t>(b)];
        if (prev >= kInf) continue;
        std::int64_t v = prev + g[static_cast<std::size_t>(b)];
        if (v < fold[s + 1][c]) {
          fold[s + 1][c] = v;
          grant[s][c] = b;
        }
      }
    }
  }
  if (fold[segs.size()][width - 1] >= kInf) {
    std::size_t worst = 0;
    std::int64_t worst_need = -1;
    for (std::size_t s = 0; s < segs.size(); ++s) {
      std::int64_t first = -1;
      for (std::size_t c = 0; c < width; ++c)
        if (seg_tables[s].best[c] < kInf) {
          first = static_cast<std::int64_t>(c);
          break;
        }
      std::int64_t need_s = first < 0 ? std::numeric_limits<std::int64_t>::max() : first;
      if (need_s > worst_need) {
        worst_need = need_s;
        worst = s;
      }
    }
    throw InfeasibleError("weights do not fit in " + std::to_string(cap_bytes) +
                          " bytes per node; tightest is segment " + std::to_string(worst));
  }

  DpSelection sel;
  sel.latency = fold[segs.size()][width - 1];
  sel.sm.assign(segs.size(), -1);
  sel.entry.assign(segs.size(), {});
  sel.segment_quanta.assign(segs.size(), 0);
  std::int64_t c = cap;
  for (std::size_t s = segs.size(); s-- > 0;) {
    std::int64_t b = grant[s][static_cast<std::size_t>(c)];
    const auto& st = seg_tables[s];
    int m = st.sm[static_cast<std::size_t>(b)];
    sel.sm[s] = m;
    sel.segment_quanta[s] = b;
    for (std::size_t r = 0; r < segs[s].sms[static_cast<std::size_t>(m)].regions.size(); ++r)
      sel.entry[s].push_back(detail::backtrack(st.tables[static_cast<std::size_t>(m)][r],
                                               segs[s].sms[static_cast<std::size_t>(m)].regions[r], quantum_bytes, b));
    c -= b;
  }
  return sel;
}

// ---- schemes -----------------------------------------------------------------

struct LayerAssignment {
  int layer_id = 0;
  int segment = 0;
  int region = 0;
  LayerMapping lm;
  int wr = 1;
  DlPair dl;
  std::int64_t size_bytes = 0;
  CostReport cost;
};

struct IterationRecord {
  int iteration = 0;
  std::int64_t latency_cycles = 0;
  double energy_pj = 0;
};

struct MappingScheme {
  HwParams hw;
  std::vector<SegmentMapping> segments;
  std::vector<std::vector<std::vector<int>>> region_layers;  // [segment][region] -> layer ids in order
  std::map<int, LayerAssignment> layers;
  std::int64_t latency_cycles = 0;
  double energy_pj = 0;
  std::vector<IterationRecord> history;

  double edp() const { return energy_pj * static_cast<double>(latency_cycles); }
};

// Layer ids of each region of a segment under an SM, branch by branch.
inline std::vector<std::vector<int>> region_layer_lists(const Segment& seg, const SegmentMapping& sm) {
  std::vector<std::vector<int>> out(sm.regions.size());
  for (std::size_t b = 0; b < seg.branches.size(); ++b)
    for (int id : seg.branches[b].layers) out[static_cast<std::size_t>(sm.branch_region[b])].push_back(id);
  return out;
}

// Exact costs for every layer; segment latency is the slowest region's sum.
inline void evaluate_scheme(CostEngine& eng, MappingScheme& s) {
  s.latency_cycles = 0;
  s.energy_pj = 0;
  for (std::size_t seg = 0; seg < s.segments.size(); ++seg) {
    std::int64_t seg_lat = 0;
    for (std::size_t r = 0; r < s.segments[seg].regions.size(); ++r) {
      std::int64_t sum = 0;
      for (int id : s.region_layers[seg][r]) {
        auto& a = s.layers.at(id);
        a.cost = eng.evaluate(eng.graph().layer(id), a.lm, a.wr, s.segments[seg].regions[r], a.dl);
        if (!a.cost.feasible) throw InfeasibleError("layer " + std::to_string(id) + " has no feasible tiling");
        sum += a.cost.latency_cycles;
        s.energy_pj += a.cost.energy_pj();
      }
      seg_lat = std::max(seg_lat, sum);
    }
    s.latency_cycles += seg_lat;
  }
}

// ---- data layouts -----------------------------------------------------------

namespace detail {

struct UnionFind {
  std::vector<int> parent;
  explicit UnionFind(int n) : parent(static_cast<std::size_t>(n)) { std::iota(parent.begin(), parent.end(), 0); }
  int find(int x) {
    while (parent[static_cast<std::size_t>(x)] != x) x = parent[static_cast<std::size_t>(x)] = parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(x)])];
    return x;
  }
  void unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[static_cast<std::size_t>(std::max(a, b))] = std::min(a, b);
  }
};

}  // namespace detail

// DRAM cost of a layer's ifmap (side 0) or ofmap (side 1) stream under a
// layout, for ranking layouts.
inline std::pair<std::int64_t, double> layout_side_cost(CostEngine& eng, const Layer& l, const LayerMapping& lm, int wr,
                                                        int nodes, int side, const DataLayout& dl) {
  const NodePhase& ph = eng.node_phase(l, lm, wr, std::nullopt, nodes);
  if (!ph.feasible) return {0, 0.0};
  LoopBounds part = part_bounds(LoopBounds::of(l), lm);
  auto g = access_geometry(part, ph.traffic);
  const NodeProps& np = eng.node();
  AccessStats st;
  if (side == 0 && g.ifmap_fetches > 0)
    st = stream_box(g.ifmap_shape, g.ifmap_box, dl, g.elem_bits, np.dram_width_bits, np.row_bytes).scaled(g.ifmap_fetches);
  if (side == 1 && g.ofmap_writes > 0)
    st = stream_box(g.ofmap_shape, g.ofmap_box, dl, g.elem_bits, np.dram_width_bits, np.row_bytes).scaled(g.ofmap_writes);
  const auto& c = eng.constraints();
  std::int64_t cycles = (st.accesses + st.row_activations * c.row_cycle_cycles) * nodes;
  double pj = (static_cast<double>(st.accesses) * static_cast<double>(np.dram_width_bits) * c.dram_pj_per_bit +
               static_cast<double>(st.row_activations) * c.activation_pj) *
              nodes;
  return {cycles, pj};
}

// Assigns (DL_i, DL_o) to every compute layer. Each layer first takes its
// individually cheapest layouts; then every tensor shared along dependency
// edges (a producer's ofmap and all of its consumers' ifmaps, merged through
// multi-input consumers) takes the single layout minimising the summed cost
// of all its readers and writers.
inline std::map<int, DlPair> optimize_dl(CostEngine& eng, const MappingScheme& s) {
  const DnnGraph& g = eng.graph();
  auto choices = layout_choices(16, eng.node().dram_width_bits);
  std::vector<int> ids = g.compute_layer_ids();
  std::map<int, int> slot;  // layer id -> index; in-slot 2i, out-slot 2i+1
  for (std::size_t i = 0; i < ids.size(); ++i) slot[ids[i]] = static_cast<int>(i);
  detail::UnionFind uf(static_cast<int>(2 * ids.size()));
  for (int id : ids)
    for (int p : g.compute_preds(id)) uf.unite(2 * slot[p] + 1, 2 * slot[id]);

  // cost[slot][choice]
  std::vector<std::vector<std::pair<std::int64_t, double>>> cost(2 * ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const auto& a = s.layers.at(ids[i]);
    const Layer& l = g.layer(ids[i]);
    int nodes = s.segments[static_cast<std::size_t>(a.segment)].regions[static_cast<std::size_t>(a.region)].nodes();
    for (int side = 0; side < 2; ++side) {
      auto& v = cost[2 * i + static_cast<std::size_t>(side)];
      for (const auto& dl : choices) {
        if (std::int64_t{dl.group_factor} * l.data_bits > eng.node().dram_width_bits) {
          v.push_back({detail::kInf, 0.0});
          continue;
        }
        v.push_back(layout_side_cost(eng, l, a.lm, a.wr, nodes, side, dl));
      }
    }
  }
  std::map<int, std::vector<int>> classes;
  for (int k = 0; k < static_cast<int>(2 * ids.size()); ++k) classes[uf.find(k)].push_back(k);
  std::vector<int> pick(2 * ids.size(), 0);
  for (const auto& [root, members] : classes) {
    int best = 0;
    std::pair<std::int64_t, double> best_cost{detail::kInf, 0.0};
    for (std::size_t d = 0; d < choices.size(); ++d) {
      std::pair<std::int64_t, double> tot{0, 0.0};
      for (int m : members) {
        const auto& cv = cost[static_cast<std::size_t>(m)][d];
        tot.first = std::min(detail::kInf, tot.first + cv.first);
        tot.second += cv.second;
      }
      if (tot < best_cost) {
        best_cost = tot;
        best = static_cast<int>(d);
      }
    }
    for (int m : members) pick[static_cast<std::size_t>(m)] = best;
  }
  std::map<int, DlPair> out;
  for (std::size_t i = 0; i < ids.size(); ++i)
    out[ids[i]] = {choices[static_cast<std::size_t>(pick[2 * i])], choices[static_cast<std::size_t>(pick[2 * i + 1])]};
  return out;
}

// ---- driver ---------------------------------------------------------------------

namespace detail {

inline double scheme_objective(const MappingScheme& s, double alpha, double beta) {
  return std::pow(s.energy_pj, alpha) * std::pow(static_cast<double>(s.latency_cycles), beta);
}

}  // namespace detail

// Alternates capacity-aware selection of regions, partitions and WR with
// layout assignment. The first round scores candidates with layout-free
// DRAM estimates; later rounds use the layouts of the previous round. The
// best evaluated scheme is returned with the per-round history.
inline MappingScheme map_dnn(const DnnGraph& graph, const HwParams& hw, const HwConstraints& c,
                             const MapperOptions& opt = {}) {
  CostEngine eng(graph, hw, c, opt);
  const auto segments = segment_dnn(graph);
  std::vector<std::vector<SegmentMapping>> sms;
  for (const auto& seg : segments) sms.push_back(gen_sm_candidates(seg, graph, hw.node_rows, hw.node_cols));

  std::optional<std::map<int, DlPair>> dl;
  std::optional<MappingScheme> best;
  std::vector<IterationRecord> history;
  std::map<std::tuple<int, int, int, int, int>, std::vector<CandidateEntry>> cand_cache;
  for (int it = 0; it < std::max(1, opt.iterations); ++it) {
    std::vector<SegmentCandidates> all;
    for (std::size_t s = 0; s < segments.size(); ++s) {
      SegmentCandidates sc;
      for (const auto& sm : sms[s]) {
        SmCandidates smc{sm, {}};
        auto lists = region_layer_lists(segments[s], sm);
        bool ok = true;
        for (std::size_t r = 0; r < sm.regions.size() && ok; ++r) {
          RegionCandidates rc;
          const Region& reg = sm.regions[r];
          for (int id : lists[r]) {
            std::optional<DlPair> hint;
            if (dl) hint = dl->at(id);
            std::vector<CandidateEntry> cands;
            if (!hint) {
              auto key = std::make_tuple(id, reg.h_shape, reg.w_shape, -1, 0);
              auto found = cand_cache.find(key);
              if (found == cand_cache.end())
                found = cand_cache.emplace(key, gen_wr_lm_candidates(eng, graph.layer(id), reg, hint)).first;
              cands = found->second;
            } else {
              cands = gen_wr_lm_candidates(eng, graph.layer(id), reg, hint);
            }
            if (cands.empty()) {
              ok = false;
              break;
            }
            rc.layer_ids.push_back(id);
            rc.per_layer.push_back(std::move(cands));
          }
          smc.regions.push_back(std::move(rc));
        }
        if (ok) sc.sms.push_back(std::move(smc));
      }
      if (sc.sms.empty())
        throw InfeasibleError("segment " + std::to_string(s) + " has no layer mapping that fits the buffers");
      all.push_back(std::move(sc));
    }
    auto sel = dp_select(all, eng.node().cap_bytes, opt.quantum_bytes);

    MappingScheme scheme;
    scheme.hw = hw;
    for (std::size_t s = 0; s < segments.size(); ++s) {
      const auto& smc = all[s].sms[static_cast<std::size_t>(sel.sm[s])];
      scheme.segments.push_back(smc.sm);
      std::vector<std::vector<int>> lists;
      for (std::size_t r = 0; r < smc.regions.size(); ++r) {
        lists.push_back(smc.regions[r].layer_ids);
        for (std::size_t l = 0; l < smc.regions[r].layer_ids.size(); ++l) {
          const auto& e = smc.regions[r].per_layer[l][static_cast<std::size_t>(sel.entry[s][r][l])];
          LayerAssignment a;
          a.layer_id = smc.regions[r].layer_ids[l];
          a.segment = static_cast<int>(s);
          a.region = static_cast<int>(r);
          a.lm = e.lm;
          a.wr = e.wr;
          a.size_bytes = e.size_bytes;
          scheme.layers[a.layer_id] = a;
        }
      }
      scheme.region_layers.push_back(std::move(lists));
    }
    auto layouts = optimize_dl(eng, scheme);
    for (auto& [id, a] : scheme.layers) a.dl = layouts.at(id);
    evaluate_scheme(eng, scheme);
    history.push_back({it, scheme.latency_cycles, scheme.energy_pj});
    if (!best || detail::scheme_objective(scheme, opt.alpha, opt.beta) <
                     detail::scheme_objective(*best, opt.alpha, opt.beta))
      best = scheme;
    dl = layouts;
  }
  best->history = history;
  return *best;
}

// ---- baseline ---------------------------------------------------------------------

// Every layer uses the whole array; WR starts at the node count and is
// lowered on the layers with the most weights until all weights fit; one
// layout is shared by every tensor.
inline MappingScheme baseline_map(const DnnGraph& graph, const HwParams& hw, const HwConstraints& c,
                                  const MapperOptions& opt = {}) {
  CostEngine eng(graph, hw, c, opt);
  const auto segments = segment_dnn(graph);
  const Region whole{0, 0, hw.node_rows, hw.node_cols};
  const int n = whole.nodes();

  MappingScheme scheme;
  scheme.hw = hw;
  for (std::size_t s = 0; s < segments.size(); ++s) {
    SegmentMapping sm;
    sm.regions = {whole};
    sm.branch_region.assign(segments[s].branches.size(), 0);
    scheme.segments.push_back(sm);
    scheme.region_layers.push_back(region_layer_lists(segments[s], sm));
  }
  auto assign = [&](int id, int wr) {
    auto choice = enumerate_lm(eng, graph.layer(id), whole, wr, std::nullopt);
    if (!choice) throw InfeasibleError("layer " + std::to_string(id) + " has no feasible partitioning");
    LayerAssignment a;
    a.layer_id = id;
    a.lm = choice->lm;
    a.wr = wr;
    a.size_bytes = max_stored_weight_bytes(LoopBounds::of(graph.layer(id)), choice->lm, wr);
    return a;
  };
  for (std::size_t s = 0; s < segments.size(); ++s)
    for (int id : scheme.region_layers[s][0]) {
      auto a = assign(id, n);
      a.segment = static_cast<int>(s);
      scheme.layers[id] = a;
    }
  auto stored = [&]() {
    std::int64_t sum = 0;
    for (const auto& [id, a] : scheme.layers) sum += a.size_bytes;
    return sum;
  };
  while (stored() > eng.node().cap_bytes) {
    int victim = -1;
    for (const auto& [id, a] : scheme.layers) {
      if (a.wr <= 1) continue;
      if (victim < 0 || graph.layer(id).weight_bytes() > graph.layer(victim).weight_bytes()) victim = id;
    }
    if (victim < 0) throw InfeasibleError("weights exceed per-node capacity even without replication");
    auto& a = scheme.layers[victim];
    int wr = a.wr;
    // Next WR value that changes the holder groups.
    int n_cls = n;
    int g = (n_cls + wr - 1) / wr;
    int next = wr - 1;
    while (next > 1 && (n_cls + next - 1) / next == g) --next;
    int seg = a.segment;
    a = assign(victim, next);
    a.segment = seg;
  }
  // One layout for all tensors.
  std::vector<DataLayout> options{DataLayout::bchw(), DataLayout::bhwc(),
                                  DataLayout::grouped(LayoutOrder::BCHW, GroupDim::C, 8)};
  std::optional<MappingScheme> best;
  for (const auto& dl : options) {
    if (std::int64_t{dl.group_factor} * 16 > eng.node().dram_width_bits) continue;
    MappingScheme trial = scheme;
    for (auto& [id, a] : trial.layers) a.dl = {dl, dl};
    evaluate_scheme(eng, trial);
    if (!best || trial.latency_cycles < best->latency_cycles) best = std::move(trial);
  }
  return *best;
}

}  // namespace pimdse
