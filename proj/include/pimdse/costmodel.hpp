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

// Analytical per-layer cost on a PIM-node array: PE-array compute time,
// buffer tiling and DRAM traffic, layout-aware DRAM access cost, NoC
// sharing phases, and the weighted energy/latency objective.

#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "pimdse/arch.hpp"
#include "pimdse/error.hpp"
#include "pimdse/layout.hpp"
#include "pimdse/noc.hpp"
#include "pimdse/partition.hpp"
#include "pimdse/scheduler.hpp"
#include "pimdse/workload.hpp"

namespace pimdse {

// K is spread over PE rows and C over PE columns; everything else is
// temporal.
inline std::int64_t compute_latency(const LoopBounds& b, const HwParams& p) {
  return ceil_div(b.K, p.pe_rows) * ceil_div(b.C, p.pe_cols) * b.B * b.P * b.Q * b.HK * b.WK;
}

// Tile extents along B, K, C, P, Q. Execution order: K tiles outermost,
// then spatial (B, P, Q) tiles, then C tiles innermost.
struct Tiling {
  std::int64_t B = 1, K = 1, C = 1, P = 1, Q = 1;

  friend bool operator==(const Tiling&, const Tiling&) = default;
};

struct DramTraffic {
  std::int64_t ifmap = 0;
  std::int64_t weight = 0;
  std::int64_t ofmap = 0;
  bool feasible = true;
  Tiling tiling;

  std::int64_t total() const { return ifmap + weight + ofmap; }
};

struct BufferSizes {
  std::int64_t ibuf = 0, wbuf = 0, obuf = 0;  // bytes

  static BufferSizes of(const HwParams& p) { return {p.ibuf_bytes(), p.wbuf_bytes(), p.obuf_bytes()}; }
};

namespace detail {

inline std::int64_t bytes_of(std::int64_t elems, int bits) { return ceil_div(elems * bits, 8); }

// Sum of ifmap rows over all P tiles of size t (last tile may be short).
inline std::int64_t halo_rows_sum(const LoopBounds& b, std::int64_t t) {
  std::int64_t n = ceil_div(b.P, t);
  std::int64_t last = b.P - (n - 1) * t;
  return (n - 1) * b.rows_for(t) + b.rows_for(last);
}

inline std::int64_t halo_cols_sum(const LoopBounds& b, std::int64_t t) {
  std::int64_t n = ceil_div(b.Q, t);
  std::int64_t last = b.Q - (n - 1) * t;
  return (n - 1) * b.cols_for(t) + b.cols_for(last);
}

inline std::vector<std::int64_t> halving(std::int64_t len) {
  std::vector<std::int64_t> out;
  for (std::int64_t d = 1;; d *= 2) {
    std::int64_t v = ceil_div(len, d);
    if (out.empty() || out.back() != v) out.push_back(v);
    if (v == 1) break;
  }
  return out;
}

}  // namespace detail

inline bool tiling_fits(const LoopBounds& b, const Tiling& t, const BufferSizes& buf) {
  std::int64_t in_tile = detail::bytes_of(t.B * t.C * b.rows_for(t.P) * b.cols_for(t.Q), b.data_bits);
  std::int64_t w_tile = detail::bytes_of(t.K * t.C * b.HK * b.WK, b.data_bits);
  std::int64_t ps_tile = detail::bytes_of(t.B * t.K * t.P * t.Q, b.psum_bits);
  return in_tile <= buf.ibuf && w_tile <= buf.wbuf && ps_tile <= buf.obuf;
}

// DRAM bytes moved by one tiling. Weights are re-read once per spatial tile
// unless a K tile holds every input channel; ifmaps are re-read once per K
// tile unless a single tile covers the whole ifmap.
inline std::optional<DramTraffic> traffic_for_tiling(const LoopBounds& b, const Tiling& t, const BufferSizes& buf) {
  if (!tiling_fits(b, t, buf)) return std::nullopt;
  std::int64_t nK = ceil_div(b.K, t.K), nC = ceil_div(b.C, t.C);
  std::int64_t nS = ceil_div(b.B, t.B) * ceil_div(b.P, t.P) * ceil_div(b.Q, t.Q);
  DramTraffic tr;
  tr.tiling = t;
  tr.weight = b.weight_bytes() * (nC == 1 ? 1 : nS);
  std::int64_t in_pass = detail::bytes_of(b.B * b.C * detail::halo_rows_sum(b, t.P) * detail::halo_cols_sum(b, t.Q),
                                          b.data_bits);
  tr.ifmap = in_pass * (nS * nC == 1 ? 1 : nK);
  tr.ofmap = b.ofmap_bytes();
  return tr;
}

// Minimum-traffic tiling over halving sequences of every tiled loop.
// `share_fraction` is the fraction of the part-layer weights held in this
// node's own DRAM; the rest arrives over the NoC and is staged through DRAM.
inline DramTraffic dram_traffic(const LoopBounds& b, const BufferSizes& buf, double share_fraction = 1.0) {
  if (buf.ibuf <= 0 || buf.wbuf <= 0 || buf.obuf <= 0) throw ConfigError("buffer sizes must be positive");
  DramTraffic best;
  best.feasible = false;
  auto cB = detail::halving(b.B), cK = detail::halving(b.K), cC = detail::halving(b.C);
  auto cP = detail::halving(b.P), cQ = detail::halving(b.Q);
  for (auto tk : cK)
    for (auto tc : cC) {
      if (detail::bytes_of(tk * tc * b.HK * b.WK, b.data_bits) > buf.wbuf) continue;
      for (auto tb : cB)
        for (auto tp : cP)
          for (auto tq : cQ) {
            auto tr = traffic_for_tiling(b, {tb, tk, tc, tp, tq}, buf);
            if (!tr) continue;
            if (!best.feasible || tr->total() < best.total()) {
              best = *tr;
              best.feasible = true;
            }
          }
    }
  if (best.feasible && share_fraction < 1.0)
    best.weight += static_cast<std::int64_t>(std::ceil((1.0 - share_fraction) * static_cast<double>(b.weight_bytes())));
  return best;
}

inline DramTraffic dram_traffic(const LoopBounds& b, const HwParams& p, double share_fraction = 1.0) {
  return dram_traffic(b, BufferSizes::of(p), share_fraction);
}

// Footprints streamed per node: one representative ifmap tile and ofmap tile
// with their repeat counts, plus sequentially streamed weights.
struct AccessGeometry {
  int elem_bits = 16;
  TensorShape ifmap_shape;
  Box ifmap_box;
  std::int64_t ifmap_fetches = 0;
  TensorShape ofmap_shape;
  Box ofmap_box;
  std::int64_t ofmap_writes = 0;
  std::int64_t weight_bytes = 0;
  std::int64_t extra_bytes = 0;  // sequential traffic of attached aux layers
};

struct DramCost {
  std::int64_t accesses = 0;
  std::int64_t row_activations = 0;
  std::int64_t cycles = 0;
  double pj = 0.0;
};

namespace detail {

// Second tile along a dimension when there is one, else the first.
inline std::pair<std::int64_t, std::int64_t> rep_tile(std::int64_t len, std::int64_t t) {
  if (len > t) return {t, std::min(t, len - t)};
  return {0, len};
}

}  // namespace detail

inline AccessGeometry access_geometry(const LoopBounds& b, const DramTraffic& tr) {
  const Tiling& t = tr.tiling;
  AccessGeometry g;
  g.elem_bits = b.data_bits;
  g.ifmap_shape = {b.B, b.C, b.in_h, b.in_w};
  auto [b0, nb] = detail::rep_tile(b.B, t.B);
  auto [c0, nc] = detail::rep_tile(b.C, t.C);
  auto [p0, np] = detail::rep_tile(b.P, t.P);
  auto [q0, nq] = detail::rep_tile(b.Q, t.Q);
  auto [k0, nk] = detail::rep_tile(b.K, t.K);
  std::int64_t h0 = std::min(p0 * b.stride_h, b.in_h - 1), w0 = std::min(q0 * b.stride_w, b.in_w - 1);
  g.ifmap_box = {b0, nb, c0, nc, h0, std::min(b.rows_for(np), b.in_h - h0), w0, std::min(b.cols_for(nq), b.in_w - w0)};
  std::int64_t tile_bytes = detail::bytes_of(g.ifmap_box.elements(), b.data_bits);
  g.ifmap_fetches = tile_bytes > 0 ? ceil_div(tr.ifmap, tile_bytes) : 0;
  g.ofmap_shape = {b.B, b.K, b.P, b.Q};
  g.ofmap_box = {b0, nb, k0, nk, p0, np, q0, nq};
  std::int64_t o_bytes = detail::bytes_of(g.ofmap_box.elements(), b.data_bits);
  g.ofmap_writes = o_bytes > 0 ? ceil_div(tr.ofmap, o_bytes) : 0;
  g.weight_bytes = tr.weight;
  return g;
}

inline void check_layout_fits(const DataLayout& dl, int elem_bits, std::int64_t port_bits) {
  if (!dl.valid()) throw ConfigError("invalid layout " + to_string(dl));
  if (std::int64_t{dl.group_factor} * elem_bits > port_bits)
    throw ConfigError("layout " + to_string(dl) + " group exceeds the " + std::to_string(port_bits) + "-bit port");
}

// Port-quantised accesses and row activations for streaming the geometry.
inline DramCost dram_access_cost(const AccessGeometry& g, const DataLayout& dl_in, const DataLayout& dl_out,
                                 const NodeProps& node, const HwConstraints& c) {
  check_layout_fits(dl_in, g.elem_bits, node.dram_width_bits);
  check_layout_fits(dl_out, g.elem_bits, node.dram_width_bits);
  AccessStats st;
  if (g.ifmap_fetches > 0)
    st += stream_box(g.ifmap_shape, g.ifmap_box, dl_in, g.elem_bits, node.dram_width_bits, node.row_bytes)
              .scaled(g.ifmap_fetches);
  if (g.ofmap_writes > 0)
    st += stream_box(g.ofmap_shape, g.ofmap_box, dl_out, g.elem_bits, node.dram_width_bits, node.row_bytes)
              .scaled(g.ofmap_writes);
  st += stream_sequential(g.weight_bytes, node.dram_width_bits, node.row_bytes);
  st += stream_sequential(g.extra_bytes, node.dram_width_bits, node.row_bytes);
  DramCost d;
  d.accesses = st.accesses;
  d.row_activations = st.row_activations;
  d.cycles = st.accesses + st.row_activations * c.row_cycle_cycles;
  d.pj = static_cast<double>(st.accesses) * static_cast<double>(node.dram_width_bits) * c.dram_pj_per_bit +
         static_cast<double>(st.row_activations) * c.activation_pj;
  return d;
}

// Layout-free estimate: ideal streaming at full port width, no row misses.
inline DramCost dram_access_estimate(std::int64_t bytes, const NodeProps& node, const HwConstraints& c) {
  DramCost d;
  d.accesses = ceil_div(bytes * 8, node.dram_width_bits);
  d.cycles = d.accesses;
  d.pj = static_cast<double>(bytes) * 8.0 * c.dram_pj_per_bit;
  return d;
}

struct CostReport {
  std::int64_t latency_cycles = 0;
  double energy_pe_pj = 0, energy_sram_pj = 0, energy_dram_pj = 0, energy_noc_pj = 0;
  std::int64_t dram_accesses = 0;
  std::int64_t row_activations = 0;
  // Phase breakdown.
  std::int64_t compute_cycles = 0, dram_cycles = 0, noc_prologue_cycles = 0, noc_epilogue_cycles = 0;
  bool feasible = true;

  double energy_pj() const { return energy_pe_pj + energy_sram_pj + energy_dram_pj + energy_noc_pj; }

  CostReport& add_energy(const CostReport& o) {
    energy_pe_pj += o.energy_pe_pj;
    energy_sram_pj += o.energy_sram_pj;
    energy_dram_pj += o.energy_dram_pj;
    energy_noc_pj += o.energy_noc_pj;
    dram_accesses += o.dram_accesses;
    row_activations += o.row_activations;
    return *this;
  }
};

// Per-node compute/DRAM phase of one part-layer.
struct NodePhase {
  bool feasible = true;
  std::int64_t compute_cycles = 0;
  DramTraffic traffic;
  DramCost dram;
  double pe_pj = 0, sram_pj = 0;
};

inline NodePhase node_phase(const LoopBounds& part, const HwParams& p, const HwConstraints& c, const NodeProps& np,
                            double share_fraction, const std::optional<DataLayout>& dl_in,
                            const std::optional<DataLayout>& dl_out, std::int64_t extra_bytes = 0) {
  NodePhase ph;
  ph.traffic = dram_traffic(part, p, share_fraction);
  if (!ph.traffic.feasible) {
    ph.feasible = false;
    return ph;
  }
  ph.compute_cycles = compute_latency(part, p);
  if (dl_in && dl_out) {
    auto g = access_geometry(part, ph.traffic);
    g.extra_bytes = extra_bytes;
    ph.dram = dram_access_cost(g, *dl_in, *dl_out, np, c);
  } else {
    ph.dram = dram_access_estimate(ph.traffic.total() + extra_bytes, np, c);
  }
  ph.pe_pj = static_cast<double>(part.macs()) * c.mac_pj;
  // Every DRAM byte crosses a buffer twice (fill and drain); each compute
  // cycle reads one operand per PE row and per PE column.
  double sram_bits = 2.0 * 8.0 * static_cast<double>(ph.traffic.total() + extra_bytes) +
                     static_cast<double>(ph.compute_cycles) * (p.pe_rows + p.pe_cols) * part.data_bits;
  ph.sram_pj = sram_bits * c.sram_pj_per_bit;
  return ph;
}

// NoC phases of a layer: ifmap and weight gathers before compute, partial
// sum reduction after it.
struct NocPhase {
  std::int64_t prologue_cycles = 0, epilogue_cycles = 0;
  double pj = 0;
};

inline NocPhase noc_phase(const std::vector<SharingSet>& sets, const Mesh& mesh, const HwConstraints& c, bool exact,
                          const IlpOptions& ilp = {}) {
  std::vector<SharingSet> pro, epi;
  for (const auto& s : sets) (s.payload == Payload::psum ? epi : pro).push_back(s);
  NocPhase n;
  for (int k = 0; k < 2; ++k) {
    const auto& group = k == 0 ? pro : epi;
    if (group.empty()) continue;
    auto h = exact ? schedule_ilp(group, mesh, ilp) : schedule_snake(group, mesh);
    auto tc = evaluate_schedule(h, mesh, c.noc_pj_per_bit_hop);
    (k == 0 ? n.prologue_cycles : n.epilogue_cycles) = tc.cycles;
    n.pj += tc.pj;
  }
  return n;
}

// Fraction of a part-layer's weights a node keeps locally under WR.
inline double local_weight_fraction(const LayerMapping& lm, int wr) {
  int n_cls = lm.parts(Loop::B) * lm.parts(Loop::P) * lm.parts(Loop::Q);
  int largest = 1;
  for (const auto& g : weight_groups(n_cls, wr)) largest = std::max(largest, static_cast<int>(g.size()));
  return 1.0 / largest;
}

struct LayerCostOptions {
  bool exact_noc = true;
  IlpOptions ilp;
  std::int64_t extra_dram_bytes = 0;  // aux traffic of the whole layer, spread over the region
};

inline CostReport combine(const NodePhase& ph, const NocPhase& noc, int nodes) {
  CostReport r;
  if (!ph.feasible) {
    r.feasible = false;
    return r;
  }
  r.compute_cycles = ph.compute_cycles;
  r.dram_cycles = ph.dram.cycles;
  r.noc_prologue_cycles = noc.prologue_cycles;
  r.noc_epilogue_cycles = noc.epilogue_cycles;
  r.latency_cycles = noc.prologue_cycles + std::max(ph.compute_cycles, ph.dram.cycles) + noc.epilogue_cycles;
  r.energy_pe_pj = ph.pe_pj * nodes;
  r.energy_sram_pj = ph.sram_pj * nodes;
  r.energy_dram_pj = ph.dram.pj * nodes;
  r.energy_noc_pj = noc.pj;
  r.dram_accesses = ph.dram.accesses * nodes;
  r.row_activations = ph.dram.row_activations * nodes;
  return r;
}

// Cost of one layer mapped onto `region`. Without layouts the DRAM phase is
// the ideal-streaming estimate. Every node runs an identical (padded)
// part-layer, so the per-node phase is evaluated once.
inline CostReport layer_cost(const Layer& layer, const LayerMapping& lm, int wr, const std::optional<DataLayout>& dl_in,
                             const std::optional<DataLayout>& dl_out, const Region& region, const HwParams& p,
                             const HwConstraints& c, const LayerCostOptions& opt = {}) {
  if (!lm_fits(lm, region)) throw ConfigError("layer mapping " + lm.encode() + " does not fit region " + to_string(region));
  NodeProps np = derive_node_props(p, c);
  LoopBounds full = LoopBounds::of(layer);
  LoopBounds part = part_bounds(full, lm);
  const int nodes = region.nodes();
  auto ph = node_phase(part, p, c, np, local_weight_fraction(lm, wr), dl_in, dl_out,
                       ceil_div(opt.extra_dram_bytes, nodes));
  if (!ph.feasible) return combine(ph, {}, nodes);
  Mesh mesh(p.node_rows, p.node_cols, np.flit_bits);
  auto noc = noc_phase(build_sharing_sets(full, lm, wr, region), mesh, c, opt.exact_noc, opt.ilp);
  return combine(ph, noc, nodes);
}

// Sum over workloads of Energy^alpha * Latency^beta * gamma.
struct WorkloadCost {
  double energy_pj = 0;
  double latency_cycles = 0;
  double gamma = 1;
};

inline double total_cost(const std::vector<WorkloadCost>& items, double alpha, double beta) {
  if (alpha < 0 || beta < 0) throw ConfigError("cost exponents must be nonnegative");
  double s = 0;
  for (const auto& w : items) {
    if (w.gamma <= 0) throw ConfigError("workload weight gamma must be positive");
    s += std::pow(w.energy_pj, alpha) * std::pow(w.latency_cycles, beta) * w.gamma;
  }
  return s;
}

}  // namespace pimdse
