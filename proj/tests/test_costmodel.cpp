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

#include <gtest/gtest.h>

#include <random>

#include "oracles/tile_replay.hpp"
#include "pimdse/costmodel.hpp"

namespace pimdse {
namespace {

Layer make_conv(std::int64_t B, std::int64_t K, std::int64_t C, std::int64_t P, std::int64_t Q, std::int64_t HK,
                std::int64_t WK, int stride = 1) {
  Layer l;
  l.batch = B;
  l.out_channels = K;
  l.in_channels = C;
  l.out_h = P;
  l.out_w = Q;
  l.kernel_h = HK;
  l.kernel_w = WK;
  l.stride_h = l.stride_w = stride;
  return l;
}

LoopBounds bounds(std::int64_t B, std::int64_t K, std::int64_t C, std::int64_t P, std::int64_t Q, std::int64_t HK,
                  std::int64_t WK, int stride = 1) {
  return LoopBounds::of(make_conv(B, K, C, P, Q, HK, WK, stride));
}

TEST(ComputeLatency, PerfectFit) {
  HwParams p{2, 2, 16, 8, 64, 64, 64};
  EXPECT_EQ(compute_latency(bounds(1, 16, 8, 1, 1, 1, 1), p), 1);
  EXPECT_EQ(compute_latency(bounds(1, 17, 8, 1, 1, 1, 1), p), 2);
}

TEST(ComputeLatency, NeverBeatsMacCount) {
  std::mt19937 rng(2);
  auto r = [&](int hi) { return 1 + static_cast<std::int64_t>(rng() % static_cast<unsigned>(hi)); };
  for (int trial = 0; trial < 1000; ++trial) {
    auto b = bounds(r(4), r(70), r(70), r(9), r(9), r(3), r(3));
    HwParams p{2, 2, static_cast<int>(r(40)), static_cast<int>(r(40)), 8, 8, 8};
    std::int64_t macs = b.B * b.K * b.C * b.P * b.Q * b.HK * b.WK;
    EXPECT_GE(compute_latency(b, p) * p.pe_rows * p.pe_cols, macs);
  }
}

TEST(DramTraffic, FullyResidentReadsEverythingOnce) {
  auto b = bounds(1, 16, 16, 8, 8, 3, 3);
  BufferSizes big{1 << 20, 1 << 20, 1 << 20};
  auto tr = dram_traffic(b, big);
  ASSERT_TRUE(tr.feasible);
  EXPECT_EQ(tr.ifmap, b.ifmap_bytes());
  EXPECT_EQ(tr.weight, b.weight_bytes());
  EXPECT_EQ(tr.ofmap, b.ofmap_bytes());
}

TEST(DramTraffic, HalfTheFiltersWithResidentIfmap) {
  auto b = bounds(1, 16, 16, 8, 8, 3, 3);
  BufferSizes buf{1 << 20, b.weight_bytes() / 2, 1 << 20};
  auto tr = dram_traffic(b, buf);
  ASSERT_TRUE(tr.feasible);
  EXPECT_EQ(tr.weight, b.weight_bytes());
  EXPECT_EQ(tr.ifmap, b.ifmap_bytes());
}

TEST(DramTraffic, TooSmallIsInfeasible) {
  auto b = bounds(1, 4, 4, 8, 8, 7, 7);
  BufferSizes tiny{64, 64, 64};  // one 7x7 window does not fit
  EXPECT_FALSE(dram_traffic(b, tiny).feasible);
  EXPECT_THROW(dram_traffic(b, BufferSizes{0, 1, 1}), ConfigError);
}

TEST(DramTraffic, MatchesTileReplay) {
  std::mt19937 rng(4);
  auto r = [&](int hi) { return 1 + static_cast<std::int64_t>(rng() % static_cast<unsigned>(hi)); };
  int checked = 0;
  for (int trial = 0; trial < 400; ++trial) {
    auto b = bounds(r(3), r(24), r(24), r(12), r(12), r(3), r(3), static_cast<int>(r(2)));
    if (trial % 2) b.data_bits = 8;
    BufferSizes buf{r(4096), r(4096), r(4096)};
    // Replay the chosen tiling and also arbitrary fitting tilings.
    auto tr = dram_traffic(b, buf);
    if (tr.feasible) {
      auto want = oracle::replay_tiles(b, tr.tiling);
      ASSERT_EQ(tr.ifmap, want.ifmap);
      ASSERT_EQ(tr.weight, want.weight);
      ASSERT_EQ(tr.ofmap, want.ofmap);
      ++checked;
    }
    Tiling t{r(static_cast<int>(b.B)), r(static_cast<int>(b.K)), r(static_cast<int>(b.C)),
             r(static_cast<int>(b.P)), r(static_cast<int>(b.Q))};
    if (auto any = traffic_for_tiling(b, t, buf)) {
      auto want = oracle::replay_tiles(b, t);
      ASSERT_EQ(any->ifmap, want.ifmap);
      ASSERT_EQ(any->weight, want.weight);
      ASSERT_EQ(any->ofmap, want.ofmap);
    }
  }
  EXPECT_GT(checked, 100);
}

TEST(DramTraffic, LargerBuffersNeverHurt) {
  std::mt19937 rng(8);
  auto r = [&](int hi) { return 1 + static_cast<std::int64_t>(rng() % static_cast<unsigned>(hi)); };
  for (int trial = 0; trial < 300; ++trial) {
    auto b = bounds(r(4), r(64), r(64), r(16), r(16), r(3), r(3));
    BufferSizes buf{r(8192), r(8192), r(8192)};
    auto base = dram_traffic(b, buf);
    BufferSizes more = buf;
    switch (trial % 3) {
      case 0: more.ibuf += r(8192); break;
      case 1: more.wbuf += r(8192); break;
      default: more.obuf += r(8192); break;
    }
    auto grown = dram_traffic(b, more);
    if (base.feasible) {
      ASSERT_TRUE(grown.feasible);
      EXPECT_LE(grown.total(), base.total());
    }
  }
}

TEST(DramTraffic, RemoteWeightsAreStaged) {
  auto b = bounds(1, 16, 16, 8, 8, 3, 3);
  BufferSizes big{1 << 20, 1 << 20, 1 << 20};
  EXPECT_EQ(dram_traffic(b, big, 0.25).weight, b.weight_bytes() + b.weight_bytes() * 3 / 4);
}

TEST(DramAccessCost, TwoChannelWindow) {
  AccessGeometry g;
  g.elem_bits = 16;
  g.ifmap_shape = {1, 4, 5, 5};
  g.ifmap_box = {0, 1, 0, 2, 0, 3, 0, 3};
  g.ifmap_fetches = 1;
  NodeProps np;
  np.dram_width_bits = 64;
  np.row_bytes = 2048;
  HwConstraints c;
  auto c2 = DataLayout::grouped(LayoutOrder::BCHW, GroupDim::C, 2);
  EXPECT_EQ(dram_access_cost(g, DataLayout::bchw(), DataLayout::bchw(), np, c).accesses, 9);
  EXPECT_EQ(dram_access_cost(g, c2, DataLayout::bchw(), np, c).accesses, 6);
  auto d = dram_access_cost(g, c2, DataLayout::bchw(), np, c);
  EXPECT_EQ(d.row_activations, 1);
  EXPECT_EQ(d.cycles, 6 + 3);
  EXPECT_DOUBLE_EQ(d.pj, 6 * 64 * 0.88 + 1024 * 0.88);
  auto wide = DataLayout::grouped(LayoutOrder::BCHW, GroupDim::C, 8);
  EXPECT_THROW(dram_access_cost(g, wide, DataLayout::bchw(), np, c), ConfigError);
}

TEST(DramAccessCost, SequentialWeightsOnly) {
  AccessGeometry g;
  g.weight_bytes = 10000;
  NodeProps np;
  np.dram_width_bits = 128;
  np.row_bytes = 4096;
  auto d = dram_access_cost(g, DataLayout::bchw(), DataLayout::bchw(), np, HwConstraints{});
  EXPECT_EQ(d.accesses, (10000 * 8 + 127) / 128);
  EXPECT_EQ(d.row_activations, 3);
}

TEST(LayerCost, SingleNodeHasNoSharing) {
  HwConstraints c;
  c.bank_rows = c.bank_cols = 1;
  c.min_nodes = 1;
  HwParams p{1, 1, 16, 16, 64, 64, 64};
  auto l = make_conv(1, 32, 32, 14, 14, 3, 3);
  LayerMapping lm;
  Region r{0, 0, 1, 1};
  auto rep = layer_cost(l, lm, 1, std::nullopt, std::nullopt, r, p, c);
  ASSERT_TRUE(rep.feasible);
  EXPECT_EQ(rep.noc_prologue_cycles + rep.noc_epilogue_cycles, 0);
  EXPECT_DOUBLE_EQ(rep.energy_noc_pj, 0.0);
  EXPECT_EQ(rep.latency_cycles, std::max(rep.compute_cycles, rep.dram_cycles));
  EXPECT_DOUBLE_EQ(rep.energy_pj(), rep.energy_pe_pj + rep.energy_sram_pj + rep.energy_dram_pj + rep.energy_noc_pj);
}

TEST(LayerCost, SplittingKOverFourNodes) {
  HwConstraints c;
  HwParams p1{16, 16, 8, 8, 64, 64, 64};
  auto l = make_conv(1, 64, 32, 14, 14, 3, 3);
  LayerMapping one;
  auto single = layer_cost(l, one, 1, std::nullopt, std::nullopt, Region{0, 0, 1, 1}, p1, c);
  LayerMapping k4;
  k4.ph[static_cast<int>(Loop::K)] = 2;
  k4.pw[static_cast<int>(Loop::K)] = 2;
  auto quad = layer_cost(l, k4, 4, std::nullopt, std::nullopt, Region{0, 0, 2, 2}, p1, c);
  EXPECT_EQ(quad.compute_cycles * 4, single.compute_cycles);
  EXPECT_GT(quad.noc_prologue_cycles, 0);
  EXPECT_GT(quad.energy_noc_pj, 0.0);
  auto sets = build_sharing_sets(LoopBounds::of(l), k4, 4, Region{0, 0, 2, 2});
  ASSERT_EQ(sets.size(), 1u);
  EXPECT_EQ(sets[0].payload, Payload::input);
}

TEST(LayerCost, BatchSplitSharesWeightsOnlyBelowFullReplication) {
  auto l = make_conv(4, 16, 16, 8, 8, 3, 3);
  LayerMapping b4;
  b4.ph[static_cast<int>(Loop::B)] = 2;
  b4.pw[static_cast<int>(Loop::B)] = 2;
  Region r{0, 0, 2, 2};
  for (int wr = 1; wr <= 4; ++wr) {
    auto sets = build_sharing_sets(LoopBounds::of(l), b4, wr, r);
    bool has_weights = false;
    for (const auto& s : sets) has_weights = has_weights || s.payload == Payload::weight;
    EXPECT_EQ(has_weights, wr < 4) << "WR=" << wr;
  }
}

TEST(LayerCost, WrongRegionShapeThrows) {
  auto l = make_conv(1, 8, 8, 4, 4, 1, 1);
  LayerMapping lm;
  EXPECT_THROW(layer_cost(l, lm, 1, std::nullopt, std::nullopt, Region{0, 0, 2, 1}, HwParams{}, HwConstraints{}),
               ConfigError);
}

TEST(TotalCost, Products) {
  EXPECT_DOUBLE_EQ(total_cost({{2, 3, 1}}, 1, 1), 6);
  EXPECT_DOUBLE_EQ(total_cost({{2, 3, 1}, {5, 7, 2}}, 1, 1), 6 + 70);
  EXPECT_DOUBLE_EQ(total_cost({{2, 3, 1}}, 0, 1), 3);
  EXPECT_DOUBLE_EQ(total_cost({{99, 3, 1}}, 0, 1), 3);
  EXPECT_THROW(total_cost({{2, 3, 1}}, -1, 1), ConfigError);
}

}  // namespace
}  // namespace pimdse
