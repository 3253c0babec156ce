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

#include "oracles/cycle_enum.hpp"
#include "pimdse/scheduler.hpp"
#include "support/instances.hpp"

namespace pimdse {
namespace {

using testing_support::interleaved_sets;
using testing_support::random_sharing_instance;

SharingSet make_set(std::vector<Coord> members, std::int64_t chunk) { return {std::move(members), chunk, Payload::input}; }

void expect_valid_cycles(const HamiltonSchedule& h, const std::vector<SharingSet>& sets) {
  ASSERT_EQ(h.cycles.size(), sets.size());
  for (std::size_t s = 0; s < sets.size(); ++s) {
    auto succ = h.successors(s);
    std::vector<int> u;
    EXPECT_TRUE(mtz_certificate(succ, &u));
    for (int v : u) {
      EXPECT_GE(v, 0);
      EXPECT_LE(v, sets[s].size() - 1);
    }
  }
}

TEST(SharingSets, KOnlyRowGivesOneInputSet) {
  Layer l;
  l.out_channels = 16;
  l.in_channels = 8;
  l.out_h = l.out_w = 4;
  LayerMapping lm;
  lm.pw[static_cast<int>(Loop::K)] = 4;
  auto sets = build_sharing_sets(LoopBounds::of(l), lm, 4, Region{0, 0, 1, 4});
  ASSERT_EQ(sets.size(), 1u);
  EXPECT_EQ(sets[0].size(), 4);
  EXPECT_EQ(sets[0].payload, Payload::input);
  EXPECT_EQ(sets[0].chunk_bits, LoopBounds::of(l).ifmap_count() * 16 / 4);
}

TEST(SharingSets, FullReplicationNeedsNoWeightSets) {
  Layer l;
  l.batch = 4;
  l.out_channels = l.in_channels = 8;
  LayerMapping lm;
  lm.ph[static_cast<int>(Loop::B)] = 2;
  lm.pw[static_cast<int>(Loop::B)] = 2;
  EXPECT_TRUE(build_sharing_sets(LoopBounds::of(l), lm, 4, Region{0, 0, 2, 2}).empty());
}

TEST(SharingSets, TwelveNodesFiveCopies) {
  Layer l;
  l.batch = 12;
  l.out_channels = l.in_channels = 8;
  l.kernel_h = l.kernel_w = 3;
  l.out_h = l.out_w = 4;
  LayerMapping lm;
  lm.ph[static_cast<int>(Loop::B)] = 3;
  lm.pw[static_cast<int>(Loop::B)] = 4;
  auto sets = build_sharing_sets(LoopBounds::of(l), lm, 5, Region{0, 0, 3, 4});
  ASSERT_EQ(sets.size(), 4u);
  std::int64_t w_bits = 8 * 8 * 9 * 16;
  for (const auto& s : sets) {
    EXPECT_EQ(s.payload, Payload::weight);
    EXPECT_EQ(s.size(), 3);
    EXPECT_EQ(s.chunk_bits, w_bits / 3);
  }
  EXPECT_EQ(max_stored_weight_bytes(LoopBounds::of(l), lm, 5), (8 * 8 * 9 * 2 + 2) / 3);
}

TEST(SharingSets, WeightGroupsAreNearlyEqual) {
  for (int n = 1; n <= 40; ++n)
    for (int wr = 1; wr <= n; ++wr) {
      auto groups = weight_groups(n, wr);
      int g = (n + wr - 1) / wr;
      std::size_t total = 0, lo = 1000, hi = 0;
      for (const auto& grp : groups) {
        total += grp.size();
        lo = std::min(lo, grp.size());
        hi = std::max(hi, grp.size());
      }
      EXPECT_EQ(total, static_cast<std::size_t>(n));
      EXPECT_LE(hi - lo, 1u);
      EXPECT_LE(hi, static_cast<std::size_t>(g));
      EXPECT_LE(static_cast<int>(groups.size()), wr);
    }
}

TEST(Ilp, TwoNodeSet) {
  Mesh m(2, 2, 64);
  std::vector<SharingSet> sets{make_set({{0, 0}, {1, 1}}, 512)};
  auto h = schedule_ilp(sets, m);
  EXPECT_EQ(h.objective_bits, 512);
  auto t = schedule_tsp(sets, m);
  EXPECT_EQ(t.objective_bits, 512);
  EXPECT_EQ(schedule_shp(sets, m).objective_bits, 512);
  expect_valid_cycles(h, sets);
}

TEST(Ilp, SquareRing) {
  Mesh m(2, 2, 64);
  std::vector<SharingSet> sets{make_set({{0, 0}, {0, 1}, {1, 0}, {1, 1}}, 1)};
  auto h = schedule_ilp(sets, m);
  EXPECT_EQ(h.objective_bits, 3);
  EXPECT_EQ(oracle::brute_force_min_max_load(sets, m), 3);
  EXPECT_EQ(schedule_tsp(sets, m).objective_bits, 3);
  for (int l : m.links()) {
    std::int64_t v = h.loads.at(l);
    EXPECT_TRUE(v == 0 || v == 3);
  }
}

TEST(Ilp, InterleavedPairOnFourByFour) {
  Mesh m(4, 4, 64);
  auto all = interleaved_sets(4, 4, 2, 64);
  std::vector<SharingSet> sets{all[0], all[3]};
  auto h = schedule_ilp(sets, m);
  EXPECT_EQ(h.objective_bits, oracle::brute_force_min_max_load(sets, m));
  EXPECT_TRUE(h.proven_optimal);
  expect_valid_cycles(h, sets);
}

TEST(Ilp, MatchesBruteForceOnRandomInstances) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 25; ++trial) {
    auto inst = random_sharing_instance(rng, 6);
    auto h = schedule_ilp(inst.sets, inst.mesh);
    ASSERT_EQ(h.objective_bits, oracle::brute_force_min_max_load(inst.sets, inst.mesh)) << "trial " << trial;
    ASSERT_LE(h.objective_bits, schedule_tsp(inst.sets, inst.mesh).objective_bits);
    expect_valid_cycles(h, inst.sets);
  }
}

TEST(Ilp, CoordinateDescentStaysExactPerSet) {
  // Force the per-set path by lowering the joint limit.
  std::mt19937_64 rng(5);
  IlpOptions opt;
  opt.joint_product_limit = 30;
  for (int trial = 0; trial < 15; ++trial) {
    auto inst = random_sharing_instance(rng, 6);
    auto h = schedule_ilp(inst.sets, inst.mesh, opt);
    EXPECT_LE(h.objective_bits, schedule_tsp(inst.sets, inst.mesh).objective_bits);
    EXPECT_GE(h.objective_bits, oracle::brute_force_min_max_load(inst.sets, inst.mesh));
    expect_valid_cycles(h, inst.sets);
  }
}

TEST(Ilp, RelabelingKeepsObjective) {
  std::mt19937_64 rng(33);
  for (int trial = 0; trial < 20; ++trial) {
    auto inst = random_sharing_instance(rng, 6);
    auto base = schedule_ilp(inst.sets, inst.mesh).objective_bits;
    auto shuffled = inst.sets;
    for (auto& s : shuffled) std::shuffle(s.members.begin(), s.members.end(), rng);
    EXPECT_EQ(schedule_ilp(shuffled, inst.mesh).objective_bits, base);
  }
}

TEST(Ilp, OffMeshMemberThrows) {
  Mesh m(2, 2, 64);
  std::vector<SharingSet> sets{make_set({{0, 0}, {2, 1}}, 8)};
  EXPECT_THROW(schedule_ilp(sets, m), ConfigError);
}

// Minimum-hop cycles can pile onto shared links that a load-aware choice
// avoids.
TEST(Tsp, StrictlyWorseInstanceExists) {
  std::mt19937_64 rng(101);
  int strict = 0;
  for (int trial = 0; trial < 300 && strict == 0; ++trial) {
    auto inst = random_sharing_instance(rng, 6);
    auto ilp = schedule_ilp(inst.sets, inst.mesh).objective_bits;
    auto tsp = schedule_tsp(inst.sets, inst.mesh).objective_bits;
    ASSERT_LE(ilp, tsp);
    if (ilp < tsp) ++strict;
  }
  EXPECT_GT(strict, 0);
}

TEST(Tsp, HeldKarpIsMinimumHop) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 30; ++trial) {
    auto inst = random_sharing_instance(rng, 7);
    auto h = schedule_tsp(inst.sets, inst.mesh);
    for (std::size_t s = 0; s < inst.sets.size(); ++s) {
      const auto& set = inst.sets[s];
      auto len = [&](const std::vector<int>& c) {
        int total = 0;
        for (std::size_t i = 0; i < c.size(); ++i)
          total += manhattan(set.members[static_cast<std::size_t>(c[i])],
                             set.members[static_cast<std::size_t>(c[(i + 1) % c.size()])]);
        return total;
      };
      int best = 1 << 30;
      for (const auto& c : oracle::all_cycles(set.size())) best = std::min(best, len(c));
      EXPECT_EQ(len(h.cycles[s]), best);
    }
  }
}

TEST(Shp, RowSetLoadsTheCenter) {
  Mesh m(1, 4, 64);
  std::vector<SharingSet> sets{make_set({{0, 0}, {0, 1}, {0, 2}, {0, 3}}, 64)};
  auto r = schedule_shp(sets, m);
  std::int64_t edge = r.loads.at(m.link_id({0, 0}, Dir::east));
  std::int64_t center = r.loads.at(m.link_id({0, 1}, Dir::east));
  EXPECT_GT(center, edge);
}

// Every unicast takes a shortest path, so the summed load is the minimum
// possible bits times hops for delivering every chunk to every member.
TEST(Shp, DeliveriesAreHopMinimal) {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 50; ++trial) {
    auto inst = random_sharing_instance(rng, 7);
    auto r = schedule_shp(inst.sets, inst.mesh);
    std::int64_t want = 0;
    for (const auto& s : inst.sets)
      for (const auto& a : s.members)
        for (const auto& b : s.members) want += s.chunk_bits * manhattan(a, b);
    EXPECT_EQ(r.loads.total(), want);
  }
}

TEST(Ilp, SixteenMemberSetsUseLocalSearch) {
  Mesh m(8, 8, 64);
  auto sets = interleaved_sets(8, 8, 2, 8 * 1024 * 8);
  auto h = schedule_ilp(sets, m);
  EXPECT_FALSE(h.proven_optimal);
  EXPECT_LE(h.objective_bits, schedule_tsp(sets, m).objective_bits);
  EXPECT_LE(h.objective_bits, schedule_shp(sets, m).objective_bits);
  expect_valid_cycles(h, sets);
  auto cost = evaluate_schedule(h, m, 1.1);
  EXPECT_EQ(cost.cycles, (h.objective_bits + 63) / 64);
}

TEST(Mtz, RejectsSubtours) {
  EXPECT_TRUE(mtz_certificate({1, 2, 3, 0}));
  EXPECT_FALSE(mtz_certificate({1, 0, 3, 2}));
  EXPECT_FALSE(mtz_certificate({1, 1, 3, 0}));
}

}  // namespace
}  // namespace pimdse
