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

#include "pimdse/arch.hpp"

namespace pimdse {
namespace {

const HwConstraints kDefault{};

TEST(Validate, NonDividingNodeArray) {
  HwParams p;
  p.node_rows = 5;
  auto v = validate_params(p, kDefault);
  EXPECT_FALSE(v.legal);
  EXPECT_EQ(v.violated, "node_rows_divides_bank_rows");
}

TEST(Validate, ReferenceConfigurationsAreLegal) {
  HwParams big{4, 4, 32, 32, 128, 128, 128};
  EXPECT_TRUE(validate_params(big, kDefault).legal) << total_area(big, kDefault);
  HwParams many{16, 16, 8, 8, 8, 8, 8};
  EXPECT_TRUE(validate_params(many, kDefault).legal) << total_area(many, kDefault);
}

TEST(Validate, BufferAboveRange) {
  HwParams p;
  p.ibuf_kib = 4096;
  auto v = validate_params(p, kDefault);
  EXPECT_FALSE(v.legal);
  EXPECT_EQ(v.violated, "ibuf_range");
}

TEST(Validate, LargestCornerExceedsArea) {
  for (int n : {2, 4, 8, 16}) {
    HwParams p{n, n, 256, 256, 2048, 2048, 2048};
    auto v = validate_params(p, kDefault);
    EXPECT_FALSE(v.legal);
    EXPECT_EQ(v.violated, "area_budget");
  }
}

TEST(NodeProps, DerivedQuantities) {
  auto a = derive_node_props({4, 4, 32, 32, 128, 128, 128}, kDefault);
  EXPECT_EQ(a.banks_per_node, 16);
  EXPECT_EQ(a.dram_width_bits, 2048);
  EXPECT_EQ(a.cap_bytes, 128LL << 20);
  EXPECT_EQ(a.flit_bits, 1024);

  auto b = derive_node_props({16, 16, 8, 8, 8, 8, 8}, kDefault);
  EXPECT_EQ(b.banks_per_node, 1);
  EXPECT_EQ(b.dram_width_bits, 128);
  EXPECT_EQ(b.cap_bytes, 8LL << 20);
  EXPECT_EQ(b.flit_bits, 64);

  auto c = derive_node_props({16, 8, 8, 8, 8, 8, 8}, kDefault);
  EXPECT_EQ(c.banks_per_node, 2);
  EXPECT_EQ(c.cap_bytes, 16LL << 20);

  EXPECT_THROW(derive_node_props({3, 4, 8, 8, 8, 8, 8}, kDefault), ConfigError);
}

TEST(AreaModel, MinimumPointAndLinearity) {
  HwParams p{2, 2, 1, 1, 1, 1, 1};
  EXPECT_DOUBLE_EQ(area_model(p, kDefault),
                   kDefault.area_per_pe_mm2 + 3 * kDefault.area_per_sram_kib_mm2 + kDefault.area_fixed_mm2);
  HwParams q{2, 2, 16, 8, 1, 1, 1};
  HwParams q2 = q;
  q2.pe_rows *= 2;
  double pe_term = area_model(q, kDefault) - area_model(p, kDefault) + kDefault.area_per_pe_mm2;
  double pe_term2 = area_model(q2, kDefault) - area_model(p, kDefault) + kDefault.area_per_pe_mm2;
  EXPECT_NEAR(pe_term2, 2 * pe_term, 1e-12);
}

TEST(AreaModel, MonotoneInEveryParameter) {
  std::mt19937 rng(5);
  for (int trial = 0; trial < 500; ++trial) {
    auto a = HwParams{2, 2, 1 + static_cast<int>(rng() % 256), 1 + static_cast<int>(rng() % 256),
                      1 + static_cast<int>(rng() % 2048), 1 + static_cast<int>(rng() % 2048),
                      1 + static_cast<int>(rng() % 2048)}
                 .as_array();
    auto b = a;
    int k = 2 + static_cast<int>(rng() % 5);
    b[static_cast<std::size_t>(k)] += 1 + static_cast<int>(rng() % 10);
    EXPECT_LT(area_model(HwParams::from_array(a), kDefault), area_model(HwParams::from_array(b), kDefault));
  }
}

TEST(Validate, LegalImpliesDerivable) {
  std::mt19937 rng(9);
  int legal = 0;
  for (int trial = 0; trial < 2000; ++trial) {
    HwParams p{2 + static_cast<int>(rng() % 15), 2 + static_cast<int>(rng() % 15), 1 + static_cast<int>(rng() % 256),
               1 + static_cast<int>(rng() % 256), 1 + static_cast<int>(rng() % 2048),
               1 + static_cast<int>(rng() % 2048), 1 + static_cast<int>(rng() % 2048)};
    if (validate_params(p, kDefault).legal) {
      ++legal;
      EXPECT_NO_THROW(derive_node_props(p, kDefault));
    }
  }
  EXPECT_GT(legal, 0);
}

TEST(Validate, LegalNodeExtents) {
  EXPECT_EQ(legal_node_extents(16, kDefault), (std::vector<int>{2, 4, 8, 16}));
}

TEST(Constraints, ParseOverridesAndDefaults) {
  auto c = parse_constraints(R"({"bank_rows": 8, "dram_pj_per_bit": 1.0, "comment": "x"})");
  EXPECT_EQ(c.bank_rows, 8);
  EXPECT_EQ(c.bank_cols, 16);
  EXPECT_DOUBLE_EQ(c.activation_pj, 1024.0);
  EXPECT_THROW(parse_constraints(R"({"bank_rowz": 8})"), ParseError);
  EXPECT_THROW(parse_constraints(R"({"bank_rows": "8"})"), ParseError);
}

TEST(Constraints, SampleFileMatchesDefaults) {
  auto c = load_constraints("samples/constraints_default.json");
  EXPECT_EQ(c.bank_rows, kDefault.bank_rows);
  EXPECT_EQ(c.bank_capacity_bytes, kDefault.bank_capacity_bytes);
  EXPECT_DOUBLE_EQ(c.area_per_pe_mm2, kDefault.area_per_pe_mm2);
  EXPECT_DOUBLE_EQ(c.area_per_sram_kib_mm2, kDefault.area_per_sram_kib_mm2);
  EXPECT_DOUBLE_EQ(c.area_fixed_mm2, kDefault.area_fixed_mm2);
  EXPECT_DOUBLE_EQ(c.activation_pj, kDefault.activation_pj);
}

}  // namespace
}  // namespace pimdse
