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

// Hardware parameters of a stacked-DRAM PIM accelerator, the fixed substrate
// constants, legality checks and the linear NN-engine area model.

#pragma once

#include <array>
#include <cstdint>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "json.hpp"
#include "pimdse/error.hpp"

namespace pimdse {

// The seven tunable parameters, in canonical order.
struct HwParams {
  int node_rows = 4;  // PIM-node array rows
  int node_cols = 4;
  int pe_rows = 32;  // PE array rows per node
  int pe_cols = 32;
  int ibuf_kib = 128;
  int wbuf_kib = 128;
  int obuf_kib = 128;

  int node_count() const { return node_rows * node_cols; }
  std::array<int, 7> as_array() const {
    return {node_rows, node_cols, pe_rows, pe_cols, ibuf_kib, wbuf_kib, obuf_kib};
  }
  static HwParams from_array(const std::array<int, 7>& a) {
    return HwParams{a[0], a[1], a[2], a[3], a[4], a[5], a[6]};
  }
  std::int64_t ibuf_bytes() const { return std::int64_t{ibuf_kib} * 1024; }
  std::int64_t wbuf_bytes() const { return std::int64_t{wbuf_kib} * 1024; }
  std::int64_t obuf_bytes() const { return std::int64_t{obuf_kib} * 1024; }

  friend bool operator==(const HwParams&, const HwParams&) = default;
  friend bool operator<(const HwParams& a, const HwParams& b) { return a.as_array() < b.as_array(); }
};

inline std::string to_string(const HwParams& p) {
  std::ostringstream os;
  os << p.node_rows << "x" << p.node_cols << " pe=" << p.pe_rows << "x" << p.pe_cols
     << " buf=" << p.ibuf_kib << "/" << p.wbuf_kib << "/" << p.obuf_kib << "KiB";
  return os.str();
}

// Substrate constants plus cost-model coefficients. Defaults describe a
// 16x16-bank stack with 128-bit, 8 MiB banks and a 48 mm^2 logic budget.
struct HwConstraints {
  int bank_rows = 16;
  int bank_cols = 16;
  int bank_width_bits = 128;
  std::int64_t bank_capacity_bytes = 8LL << 20;
  double area_budget_mm2 = 48.0;
  double clock_hz = 400e6;
  double dram_pj_per_bit = 0.88;
  double noc_pj_per_bit_hop = 1.1;

  // Linear area model: a_pe * PEs + a_sram * KiB + a_fixed (router, controller).
  // Calibrated so the 4x4 / 32x32 PE / 3x128 KiB and the 16x16 / 8x8 PE /
  // 3x8 KiB arrays both fit in 48 mm^2 while the 256x256 / 3x2048 KiB corner
  // exceeds it for every legal node count.
  double area_per_pe_mm2 = 0.001;
  double area_per_sram_kib_mm2 = 0.002;
  double area_fixed_mm2 = 0.05;

  // Row-buffer model.
  std::int64_t row_bytes_per_bank = 2048;
  int row_cycle_cycles = 3;
  double activation_pj = 1024 * 0.88;

  // NN-engine energy.
  double mac_pj = 0.26;
  double sram_pj_per_bit = 0.03;

  // Tunable ranges.
  int min_nodes = 2, max_nodes = 16;
  int min_pe = 1, max_pe = 256;
  int min_buf_kib = 1, max_buf_kib = 2048;

  int total_banks() const { return bank_rows * bank_cols; }
};

struct NodeProps {
  int banks_per_node = 0;
  std::int64_t dram_width_bits = 0;
  std::int64_t cap_bytes = 0;
  std::int64_t flit_bits = 0;
  std::int64_t row_bytes = 0;  // effective open-row size across bound banks
  double node_area_mm2 = 0.0;
};

// Area of one PIM-node's NN engine and fixed logic, in mm^2.
inline double area_model(const HwParams& p, const HwConstraints& c) {
  return c.area_per_pe_mm2 * static_cast<double>(p.pe_rows) * p.pe_cols +
         c.area_per_sram_kib_mm2 * static_cast<double>(p.ibuf_kib + p.wbuf_kib + p.obuf_kib) +
         c.area_fixed_mm2;
}

inline double total_area(const HwParams& p, const HwConstraints& c) {
  return area_model(p, c) * p.node_count();
}

struct Verdict {
  bool legal = true;
  std::string violated;  // name of the first violated constraint

  explicit operator bool() const { return legal; }
};

inline Verdict check_divisibility(const HwParams& p, const HwConstraints& c) {
  if (p.node_rows <= 0 || c.bank_rows % p.node_rows != 0) return {false, "node_rows_divides_bank_rows"};
  if (p.node_cols <= 0 || c.bank_cols % p.node_cols != 0) return {false, "node_cols_divides_bank_cols"};
  return {};
}

inline Verdict check_ranges(const HwParams& p, const HwConstraints& c) {
  auto in = [](int v, int lo, int hi) { return v >= lo && v <= hi; };
  if (!in(p.node_rows, c.min_nodes, c.max_nodes)) return {false, "node_rows_range"};
  if (!in(p.node_cols, c.min_nodes, c.max_nodes)) return {false, "node_cols_range"};
  if (!in(p.pe_rows, c.min_pe, c.max_pe)) return {false, "pe_rows_range"};
  if (!in(p.pe_cols, c.min_pe, c.max_pe)) return {false, "pe_cols_range"};
  if (!in(p.ibuf_kib, c.min_buf_kib, c.max_buf_kib)) return {false, "ibuf_range"};
  if (!in(p.wbuf_kib, c.min_buf_kib, c.max_buf_kib)) return {false, "wbuf_range"};
  if (!in(p.obuf_kib, c.min_buf_kib, c.max_buf_kib)) return {false, "obuf_range"};
  return {};
}

// Never throws; reports the first violated constraint by name.
inline Verdict validate_params(const HwParams& p, const HwConstraints& c) {
  if (auto v = check_ranges(p, c); !v) return v;
  if (auto v = check_divisibility(p, c); !v) return v;
  if (total_area(p, c) > c.area_budget_mm2) return {false, "area_budget"};
  return {};
}

inline NodeProps derive_node_props(const HwParams& p, const HwConstraints& c) {
  if (auto v = check_divisibility(p, c); !v) throw ConfigError("illegal node array: " + v.violated);
  NodeProps n;
  n.banks_per_node = (c.bank_rows / p.node_rows) * (c.bank_cols / p.node_cols);
  n.dram_width_bits = std::int64_t{n.banks_per_node} * c.bank_width_bits;
  n.cap_bytes = n.banks_per_node * c.bank_capacity_bytes;
  n.flit_bits = n.dram_width_bits / 2;
  n.row_bytes = n.banks_per_node * c.row_bytes_per_bank;
  n.node_area_mm2 = area_model(p, c);
  return n;
}

// Node-array extents that divide the bank array and respect the range.
inline std::vector<int> legal_node_extents(int banks, const HwConstraints& c) {
  std::vector<int> out;
  for (int v = c.min_nodes; v <= c.max_nodes; ++v)
    if (banks % v == 0) out.push_back(v);
  return out;
}

// Reads a constraints document; absent fields keep their defaults.
inline HwConstraints parse_constraints(const std::string& text) {
  using Json = nlohmann::json;
  Json doc;
  try {
    doc = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw ParseError(std::string("constraints: malformed JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ParseError("constraints: top level must be an object");
  HwConstraints c;
  bool activation_given = false;
  for (const auto& [key, v] : doc.items()) {
    auto num = [&]() {
      if (!v.is_number()) throw ParseError("constraints." + key + ": expected number");
      return v.get<double>();
    };
    auto pos_int = [&]() -> std::int64_t {
      if (!v.is_number_integer() || v.get<std::int64_t>() < 1)
        throw ParseError("constraints." + key + ": expected positive integer");
      return v.get<std::int64_t>();
    };
    if (key == "bank_rows") c.bank_rows = static_cast<int>(pos_int());
    else if (key == "bank_cols") c.bank_cols = static_cast<int>(pos_int());
    else if (key == "bank_width_bits") c.bank_width_bits = static_cast<int>(pos_int());
    else if (key == "bank_capacity_bytes") c.bank_capacity_bytes = pos_int();
    else if (key == "area_budget_mm2") c.area_budget_mm2 = num();
    else if (key == "clock_hz") c.clock_hz = num();
    else if (key == "dram_pj_per_bit") c.dram_pj_per_bit = num();
    else if (key == "noc_pj_per_bit_hop") c.noc_pj_per_bit_hop = num();
    else if (key == "area_per_pe_mm2") c.area_per_pe_mm2 = num();
    else if (key == "area_per_sram_kib_mm2") c.area_per_sram_kib_mm2 = num();
    else if (key == "area_fixed_mm2") c.area_fixed_mm2 = num();
    else if (key == "row_bytes_per_bank") c.row_bytes_per_bank = pos_int();
    else if (key == "row_cycle_cycles") c.row_cycle_cycles = static_cast<int>(pos_int());
    else if (key == "activation_pj") { c.activation_pj = num(); activation_given = true; }
    else if (key == "mac_pj") c.mac_pj = num();
    else if (key == "sram_pj_per_bit") c.sram_pj_per_bit = num();
    else if (key == "min_nodes") c.min_nodes = static_cast<int>(pos_int());
    else if (key == "max_nodes") c.max_nodes = static_cast<int>(pos_int());
    else if (key == "min_pe") c.min_pe = static_cast<int>(pos_int());
    else if (key == "max_pe") c.max_pe = static_cast<int>(pos_int());
    else if (key == "min_buf_kib") c.min_buf_kib = static_cast<int>(pos_int());
    else if (key == "max_buf_kib") c.max_buf_kib = static_cast<int>(pos_int());
    else if (key == "comment") continue;
    else throw ParseError("constraints." + key + ": unknown field");
  }
  if (!activation_given) c.activation_pj = 1024 * c.dram_pj_per_bit;
  return c;
}

inline HwConstraints load_constraints(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open constraints file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_constraints(ss.str());
}

}  // namespace pimdse
