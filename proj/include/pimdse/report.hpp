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

// Input parsing for scheduler scenarios and hardware parameters, and the
// CSV and JSON writers used by the command-line tool. Column orders are
// stable; docs/formats.md lists them.

#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <fstream>
#include <locale>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "pimdse/arch.hpp"
#include "pimdse/costmodel.hpp"
#include "pimdse/error.hpp"
#include "pimdse/mapper.hpp"
#include "pimdse/noc.hpp"
#include "pimdse/scheduler.hpp"
#include "pimdse/tuner.hpp"
#include "pimdse/workload.hpp"

namespace pimdse {

// ---- formatting ----------------------------------------------------------------

// Shortest round-trip text of a double, independent of the global locale.
inline std::string fmt(double v) {
  std::string text;
  for (int p = 6; p <= 17; ++p) {
    std::ostringstream t;
    t.imbue(std::locale::classic());
    t.precision(p);
    t << v;
    text = t.str();
    std::istringstream in(text);
    in.imbue(std::locale::classic());
    double back = 0;
    in >> back;
    if (back == v) break;
  }
  return text;
}

inline std::string read_text(const std::string& path, const std::string& what) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + what + " file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// ---- scheduler scenarios ----------------------------------------------------------

struct Scenario {
  Mesh mesh{1, 1};
  std::vector<SharingSet> sets;
};

inline Scenario parse_scenario(const std::string& text) {
  using Json = nlohmann::json;
  Json doc;
  try {
    doc = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw ParseError(std::string("scenario: malformed JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ParseError("scenario: top level must be an object");
  for (const auto& [key, v] : doc.items())
    if (key != "comment" && key != "mesh" && key != "flit_bits" && key != "sets")
      throw ParseError("scenario." + key + ": unknown field");
  const auto& mesh = doc.value("mesh", Json());
  if (!mesh.is_array() || mesh.size() != 2 || !mesh[0].is_number_integer() || !mesh[1].is_number_integer())
    throw ParseError("scenario.mesh: expected [rows, cols]");
  std::int64_t flit = 64;
  if (doc.contains("flit_bits")) {
    if (!doc["flit_bits"].is_number_integer()) throw ParseError("scenario.flit_bits: expected integer");
    flit = doc["flit_bits"].get<std::int64_t>();
  }
  Scenario s{Mesh(mesh[0].get<int>(), mesh[1].get<int>(), flit), {}};
  if (!doc.contains("sets") || !doc["sets"].is_array()) throw ParseError("scenario.sets: expected array");
  for (std::size_t i = 0; i < doc["sets"].size(); ++i) {
    const auto& js = doc["sets"][i];
    const std::string where = "scenario.sets[" + std::to_string(i) + "]";
    if (!js.is_object()) throw ParseError(where + ": expected object");
    SharingSet set;
    if (!js.contains("members") || !js["members"].is_array()) throw ParseError(where + ".members: expected array");
    for (const auto& m : js["members"]) {
      if (!m.is_array() || m.size() != 2 || !m[0].is_number_integer() || !m[1].is_number_integer())
        throw ParseError(where + ".members: expected [row, col] pairs");
      set.members.push_back({m[0].get<int>(), m[1].get<int>()});
    }
    if (js.contains("chunk_bits")) {
      if (!js["chunk_bits"].is_number_integer()) throw ParseError(where + ".chunk_bits: expected integer");
      set.chunk_bits = js["chunk_bits"].get<std::int64_t>();
    } else if (js.contains("chunk_kib")) {
      if (!js["chunk_kib"].is_number_integer()) throw ParseError(where + ".chunk_kib: expected integer");
      set.chunk_bits = js["chunk_kib"].get<std::int64_t>() * 1024 * 8;
    } else {
      throw ParseError(where + ": chunk_kib or chunk_bits is required");
    }
    if (set.chunk_bits < 1) throw ParseError(where + ": chunk size must be positive");
    const std::string payload = js.value("payload", std::string("input"));
    if (payload == "input") set.payload = Payload::input;
    else if (payload == "weight") set.payload = Payload::weight;
    else if (payload == "psum") set.payload = Payload::psum;
    else throw ParseError(where + ".payload: expected input, weight or psum");
    s.sets.push_back(std::move(set));
  }
  check_sets(s.sets, s.mesh);
  return s;
}

inline Scenario load_scenario(const std::string& path) { return parse_scenario(read_text(path, "scenario")); }

struct ScheduleRow {
  std::string method;
  std::int64_t objective_bits = 0;
  TransferCost cost;
};

// ILP, TSP and SHP on one scenario, in that order.
inline std::vector<ScheduleRow> run_schedulers(const Scenario& s, double pj_per_bit_hop, const IlpOptions& ilp = {}) {
  auto h = schedule_ilp(s.sets, s.mesh, ilp);
  auto t = schedule_tsp(s.sets, s.mesh, ilp.exact_limit);
  auto p = schedule_shp(s.sets, s.mesh);
  return {{"ilp", h.objective_bits, evaluate_schedule(h, s.mesh, pj_per_bit_hop)},
          {"tsp", t.objective_bits, evaluate_schedule(t, s.mesh, pj_per_bit_hop)},
          {"shp", p.objective_bits, evaluate_schedule(p, s.mesh, pj_per_bit_hop)}};
}

inline void write_schedule_csv(std::ostream& os, const std::vector<ScheduleRow>& rows) {
  os << "method,objective_bits,cycles,pj\n";
  for (const auto& r : rows) os << r.method << ',' << r.objective_bits << ',' << r.cost.cycles << ',' << fmt(r.cost.pj) << '\n';
}

// ---- hardware parameters -------------------------------------------------------------

// Either a JSON object with the seven fields or seven comma-separated
// integers in canonical order.
inline HwParams parse_hw_params(const std::string& text) {
  using Json = nlohmann::json;
  static const std::array<const char*, 7> names{"node_rows", "node_cols", "pe_rows", "pe_cols",
                                                "ibuf_kib",  "wbuf_kib",  "obuf_kib"};
  std::array<int, 7> v{};
  auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '{') {
    Json doc;
    try {
      doc = Json::parse(text);
    } catch (const Json::parse_error& e) {
      throw ParseError(std::string("hw: malformed JSON: ") + e.what());
    }
    for (const auto& [key, val] : doc.items()) {
      if (key == "comment") continue;
      auto it = std::find_if(names.begin(), names.end(), [&](const char* n) { return key == n; });
      if (it == names.end()) throw ParseError("hw." + key + ": unknown field");
    }
    for (std::size_t i = 0; i < 7; ++i) {
      if (!doc.contains(names[i]) || !doc[names[i]].is_number_integer())
        throw ParseError(std::string("hw.") + names[i] + ": expected integer");
      v[i] = doc[names[i]].get<int>();
    }
    return HwParams::from_array(v);
  }
  std::istringstream in(text);
  std::string tok;
  std::size_t i = 0;
  while (std::getline(in, tok, ',')) {
    if (i >= 7) throw ParseError("hw: expected seven comma-separated integers");
    try {
      std::size_t used = 0;
      v[i] = std::stoi(tok, &used);
      if (tok.find_first_not_of(" \t", used) != std::string::npos) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw ParseError(std::string("hw.") + names[i] + ": expected integer, got '" + tok + "'");
    }
    ++i;
  }
  if (i != 7) throw ParseError("hw: expected seven comma-separated integers");
  return HwParams::from_array(v);
}

inline nlohmann::json to_json(const HwParams& p) {
  return {{"node_rows", p.node_rows}, {"node_cols", p.node_cols}, {"pe_rows", p.pe_rows}, {"pe_cols", p.pe_cols},
          {"ibuf_kib", p.ibuf_kib},   {"wbuf_kib", p.wbuf_kib},   {"obuf_kib", p.obuf_kib}};
}

// ---- mapping schemes -------------------------------------------------------------

inline nlohmann::json to_json(const Region& r) { return {r.h_pos, r.w_pos, r.h_shape, r.w_shape}; }

inline nlohmann::json to_json(const LayerMapping& lm) {
  nlohmann::json j;
  for (Loop l : kAllLoops) j[std::string(1, loop_char(l))] = {lm.h(l), lm.w(l)};
  j["order"] = lm.order_string();
  return j;
}

inline nlohmann::json to_json(const MappingScheme& s, const DnnGraph& g) {
  nlohmann::json j;
  j["workload"] = g.name;
  j["hw"] = to_json(s.hw);
  j["latency_cycles"] = s.latency_cycles;
  j["energy_pj"] = s.energy_pj;
  j["edp"] = s.edp();
  nlohmann::json segs = nlohmann::json::array();
  for (std::size_t seg = 0; seg < s.segments.size(); ++seg) {
    nlohmann::json regions = nlohmann::json::array();
    for (std::size_t r = 0; r < s.segments[seg].regions.size(); ++r) {
      nlohmann::json layers = nlohmann::json::array();
      for (int id : s.region_layers[seg][r]) {
        const auto& a = s.layers.at(id);
        layers.push_back({{"id", id},
                          {"name", g.layer(id).name},
                          {"lm", to_json(a.lm)},
                          {"wr", a.wr},
                          {"dl_in", to_string(a.dl.in)},
                          {"dl_out", to_string(a.dl.out)},
                          {"stored_weight_bytes", a.size_bytes},
                          {"latency_cycles", a.cost.latency_cycles},
                          {"energy_pj", a.cost.energy_pj()}});
      }
      regions.push_back({{"region", to_json(s.segments[seg].regions[r])}, {"layers", layers}});
    }
    segs.push_back({{"segment", seg}, {"regions", regions}});
  }
  j["segments"] = segs;
  nlohmann::json hist = nlohmann::json::array();
  for (const auto& h : s.history)
    hist.push_back({{"iteration", h.iteration}, {"latency_cycles", h.latency_cycles}, {"energy_pj", h.energy_pj}});
  j["history"] = hist;
  return j;
}

inline void write_cost_csv_header(std::ostream& os) {
  os << "workload,layer_id,layer_name,segment,region,latency_cycles,compute_cycles,dram_cycles,"
        "noc_prologue_cycles,noc_epilogue_cycles,energy_pe_pj,energy_sram_pj,energy_dram_pj,energy_noc_pj,"
        "energy_pj,dram_accesses,row_activations\n";
}

// One row per layer in segment and region order, then a `total` row whose
// latency is the scheme latency and whose energies are sums.
inline void write_cost_csv_rows(std::ostream& os, const MappingScheme& s, const DnnGraph& g) {
  CostReport total;
  for (std::size_t seg = 0; seg < s.segments.size(); ++seg)
    for (std::size_t r = 0; r < s.segments[seg].regions.size(); ++r)
      for (int id : s.region_layers[seg][r]) {
        const auto& c = s.layers.at(id).cost;
        total.add_energy(c);
        total.compute_cycles += c.compute_cycles;
        total.dram_cycles += c.dram_cycles;
        total.noc_prologue_cycles += c.noc_prologue_cycles;
        total.noc_epilogue_cycles += c.noc_epilogue_cycles;
        os << g.name << ',' << id << ',' << g.layer(id).name << ',' << seg << ',' << r << ',' << c.latency_cycles
           << ',' << c.compute_cycles << ',' << c.dram_cycles << ',' << c.noc_prologue_cycles << ','
           << c.noc_epilogue_cycles << ',' << fmt(c.energy_pe_pj) << ',' << fmt(c.energy_sram_pj) << ','
           << fmt(c.energy_dram_pj) << ',' << fmt(c.energy_noc_pj) << ',' << fmt(c.energy_pj()) << ','
           << c.dram_accesses << ',' << c.row_activations << '\n';
      }
  os << g.name << ",total,," << ",," << s.latency_cycles << ',' << total.compute_cycles << ',' << total.dram_cycles
     << ',' << total.noc_prologue_cycles << ',' << total.noc_epilogue_cycles << ',' << fmt(total.energy_pe_pj) << ','
     << fmt(total.energy_sram_pj) << ',' << fmt(total.energy_dram_pj) << ',' << fmt(total.energy_noc_pj) << ','
     << fmt(s.energy_pj) << ',' << total.dram_accesses << ',' << total.row_activations << '\n';
}

// ---- tuning history ----------------------------------------------------------------

inline void write_tune_csv(std::ostream& os, const TuneResult& r, const std::vector<std::string>& workloads) {
  os << "iteration,node_rows,node_cols,pe_rows,pe_cols,ibuf_kib,wbuf_kib,obuf_kib,area_mm2";
  for (const auto& w : workloads) os << ',' << w << "_latency_cycles," << w << "_energy_pj";
  os << ",cost,filter_false_negative\n";
  for (const auto& h : r.history) {
    os << h.iteration;
    for (int v : h.params.as_array()) os << ',' << v;
    os << ',' << fmt(h.area_mm2);
    for (const auto& w : h.workloads) os << ',' << w.latency_cycles << ',' << fmt(w.energy_pj);
    os << ',' << fmt(h.cost) << ',' << fmt(h.filter_false_negative) << '\n';
  }
}

inline nlohmann::json to_json(const TuneResult& r, double alpha, double beta) {
  nlohmann::json j;
  j["alpha"] = alpha;
  j["beta"] = beta;
  j["evaluations"] = r.history.size();
  j["warnings"] = r.warnings;
  if (r.best) {
    nlohmann::json wl = nlohmann::json::array();
    for (const auto& w : r.best->workloads)
      wl.push_back({{"name", w.name}, {"latency_cycles", w.latency_cycles}, {"energy_pj", w.energy_pj}});
    j["best"] = {{"iteration", r.best->iteration},
                 {"hw", to_json(r.best->params)},
                 {"area_mm2", r.best->area_mm2},
                 {"cost", r.best->cost},
                 {"workloads", wl}};
  } else {
    j["best"] = nullptr;
  }
  return j;
}

// ---- errors ----------------------------------------------------------------------

// Single-line record for stderr.
inline std::string error_record(const std::string& kind, const std::string& message) {
  return nlohmann::json{{"error", kind}, {"message", message}}.dump();
}

}  // namespace pimdse
