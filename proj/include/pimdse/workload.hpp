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

// DNN workload graphs: convolution / matrix-multiplication layers plus
// auxiliary (pooling, add, concat) layers, and the slicing of a graph into
// serial segments whose branches can run in parallel.

#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <queue>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "json.hpp"
#include "pimdse/error.hpp"

namespace pimdse {

enum class LayerKind { conv, matmul, aux };

inline const char* to_string(LayerKind k) {
  switch (k) {
    case LayerKind::conv: return "conv";
    case LayerKind::matmul: return "matmul";
    case LayerKind::aux: return "aux";
  }
  return "?";
}

struct Layer {
  int id = 0;
  std::string name;
  LayerKind kind = LayerKind::conv;
  std::int64_t batch = 1;
  std::int64_t out_channels = 1;  // K
  std::int64_t in_channels = 1;   // C
  std::int64_t out_h = 1;         // P
  std::int64_t out_w = 1;         // Q
  std::int64_t kernel_h = 1;
  std::int64_t kernel_w = 1;
  int stride_h = 1;
  int stride_w = 1;
  int pad_h = 0;
  int pad_w = 0;
  int data_bits = 16;
  int psum_bits = 32;
  std::vector<int> preds;

  std::int64_t in_h() const { return (out_h - 1) * stride_h + kernel_h - 2 * pad_h; }
  std::int64_t in_w() const { return (out_w - 1) * stride_w + kernel_w - 2 * pad_w; }

  std::int64_t macs() const {
    if (kind == LayerKind::aux) return 0;
    return batch * out_channels * in_channels * out_h * out_w * kernel_h * kernel_w;
  }
  std::int64_t weight_count() const {
    if (kind == LayerKind::aux) return 0;
    return out_channels * in_channels * kernel_h * kernel_w;
  }
  std::int64_t ofmap_count() const { return batch * out_channels * out_h * out_w; }
  std::int64_t ifmap_count() const { return batch * in_channels * in_h() * in_w(); }
  std::int64_t weight_bytes() const { return weight_count() * data_bits / 8; }
  std::int64_t ofmap_bytes() const { return ofmap_count() * data_bits / 8; }
};

struct Branch {
  int index = 0;
  std::vector<int> layers;  // serial, in execution order
};

struct Segment {
  int index = 0;
  std::vector<Branch> branches;

  std::size_t branch_count() const { return branches.size(); }
};

class DnnGraph {
 public:
  std::string name;
  double gamma = 1.0;
  std::int64_t batch = 1;

  DnnGraph() = default;

  // Validates ids, references and acyclicity; throws GraphError.
  DnnGraph(std::string graph_name, double graph_gamma, std::int64_t graph_batch,
           std::vector<Layer> graph_layers)
      : name(std::move(graph_name)),
        gamma(graph_gamma),
        batch(graph_batch),
        layers_(std::move(graph_layers)) {
    build_index();
  }

  const std::vector<Layer>& layers() const { return layers_; }
  const Layer& layer(int id) const {
    auto it = index_.find(id);
    if (it == index_.end()) throw GraphError("unknown layer id " + std::to_string(id));
    return layers_[it->second];
  }
  bool contains(int id) const { return index_.count(id) != 0; }

  // Deterministic topological order (Kahn with smallest-id priority).
  const std::vector<int>& topo_order() const { return topo_; }
  const std::vector<int>& successors(int id) const { return succs_.at(id); }

  // Non-aux predecessors, seen through chains of aux layers.
  std::vector<int> compute_preds(int id) const {
    std::set<int> out;
    std::vector<int> stack(layer(id).preds.begin(), layer(id).preds.end());
    std::set<int> seen;
    while (!stack.empty()) {
      int u = stack.back();
      stack.pop_back();
      if (!seen.insert(u).second) continue;
      const Layer& l = layer(u);
      if (l.kind == LayerKind::aux) {
        stack.insert(stack.end(), l.preds.begin(), l.preds.end());
      } else {
        out.insert(u);
      }
    }
    return {out.begin(), out.end()};
  }

  std::vector<int> compute_layer_ids() const {
    std::vector<int> ids;
    for (int id : topo_)
      if (layer(id).kind != LayerKind::aux) ids.push_back(id);
    return ids;
  }

  // Host layer whose branch carries an aux layer as an epilogue: the latest
  // (in topological order) non-aux producer, else the earliest non-aux
  // consumer, else -1.
  int aux_host(int aux_id) const {
    std::unordered_map<int, std::size_t> pos;
    for (std::size_t i = 0; i < topo_.size(); ++i) pos[topo_[i]] = i;
    auto producers = compute_preds(aux_id);
    if (!producers.empty()) {
      return *std::max_element(producers.begin(), producers.end(),
                               [&](int a, int b) { return pos[a] < pos[b]; });
    }
    std::vector<int> stack(succs_.at(aux_id).begin(), succs_.at(aux_id).end());
    std::set<int> seen;
    int best = -1;
    while (!stack.empty()) {
      int u = stack.back();
      stack.pop_back();
      if (!seen.insert(u).second) continue;
      if (layer(u).kind != LayerKind::aux) {
        if (best < 0 || pos[u] < pos[best]) best = u;
      } else {
        stack.insert(stack.end(), succs_.at(u).begin(), succs_.at(u).end());
      }
    }
    return best;
  }

  // Bytes moved through DRAM by an aux layer: every operand read once and
  // the result written once.
  std::int64_t aux_traffic_bytes(int aux_id) const {
    const Layer& a = layer(aux_id);
    std::int64_t bytes = a.ofmap_bytes();
    for (int p : a.preds) bytes += layer(p).ofmap_bytes();
    return bytes;
  }

 private:
  void build_index() {
    index_.clear();
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      if (!index_.emplace(layers_[i].id, i).second)
        throw GraphError("duplicate layer id " + std::to_string(layers_[i].id));
    }
    succs_.clear();
    for (const auto& l : layers_) succs_[l.id];
    std::map<int, int> indeg;
    for (const auto& l : layers_) {
      indeg[l.id];
      for (int p : l.preds) {
        if (!index_.count(p))
          throw GraphError("layer " + std::to_string(l.id) + " references missing pred " +
                           std::to_string(p));
        if (p == l.id) throw GraphError("layer " + std::to_string(l.id) + " is its own pred");
        succs_[p].push_back(l.id);
        ++indeg[l.id];
      }
    }
    for (auto& [id, s] : succs_) {
      std::sort(s.begin(), s.end());
      s.erase(std::unique(s.begin(), s.end()), s.end());
    }
    // Recount in-degrees after de-duplication of repeated pred entries.
    for (auto& [id, d] : indeg) d = 0;
    for (const auto& [id, s] : succs_)
      for (int v : s) ++indeg[v];
    std::priority_queue<int, std::vector<int>, std::greater<>> ready;
    for (const auto& [id, d] : indeg)
      if (d == 0) ready.push(id);
    topo_.clear();
    while (!ready.empty()) {
      int u = ready.top();
      ready.pop();
      topo_.push_back(u);
      for (int v : succs_[u])
        if (--indeg[v] == 0) ready.push(v);
    }
    if (topo_.size() != layers_.size()) throw GraphError("graph '" + name + "' contains a cycle");
  }

  std::vector<Layer> layers_;
  std::unordered_map<int, std::size_t> index_;
  std::map<int, std::vector<int>> succs_;
  std::vector<int> topo_;
};

namespace detail {

using Json = nlohmann::json;

inline std::int64_t positive_int(const Json& obj, const std::string& key, const std::string& where,
                                 std::int64_t fallback, bool required) {
  auto it = obj.find(key);
  if (it == obj.end()) {
    if (required) throw ParseError(where + "." + key + ": required field missing");
    return fallback;
  }
  if (!it->is_number_integer() || it->get<std::int64_t>() < 1)
    throw ParseError(where + "." + key + ": expected positive integer");
  return it->get<std::int64_t>();
}

// `stride` / `pad` may be a scalar or an [h, w] pair.
inline std::pair<int, int> int_pair(const Json& obj, const std::string& key,
                                    const std::string& where, int fallback, int min_value) {
  auto it = obj.find(key);
  if (it == obj.end()) return {fallback, fallback};
  auto check = [&](const Json& v) {
    if (!v.is_number_integer() || v.get<int>() < min_value)
      throw ParseError(where + "." + key + ": expected integer >= " + std::to_string(min_value));
    return v.get<int>();
  };
  if (it->is_array()) {
    if (it->size() != 2) throw ParseError(where + "." + key + ": expected [h, w]");
    return {check((*it)[0]), check((*it)[1])};
  }
  int v = check(*it);
  return {v, v};
}

}  // namespace detail

// Parses the JSON workload document
//   {name, gamma, batch, layers:[{id, kind, K, C, P, Q, HK, WK, stride, pad, preds}]}.
// Loop lengths are per sample; `batch` is applied to every layer.
inline DnnGraph parse_dnn(const std::string& text) {
  using detail::Json;
  Json doc;
  try {
    doc = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw ParseError(std::string("workload: malformed JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ParseError("workload: top level must be an object");
  static const std::set<std::string> top_keys{"name", "gamma", "batch", "layers"};
  for (const auto& [k, v] : doc.items())
    if (!top_keys.count(k)) throw ParseError("workload." + k + ": unknown field");

  std::string name = doc.value("name", std::string("dnn"));
  if (doc.contains("name") && !doc["name"].is_string()) throw ParseError("workload.name: expected string");
  double gamma = 1.0;
  if (doc.contains("gamma")) {
    if (!doc["gamma"].is_number() || doc["gamma"].get<double>() <= 0.0)
      throw ParseError("workload.gamma: expected positive number");
    gamma = doc["gamma"].get<double>();
  }
  std::int64_t batch = detail::positive_int(doc, "batch", "workload", 1, false);
  if (!doc.contains("layers") || !doc["layers"].is_array() || doc["layers"].empty())
    throw ParseError("workload.layers: expected non-empty array");

  static const std::set<std::string> layer_keys{"id", "name", "kind", "K", "C", "P", "Q", "HK",
                                                "WK", "stride", "pad", "preds", "data_width_bits",
                                                "psum_width_bits"};
  std::vector<Layer> layers;
  std::map<int, std::size_t> by_id;
  const auto& arr = doc["layers"];
  for (std::size_t i = 0; i < arr.size(); ++i) {
    const Json& js = arr[i];
    std::string where = "layers[" + std::to_string(i) + "]";
    if (!js.is_object()) throw ParseError(where + ": expected object");
    for (const auto& [k, v] : js.items())
      if (!layer_keys.count(k)) throw ParseError(where + "." + k + ": unknown field");
    Layer l;
    if (!js.contains("id") || !js["id"].is_number_integer())
      throw ParseError(where + ".id: expected integer");
    l.id = js["id"].get<int>();
    l.name = js.value("name", "L" + std::to_string(l.id));
    std::string kind = js.value("kind", std::string("conv"));
    if (kind == "conv") l.kind = LayerKind::conv;
    else if (kind == "matmul" || kind == "fc") l.kind = LayerKind::matmul;
    else if (kind == "aux" || kind == "pool" || kind == "add" || kind == "concat") l.kind = LayerKind::aux;
    else throw ParseError(where + ".kind: unknown kind '" + kind + "'");
    l.batch = batch;
    if (js.contains("preds")) {
      if (!js["preds"].is_array()) throw ParseError(where + ".preds: expected array");
      for (const auto& p : js["preds"]) {
        if (!p.is_number_integer()) throw ParseError(where + ".preds: expected integer ids");
        l.preds.push_back(p.get<int>());
      }
    }
    l.data_bits = static_cast<int>(detail::positive_int(js, "data_width_bits", where, 16, false));
    l.psum_bits = static_cast<int>(detail::positive_int(js, "psum_width_bits", where, 32, false));
    if (l.data_bits % 8 != 0) throw ParseError(where + ".data_width_bits: must be a multiple of 8");

    if (l.kind == LayerKind::aux) {
      // Output shape may be inherited from the first predecessor.
      const Layer* src = nullptr;
      if (!l.preds.empty()) {
        auto it = by_id.find(l.preds.front());
        if (it != by_id.end()) src = &layers[it->second];
      }
      l.out_channels = detail::positive_int(js, "K", where, src ? src->out_channels : 1, src == nullptr);
      l.out_h = detail::positive_int(js, "P", where, src ? src->out_h : 1, src == nullptr);
      l.out_w = detail::positive_int(js, "Q", where, src ? src->out_w : 1, src == nullptr);
      l.in_channels = detail::positive_int(js, "C", where, l.out_channels, false);
      l.kernel_h = detail::positive_int(js, "HK", where, 1, false);
      l.kernel_w = detail::positive_int(js, "WK", where, 1, false);
    } else {
      l.out_channels = detail::positive_int(js, "K", where, 1, true);
      l.in_channels = detail::positive_int(js, "C", where, 1, true);
      bool mm = l.kind == LayerKind::matmul;
      l.out_h = detail::positive_int(js, "P", where, 1, !mm);
      l.out_w = detail::positive_int(js, "Q", where, 1, !mm);
      l.kernel_h = detail::positive_int(js, "HK", where, 1, false);
      l.kernel_w = detail::positive_int(js, "WK", where, 1, false);
      if (mm) {
        for (auto [key, v] : {std::pair<const char*, std::int64_t>{"P", l.out_h}, {"Q", l.out_w},
                              {"HK", l.kernel_h}, {"WK", l.kernel_w}}) {
          if (v != 1) throw ParseError(where + "." + key + ": must be 1 for a matmul layer");
        }
      }
    }
    auto [sh, sw] = detail::int_pair(js, "stride", where, 1, 1);
    auto [ph, pw] = detail::int_pair(js, "pad", where, 0, 0);
    l.stride_h = sh;
    l.stride_w = sw;
    l.pad_h = ph;
    l.pad_w = pw;
    if (l.in_h() < 1) throw ParseError(where + ".pad: derived ifmap height < 1");
    if (l.in_w() < 1) throw ParseError(where + ".pad: derived ifmap width < 1");
    by_id[l.id] = layers.size();
    layers.push_back(std::move(l));
  }
  return DnnGraph(std::move(name), gamma, batch, std::move(layers));
}

inline DnnGraph load_dnn(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open workload file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_dnn(ss.str());
}

namespace detail {

// Transitive closure over the aux-contracted DAG of compute layers.
class Reachability {
 public:
  explicit Reachability(const DnnGraph& g) {
    ids_ = g.compute_layer_ids();  // topological
    for (std::size_t i = 0; i < ids_.size(); ++i) pos_[ids_[i]] = i;
    const std::size_t n = ids_.size();
    anc_.assign(n, std::vector<bool>(n, false));
    preds_.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      for (int p : g.compute_preds(ids_[i])) {
        std::size_t j = pos_.at(p);
        preds_[i].push_back(j);
        anc_[i][j] = true;
        for (std::size_t k = 0; k < n; ++k)
          if (anc_[j][k]) anc_[i][k] = true;
      }
    }
  }

  bool ancestor(int a, int b) const { return anc_[pos_.at(b)][pos_.at(a)]; }
  bool comparable(int a, int b) const { return ancestor(a, b) || ancestor(b, a); }
  bool edge(int a, int b) const {
    const auto& p = preds_[pos_.at(b)];
    return std::find(p.begin(), p.end(), pos_.at(a)) != p.end();
  }
  std::size_t position(int id) const { return pos_.at(id); }
  const std::vector<int>& ids() const { return ids_; }

 private:
  std::vector<int> ids_;
  std::unordered_map<int, std::size_t> pos_;
  std::vector<std::vector<bool>> anc_;
  std::vector<std::vector<std::size_t>> preds_;
};

using Stage = std::vector<std::vector<int>>;  // branches of one segment

inline bool is_chain(const std::vector<int>& topo_ids, const Reachability& r) {
  for (std::size_t i = 1; i < topo_ids.size(); ++i)
    if (!r.edge(topo_ids[i - 1], topo_ids[i])) return false;
  return true;
}

inline std::vector<std::vector<int>> weak_components(const std::vector<int>& ids,
                                                     const Reachability& r) {
  std::vector<int> parent(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) parent[i] = static_cast<int>(i);
  std::function<int(int)> find = [&](int x) { return parent[x] == x ? x : parent[x] = find(parent[x]); };
  for (std::size_t i = 0; i < ids.size(); ++i)
    for (std::size_t j = i + 1; j < ids.size(); ++j)
      if (r.edge(ids[i], ids[j]) || r.edge(ids[j], ids[i])) parent[find(static_cast<int>(i))] = find(static_cast<int>(j));
  std::map<int, std::vector<int>> groups;
  for (std::size_t i = 0; i < ids.size(); ++i) groups[find(static_cast<int>(i))].push_back(ids[i]);
  std::vector<std::vector<int>> out;
  for (auto& [root, members] : groups) out.push_back(std::move(members));  // each stays topological
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    return *std::min_element(a.begin(), a.end()) < *std::min_element(b.begin(), b.end());
  });
  return out;
}

inline void segment_set(const std::vector<int>& ids, const Reachability& r, std::vector<Stage>& out) {
  if (ids.empty()) return;
  std::vector<bool> serial(ids.size(), true);
  for (std::size_t i = 0; i < ids.size(); ++i)
    for (std::size_t j = 0; j < ids.size() && serial[i]; ++j)
      if (i != j && !r.comparable(ids[i], ids[j])) serial[i] = false;

  std::vector<int> group;
  auto flush = [&](bool whole_set) {
    if (group.empty()) return;
    auto comps = weak_components(group, r);
    bool all_chains = std::all_of(comps.begin(), comps.end(),
                                  [&](const auto& c) { return is_chain(c, r); });
    if (all_chains) {
      out.push_back(comps);
    } else if (comps.size() == 1 && whole_set) {
      // Nested structure without a serial cut: fall back to one layer per segment.
      for (int id : group) out.push_back({{id}});
    } else {
      for (const auto& c : comps) {
        if (is_chain(c, r)) out.push_back({c});
        else segment_set(c, r, out);
      }
    }
    group.clear();
  };
  bool any_serial = std::find(serial.begin(), serial.end(), true) != serial.end();
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (serial[i]) {
      flush(false);
      out.push_back({{ids[i]}});
    } else {
      group.push_back(ids[i]);
    }
  }
  flush(!any_serial);
}

}  // namespace detail

// Slices the compute layers into serial segments. Within a segment the
// branches are mutually independent chains; branches are ordered by their
// smallest layer id. Aux layers are not placed in branches (see
// DnnGraph::aux_host). Nested branch structure falls back to serial segments.
inline std::vector<Segment> segment_dnn(const DnnGraph& graph) {
  detail::Reachability reach(graph);
  std::vector<detail::Stage> stages;
  detail::segment_set(reach.ids(), reach, stages);
  std::vector<Segment> segments;
  for (std::size_t s = 0; s < stages.size(); ++s) {
    Segment seg;
    seg.index = static_cast<int>(s);
    for (std::size_t b = 0; b < stages[s].size(); ++b)
      seg.branches.push_back(Branch{static_cast<int>(b), stages[s][b]});
    segments.push_back(std::move(seg));
  }
  return segments;
}

}  // namespace pimdse
