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

// Sharing-sets and their all-gather schedules. Each set's members pass
// chunks around a Hamilton cycle for N-1 rounds, so every cycle edge carries
// (N-1) * chunk_bits. The exact solver minimises the heaviest directed link
// over all sets jointly.

#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <string>
#include <tuple>
#include <vector>

#include "pimdse/error.hpp"
#include "pimdse/noc.hpp"
#include "pimdse/partition.hpp"

namespace pimdse {

enum class Payload { input, weight, psum };

inline const char* to_string(Payload p) {
  switch (p) {
    case Payload::input: return "input";
    case Payload::weight: return "weight";
    case Payload::psum: return "psum";
  }
  return "?";
}

struct SharingSet {
  std::vector<Coord> members;
  std::int64_t chunk_bits = 0;
  Payload payload = Payload::input;

  int size() const { return static_cast<int>(members.size()); }
  std::int64_t edge_bits() const { return (size() - 1) * chunk_bits; }
};

// Per set, the visiting order of member indices; order[0] == 0.
struct HamiltonSchedule {
  std::vector<std::vector<int>> cycles;
  LinkLoadMap loads;
  std::int64_t objective_bits = 0;
  bool proven_optimal = false;

  // successor[i] of member i in set s.
  std::vector<int> successors(std::size_t s) const {
    const auto& c = cycles[s];
    std::vector<int> succ(c.size());
    for (std::size_t i = 0; i < c.size(); ++i) succ[static_cast<std::size_t>(c[i])] = c[(i + 1) % c.size()];
    return succ;
  }
};

struct ShpResult {
  LinkLoadMap loads;
  std::int64_t objective_bits = 0;
};

// Weight-holder groups inside one class of nodes that need the same part of
// the weights. With WR copies allowed, each group of ceil(n / WR) nodes holds
// one copy, split evenly; groups are consecutive runs in placement order and
// the first n % groups of them get one extra member.
inline std::vector<std::vector<int>> weight_groups(int n, int wr) {
  std::vector<std::vector<int>> out;
  if (n <= 0) return out;
  int eff = std::clamp(wr, 1, n);
  int g = (n + eff - 1) / eff;
  int groups = (n + g - 1) / g;
  int base = n / groups, extra = n % groups, at = 0;
  for (int i = 0; i < groups; ++i) {
    int sz = base + (i < extra ? 1 : 0);
    std::vector<int> grp(static_cast<std::size_t>(sz));
    std::iota(grp.begin(), grp.end(), at);
    at += sz;
    out.push_back(std::move(grp));
  }
  return out;
}

// Bytes of weights one node stores for a layer: its share of the part-layer
// weights within its holder group. The smallest group fixes the maximum.
inline std::int64_t stored_weight_bytes(std::int64_t part_weight_bytes, int group_size) {
  return ceil_div(part_weight_bytes, group_size);
}

inline std::int64_t max_stored_weight_bytes(const LoopBounds& full, const LayerMapping& lm, int wr) {
  LoopBounds part = part_bounds(full, lm);
  int n_cls = lm.parts(Loop::B) * lm.parts(Loop::P) * lm.parts(Loop::Q);
  int smallest = n_cls;
  for (const auto& g : weight_groups(n_cls, wr)) smallest = std::min(smallest, static_cast<int>(g.size()));
  return stored_weight_bytes(part.weight_bytes(), smallest);
}

namespace detail {

inline std::array<int, 5> key_without(const std::array<int, 5>& idx, Loop drop) {
  auto k = idx;
  k[static_cast<int>(drop)] = -1;
  return k;
}

}  // namespace detail

// Input sets: nodes differing only in the K index read the same ifmap part.
// Weight sets: within a class of equal (K, C) indices, holder groups when
// WR is below the class size. Psum sets: nodes differing only in C reduce
// their partial sums.
inline std::vector<SharingSet> build_sharing_sets(const LoopBounds& full, const LayerMapping& lm, int wr,
                                                  const Region& region) {
  auto nodes = place(lm, region);
  LoopBounds part = part_bounds(full, lm);
  std::vector<SharingSet> sets;

  auto group_by = [&](auto key_fn) {
    std::map<std::array<int, 5>, std::vector<Coord>> classes;
    for (const auto& n : nodes) classes[key_fn(n.index)].push_back(n.node);
    return classes;
  };

  const int pk = lm.parts(Loop::K);
  if (pk > 1) {
    std::int64_t bits = part.ifmap_count() * part.data_bits;
    for (auto& [key, members] : group_by([](const auto& i) { return detail::key_without(i, Loop::K); }))
      sets.push_back({members, ceil_div(bits, pk), Payload::input});
  }

  const int n_cls = lm.parts(Loop::B) * lm.parts(Loop::P) * lm.parts(Loop::Q);
  if (wr < n_cls) {
    std::int64_t bits = part.weight_count() * part.data_bits;
    auto classes = group_by([](const auto& i) {
      std::array<int, 5> k{-1, -1, -1, i[static_cast<int>(Loop::K)], i[static_cast<int>(Loop::C)]};
      return k;
    });
    for (auto& [key, members] : classes) {
      for (const auto& grp : weight_groups(static_cast<int>(members.size()), wr)) {
        if (grp.size() < 2) continue;
        SharingSet s;
        for (int m : grp) s.members.push_back(members[static_cast<std::size_t>(m)]);
        s.chunk_bits = ceil_div(bits, static_cast<std::int64_t>(grp.size()));
        s.payload = Payload::weight;
        sets.push_back(std::move(s));
      }
    }
  }

  const int pc = lm.parts(Loop::C);
  if (pc > 1) {
    std::int64_t bits = part.ofmap_count() * part.psum_bits;
    for (auto& [key, members] : group_by([](const auto& i) { return detail::key_without(i, Loop::C); }))
      sets.push_back({members, ceil_div(bits, pc), Payload::psum});
  }
  return sets;
}

inline void check_sets(const std::vector<SharingSet>& sets, const Mesh& mesh) {
  for (const auto& s : sets) {
    if (s.size() < 2) throw ConfigError("sharing-set needs at least two members");
    for (const auto& m : s.members)
      if (!mesh.contains(m))
        throw ConfigError("sharing-set member (" + std::to_string(m.row) + "," + std::to_string(m.col) +
                          ") outside mesh");
  }
}

inline LinkLoadMap cycle_loads(const std::vector<SharingSet>& sets, const std::vector<std::vector<int>>& cycles,
                               const Mesh& mesh) {
  LinkLoadMap loads(mesh.link_slots());
  for (std::size_t s = 0; s < sets.size(); ++s) {
    const auto& c = cycles[s];
    for (std::size_t i = 0; i < c.size(); ++i) {
      const Coord& a = sets[s].members[static_cast<std::size_t>(c[i])];
      const Coord& b = sets[s].members[static_cast<std::size_t>(c[(i + 1) % c.size()])];
      loads.add_transfer(mesh, a, b, sets[s].edge_bits());
    }
  }
  return loads;
}

inline HamiltonSchedule make_schedule(const std::vector<SharingSet>& sets, std::vector<std::vector<int>> cycles,
                                      const Mesh& mesh, bool optimal = false) {
  HamiltonSchedule h;
  h.loads = cycle_loads(sets, cycles, mesh);
  h.objective_bits = h.loads.max_load();
  h.cycles = std::move(cycles);
  h.proven_optimal = optimal;
  return h;
}

// Rotates a cycle so member 0 comes first.
inline std::vector<int> canonical_cycle(std::vector<int> c) {
  auto it = std::find(c.begin(), c.end(), 0);
  std::rotate(c.begin(), it, c.end());
  return c;
}

// Boustrophedon order: rows top to bottom, alternating column direction.
inline std::vector<int> snake_cycle(const SharingSet& s) {
  std::vector<int> order(static_cast<std::size_t>(s.size()));
  std::iota(order.begin(), order.end(), 0);
  std::vector<int> rows;
  for (const auto& m : s.members) rows.push_back(m.row);
  std::sort(rows.begin(), rows.end());
  rows.erase(std::unique(rows.begin(), rows.end()), rows.end());
  auto rank = [&](int r) { return std::lower_bound(rows.begin(), rows.end(), r) - rows.begin(); };
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    const Coord& ca = s.members[static_cast<std::size_t>(a)];
    const Coord& cb = s.members[static_cast<std::size_t>(b)];
    if (ca.row != cb.row) return ca.row < cb.row;
    bool rev = rank(ca.row) % 2 == 1;
    return rev ? ca.col > cb.col : ca.col < cb.col;
  });
  return canonical_cycle(order);
}

inline HamiltonSchedule schedule_snake(const std::vector<SharingSet>& sets, const Mesh& mesh) {
  check_sets(sets, mesh);
  std::vector<std::vector<int>> cycles;
  for (const auto& s : sets) cycles.push_back(snake_cycle(s));
  return make_schedule(sets, std::move(cycles), mesh);
}

// ---- TSP baseline -------------------------------------------------------

namespace detail {

inline std::int64_t tour_length(const SharingSet& s, const std::vector<int>& c) {
  std::int64_t len = 0;
  for (std::size_t i = 0; i < c.size(); ++i)
    len += manhattan(s.members[static_cast<std::size_t>(c[i])], s.members[static_cast<std::size_t>(c[(i + 1) % c.size()])]);
  return len;
}

inline std::vector<int> held_karp(const SharingSet& s) {
  const int n = s.size();
  if (n <= 3) {
    std::vector<int> c(static_cast<std::size_t>(n));
    std::iota(c.begin(), c.end(), 0);
    return c;
  }
  const int full = 1 << (n - 1);  // subsets of members 1..n-1
  const std::int64_t inf = std::numeric_limits<std::int64_t>::max() / 4;
  std::vector<std::int64_t> dp(static_cast<std::size_t>(full) * n, inf);
  std::vector<int> parent(static_cast<std::size_t>(full) * n, -1);
  auto d = [&](int a, int b) { return manhattan(s.members[static_cast<std::size_t>(a)], s.members[static_cast<std::size_t>(b)]); };
  auto at = [&](int mask, int j) { return static_cast<std::size_t>(mask) * n + j; };
  for (int j = 1; j < n; ++j) dp[at(1 << (j - 1), j)] = d(0, j);
  for (int mask = 1; mask < full; ++mask) {
    for (int j = 1; j < n; ++j) {
      if (!(mask & (1 << (j - 1)))) continue;
      std::int64_t cur = dp[at(mask, j)];
      if (cur >= inf) continue;
      for (int k = 1; k < n; ++k) {
        if (mask & (1 << (k - 1))) continue;
        int nm = mask | (1 << (k - 1));
        std::int64_t v = cur + d(j, k);
        if (v < dp[at(nm, k)]) {
          dp[at(nm, k)] = v;
          parent[at(nm, k)] = j;
        }
      }
    }
  }
  std::int64_t best = inf;
  int last = -1;
  for (int j = 1; j < n; ++j) {
    std::int64_t v = dp[at(full - 1, j)] + d(j, 0);
    if (v < best) {
      best = v;
      last = j;
    }
  }
  std::vector<int> rev;
  int mask = full - 1;
  while (last > 0) {
    rev.push_back(last);
    int p = parent[at(mask, last)];
    mask &= ~(1 << (last - 1));
    last = p;
  }
  std::vector<int> c{0};
  c.insert(c.end(), rev.rbegin(), rev.rend());
  return c;
}

inline std::vector<int> nn_two_opt(const SharingSet& s) {
  const int n = s.size();
  std::vector<int> c{0};
  std::vector<bool> used(static_cast<std::size_t>(n), false);
  used[0] = true;
  for (int step = 1; step < n; ++step) {
    int cur = c.back(), best = -1, bd = std::numeric_limits<int>::max();
    for (int j = 0; j < n; ++j) {
      if (used[static_cast<std::size_t>(j)]) continue;
      int dj = manhattan(s.members[static_cast<std::size_t>(cur)], s.members[static_cast<std::size_t>(j)]);
      if (dj < bd) {
        bd = dj;
        best = j;
      }
    }
    used[static_cast<std::size_t>(best)] = true;
    c.push_back(best);
  }
  auto d = [&](int a, int b) { return manhattan(s.members[static_cast<std::size_t>(a)], s.members[static_cast<std::size_t>(b)]); };
  bool improved = true;
  while (improved) {
    improved = false;
    for (int i = 1; i < n - 1; ++i) {
      for (int j = i + 1; j < n; ++j) {
        int a = c[static_cast<std::size_t>(i - 1)], b = c[static_cast<std::size_t>(i)];
        int e = c[static_cast<std::size_t>(j)], f = c[static_cast<std::size_t>((j + 1) % n)];
        if (d(a, e) + d(b, f) < d(a, b) + d(e, f)) {
          std::reverse(c.begin() + i, c.begin() + j + 1);
          improved = true;
        }
      }
    }
  }
  return c;
}

}  // namespace detail

// Each set independently takes a minimum-hop cycle.
inline HamiltonSchedule schedule_tsp(const std::vector<SharingSet>& sets, const Mesh& mesh, int exact_limit = 10) {
  check_sets(sets, mesh);
  std::vector<std::vector<int>> cycles;
  for (const auto& s : sets)
    cycles.push_back(canonical_cycle(s.size() <= exact_limit ? detail::held_karp(s) : detail::nn_two_opt(s)));
  return make_schedule(sets, std::move(cycles), mesh);
}

// ---- SHP baseline -------------------------------------------------------

// Every member unicasts its chunk to every other member over XY routes.
inline ShpResult schedule_shp(const std::vector<SharingSet>& sets, const Mesh& mesh) {
  check_sets(sets, mesh);
  ShpResult r{LinkLoadMap(mesh.link_slots()), 0};
  for (const auto& s : sets)
    for (const auto& a : s.members)
      for (const auto& b : s.members)
        if (!(a == b)) r.loads.add_transfer(mesh, a, b, s.chunk_bits);
  r.objective_bits = r.loads.max_load();
  return r;
}

// ---- exact / local-search solver ----------------------------------------

struct IlpOptions {
  int exact_limit = 10;
  double joint_product_limit = 1e6;
  std::int64_t eval_budget = 2'000'000;  // move evaluations for local search
  int max_rounds = 8;
};

namespace detail {

// Routes between every ordered member pair, cached per set.
struct SetRoutes {
  int n = 0;
  std::vector<std::vector<int>> path;  // [a * n + b]
  std::int64_t bits = 0;               // per cycle edge

  SetRoutes(const SharingSet& s, const Mesh& mesh) : n(s.size()), bits(s.edge_bits()) {
    path.resize(static_cast<std::size_t>(n) * n);
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b)
        if (a != b) path[static_cast<std::size_t>(a) * n + b] = mesh.route(s.members[static_cast<std::size_t>(a)], s.members[static_cast<std::size_t>(b)]);
  }
  const std::vector<int>& at(int a, int b) const { return path[static_cast<std::size_t>(a) * n + b]; }
};

inline double factorial(int n) {
  double f = 1;
  for (int i = 2; i <= n; ++i) f *= i;
  return f;
}

// Depth-first branch and bound over directed cycles of several sets. Each
// cycle is grown from member 0, so every partial path is a simple path and
// no subtour can close early. The running max link load only grows, which
// gives the pruning bound.
class JointBnB {
 public:
  JointBnB(const std::vector<SetRoutes>& routes, std::vector<std::int64_t> background, std::int64_t incumbent)
      : routes_(routes), load_(std::move(background)), best_(incumbent) {}

  // Returns true if a cycle set strictly better than the incumbent exists.
  bool solve(const std::vector<std::size_t>& which) {
    which_ = which;
    cur_.assign(which.size(), {});
    found_ = false;
    std::int64_t mx = 0;
    for (auto v : load_) mx = std::max(mx, v);
    if (mx >= best_) return false;
    start_set(0, mx);
    return found_;
  }

  std::int64_t best() const { return best_; }
  const std::vector<std::vector<int>>& best_cycles() const { return best_cycles_; }

 private:
  void start_set(std::size_t k, std::int64_t mx) {
    if (k == which_.size()) {
      best_ = mx;
      best_cycles_ = cur_;
      found_ = true;
      return;
    }
    const auto& r = routes_[which_[k]];
    cur_[k].assign(1, 0);
    used_.assign(static_cast<std::size_t>(r.n), false);
    used_[0] = true;
    extend(k, mx);
  }

  // Adds a path; returns the new running max.
  std::int64_t push(const std::vector<int>& p, std::int64_t bits, std::int64_t mx) {
    for (int l : p) {
      auto& v = load_[static_cast<std::size_t>(l)];
      v += bits;
      mx = std::max(mx, v);
    }
    return mx;
  }
  void pop(const std::vector<int>& p, std::int64_t bits) {
    for (int l : p) load_[static_cast<std::size_t>(l)] -= bits;
  }

  void extend(std::size_t k, std::int64_t mx) {
    const auto& r = routes_[which_[k]];
    auto& path = cur_[k];
    int last = path.back();
    if (static_cast<int>(path.size()) == r.n) {
      const auto& close = r.at(last, 0);
      std::int64_t m2 = push(close, r.bits, mx);
      if (m2 < best_) {
        auto saved_used = used_;
        start_set(k + 1, m2);
        used_ = saved_used;
      }
      pop(close, r.bits);
      return;
    }
    for (int nx = 1; nx < r.n; ++nx) {
      if (used_[static_cast<std::size_t>(nx)]) continue;
      const auto& p = r.at(last, nx);
      std::int64_t m2 = push(p, r.bits, mx);
      if (m2 < best_) {
        used_[static_cast<std::size_t>(nx)] = true;
        path.push_back(nx);
        extend(k, m2);
        path.pop_back();
        used_[static_cast<std::size_t>(nx)] = false;
      }
      pop(p, r.bits);
    }
  }

  const std::vector<SetRoutes>& routes_;
  std::vector<std::int64_t> load_;
  std::int64_t best_;
  std::vector<std::size_t> which_;
  std::vector<std::vector<int>> cur_;
  std::vector<std::vector<int>> best_cycles_;
  std::vector<bool> used_;
  bool found_ = false;
};

// Lexicographic score (max load, sum of squared loads) used by local search
// to move across plateaus of the max.
struct Score {
  std::int64_t max = 0;
  double sq = 0;
  bool operator<(const Score& o) const { return max != o.max ? max < o.max : sq < o.sq - 1e-9 * (1 + o.sq); }
};

inline Score score_of(const std::vector<std::int64_t>& loads) {
  Score s;
  for (auto v : loads) {
    s.max = std::max(s.max, v);
    s.sq += static_cast<double>(v) * static_cast<double>(v);
  }
  return s;
}

inline void apply_cycle(const SetRoutes& r, const std::vector<int>& c, std::vector<std::int64_t>& load, int sign) {
  for (std::size_t i = 0; i < c.size(); ++i)
    for (int l : r.at(c[i], c[(i + 1) % c.size()])) load[static_cast<std::size_t>(l)] += sign * r.bits;
}

// 2-opt, swap and relocate moves on one cycle against fixed background
// loads; first-improvement until a local optimum or the budget runs out.
inline void local_search(const SetRoutes& r, std::vector<int>& cycle, std::vector<std::int64_t>& load,
                         std::int64_t& budget) {
  const int n = r.n;
  if (n <= 3) {
    if (n == 3) {
      std::vector<int> alt{0, cycle[2], cycle[1]};
      apply_cycle(r, cycle, load, -1);
      auto base_load = load;
      apply_cycle(r, cycle, load, +1);
      Score cur = score_of(load);
      apply_cycle(r, alt, base_load, +1);
      if (score_of(base_load) < cur) {
        load = base_load;
        cycle = alt;
      }
    }
    return;
  }
  apply_cycle(r, cycle, load, -1);
  std::vector<std::int64_t> trial;
  auto eval = [&](const std::vector<int>& c) {
    trial = load;
    apply_cycle(r, c, trial, +1);
    --budget;
    return score_of(trial);
  };
  Score cur = eval(cycle);
  bool improved = true;
  while (improved && budget > 0) {
    improved = false;
    for (int i = 1; i < n && !improved && budget > 0; ++i) {
      for (int j = i + 1; j < n && !improved && budget > 0; ++j) {
        for (int move = 0; move < 3 && !improved; ++move) {
          std::vector<int> c = cycle;
          if (move == 0) {
            std::reverse(c.begin() + i, c.begin() + j + 1);
          } else if (move == 1) {
            std::swap(c[static_cast<std::size_t>(i)], c[static_cast<std::size_t>(j)]);
          } else {
            int v = c[static_cast<std::size_t>(i)];
            c.erase(c.begin() + i);
            c.insert(c.begin() + j, v);
          }
          Score s = eval(c);
          if (s < cur) {
            cur = s;
            cycle = std::move(c);
            improved = true;
          }
        }
      }
    }
  }
  apply_cycle(r, cycle, load, +1);
}

}  // namespace detail

// Minimises the maximum directed link load over all sets jointly. Exact when
// every set has at most `exact_limit` members: joint branch and bound when
// the product of cycle counts is small, otherwise exact per-set steps inside
// coordinate descent. Larger sets use local search. The starting point is
// the better of the snake and TSP cycles.
inline HamiltonSchedule schedule_ilp(const std::vector<SharingSet>& sets, const Mesh& mesh,
                                     const IlpOptions& opt = {}) {
  check_sets(sets, mesh);
  if (sets.empty()) return make_schedule(sets, {}, mesh, true);

  auto snake = schedule_snake(sets, mesh);
  auto tsp = schedule_tsp(sets, mesh, opt.exact_limit);
  std::vector<std::vector<int>> cycles = tsp.objective_bits < snake.objective_bits ? tsp.cycles : snake.cycles;

  std::vector<detail::SetRoutes> routes;
  routes.reserve(sets.size());
  for (const auto& s : sets) routes.emplace_back(s, mesh);

  bool all_small = true;
  double product = 1;
  for (const auto& s : sets) {
    all_small = all_small && s.size() <= opt.exact_limit;
    product *= detail::factorial(s.size() - 1);
  }

  auto current = make_schedule(sets, cycles, mesh);
  if (all_small && product <= opt.joint_product_limit) {
    std::vector<std::size_t> all(sets.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    detail::JointBnB bnb(routes, std::vector<std::int64_t>(static_cast<std::size_t>(mesh.link_slots()), 0),
                         current.objective_bits);
    if (bnb.solve(all)) cycles = bnb.best_cycles();
    return make_schedule(sets, std::move(cycles), mesh, true);
  }

  // Coordinate descent across sets.
  std::vector<std::int64_t> load = current.loads.values();
  std::int64_t budget = opt.eval_budget;
  for (int round = 0; round < opt.max_rounds && budget > 0; ++round) {
    detail::Score before = detail::score_of(load);
    for (std::size_t s = 0; s < sets.size() && budget > 0; ++s) {
      const auto& r = routes[s];
      if (r.n <= opt.exact_limit && detail::factorial(r.n - 1) <= opt.joint_product_limit) {
        detail::apply_cycle(r, cycles[s], load, -1);
        auto with = load;
        detail::apply_cycle(r, cycles[s], with, +1);
        std::int64_t incumbent = detail::score_of(with).max;
        detail::JointBnB bnb(routes, load, incumbent);
        if (bnb.solve({s})) cycles[s] = bnb.best_cycles()[0];
        detail::apply_cycle(r, cycles[s], load, +1);
        budget -= static_cast<std::int64_t>(detail::factorial(r.n - 1) / 8) + 1;
      } else {
        detail::local_search(r, cycles[s], load, budget);
      }
    }
    if (!(detail::score_of(load) < before)) break;
  }
  for (auto& c : cycles) c = canonical_cycle(c);
  auto result = make_schedule(sets, std::move(cycles), mesh);
  // Descent never worsens the start, but keep the guarantee explicit.
  if (result.objective_bits > current.objective_bits) return current;
  return result;
}

// Fast single-pass estimate used while scoring candidates.
inline std::int64_t estimate_max_load(const std::vector<SharingSet>& sets, const Mesh& mesh) {
  if (sets.empty()) return 0;
  return schedule_snake(sets, mesh).objective_bits;
}

inline TransferCost evaluate_schedule(const HamiltonSchedule& h, const Mesh& mesh, double pj_per_bit_hop) {
  return transfer_metrics(h.loads, mesh.flit_bits(), pj_per_bit_hop);
}

inline TransferCost evaluate_schedule(const ShpResult& r, const Mesh& mesh, double pj_per_bit_hop) {
  return transfer_metrics(r.loads, mesh.flit_bits(), pj_per_bit_hop);
}

// Builds MTZ potentials U from a successor map (U[0] = 0, then position
// along the cycle) and checks degree and ordering constraints. False when
// the map is not one Hamilton cycle.
inline bool mtz_certificate(const std::vector<int>& succ, std::vector<int>* potentials = nullptr) {
  const int n = static_cast<int>(succ.size());
  if (n < 2) return false;
  std::vector<int> indeg(static_cast<std::size_t>(n), 0);
  for (int v : succ) {
    if (v < 0 || v >= n) return false;
    ++indeg[static_cast<std::size_t>(v)];
  }
  for (int d : indeg)
    if (d != 1) return false;
  std::vector<int> u(static_cast<std::size_t>(n), -1);
  int cur = 0;
  for (int k = 0; k < n; ++k) {
    if (u[static_cast<std::size_t>(cur)] >= 0) return false;
    u[static_cast<std::size_t>(cur)] = k;
    cur = succ[static_cast<std::size_t>(cur)];
  }
  if (cur != 0) return false;
  for (int a = 0; a < n; ++a) {
    int b = succ[static_cast<std::size_t>(a)];
    if (b == 0 || a == b) continue;
    if (u[static_cast<std::size_t>(b)] < u[static_cast<std::size_t>(a)] + 1) return false;
  }
  if (potentials) *potentials = u;
  return true;
}

}  // namespace pimdse
