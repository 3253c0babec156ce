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

#include "oracles/finite_diff.hpp"
#include "pimdse/tuner.hpp"
#include "support/landscape.hpp"

namespace pimdse {
namespace {

std::vector<ParamVector> random_points(std::mt19937_64& rng, std::size_t n) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<ParamVector> xs(n);
  for (auto& x : xs)
    for (auto& v : x) v = u(rng);
  return xs;
}

TEST(Encoding, RoundTripOnLattice) {
  HwConstraints c;
  Lattice lat = Lattice::of(c);
  EXPECT_EQ(lat.node_rows, (std::vector<int>{2, 4, 8, 16}));
  EXPECT_EQ(lat.buffers.front(), 1);
  EXPECT_EQ(lat.buffers.back(), 2048);
  for (int r : lat.node_rows)
    for (int pe = 1; pe <= 256; ++pe)
      for (int b : lat.buffers) {
        HwParams p{r, lat.node_cols.back(), pe, 257 - pe, b, b, lat.buffers.front()};
        ASSERT_EQ(decode(encode(p, lat), lat), p) << to_string(p);
      }
}

TEST(Encoding, OffLatticeIsRejected) {
  HwConstraints c;
  Lattice lat = Lattice::of(c);
  HwParams p;
  p.node_rows = 3;
  EXPECT_THROW(encode(p, lat), ConfigError);
  p = HwParams{};
  p.ibuf_kib = 100;
  EXPECT_THROW(encode(p, lat), ConfigError);
}

TEST(Sampling, UntrainedFilterPassesLegalSamples) {
  HwConstraints c;
  AreaFilter f;
  std::mt19937_64 rng(1);
  auto r = sample_candidates(10, f, c, rng);
  ASSERT_EQ(r.kept.size(), 10u);
  EXPECT_FALSE(r.exhausted);
  for (const auto& p : r.kept) EXPECT_TRUE(check_divisibility(p, c));
}

TEST(Filter, RejectEverythingGivesPartialList) {
  HwConstraints c;
  std::mt19937_64 rng(2);
  auto xs = random_points(rng, 50);
  std::vector<double> ys(xs.size(), 1e6);
  ys[0] = 2e6;  // keep a spread for standardisation
  AreaFilter f;
  f.train(xs, ys, {}, rng);
  auto r = sample_candidates(10, f, c, rng, 500);
  EXPECT_LT(r.kept.size(), 10u);
  EXPECT_TRUE(r.exhausted);
}

std::pair<std::vector<ParamVector>, std::vector<double>> area_dataset(std::mt19937_64& rng, std::size_t n,
                                                                      const HwConstraints& c) {
  Lattice lat = Lattice::of(c);
  std::vector<ParamVector> xs;
  std::vector<double> ys;
  for (const auto& x : random_points(rng, n)) {
    HwParams p = decode(x, lat);
    xs.push_back(encode(p, lat));
    ys.push_back(area_model(p, c));
  }
  return {xs, ys};
}

TEST(Filter, LearnsTheAreaModel) {
  HwConstraints c;
  std::mt19937_64 rng(3);
  auto [xs, ys] = area_dataset(rng, 2000, c);
  AreaFilter f;
  f.train(xs, ys, {}, rng);
  for (std::size_t i = 1; i < f.loss_curve().size(); ++i)
    EXPECT_LE(f.loss_curve()[i], f.loss_curve()[i - 1] + 1e-6);
  auto [hx, hy] = area_dataset(rng, 500, c);
  double se = 0;
  for (std::size_t i = 0; i < hx.size(); ++i) {
    double r = (f.predict_area(hx[i]) - hy[i]) / hy[i];
    se += r * r;
  }
  EXPECT_LE(std::sqrt(se / static_cast<double>(hx.size())), 0.05);

  auto kept = sample_candidates(500, f, c, rng);
  int legal = 0;
  for (const auto& p : kept.kept) legal += total_area(p, c) <= c.area_budget_mm2;
  EXPECT_GE(legal, static_cast<int>(0.9 * static_cast<double>(kept.kept.size())));
  EXPECT_LT(kept.false_negative_rate(), 0.2);
}

TEST(Filter, MemorisesOneRepeatedSample) {
  std::mt19937_64 rng(4);
  ParamVector x{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7};
  std::vector<ParamVector> xs(8, x);
  std::vector<double> ys(8, 12.5);
  AreaFilter f;
  FilterOptions o;
  o.batch = 1;
  f.train(xs, ys, o, rng);
  EXPECT_LT(f.final_loss(), 1e-8);
  EXPECT_NEAR(f.predict_area(x), 12.5, 1e-3);
}

DklSurrogate small_model(std::mt19937_64& rng, std::size_t n, bool noise_free = false) {
  SurrogateOptions o;
  o.widths = {6, 4, 3};
  o.noise_free = noise_free;
  DklSurrogate m(o, rng);
  auto xs = random_points(rng, n);
  std::vector<double> ys;
  for (const auto& x : xs) ys.push_back(std::sin(3 * x[0]) + x[1] * x[2]);
  m.set_data(xs, ys);
  return m;
}

TEST(Surrogate, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    auto m = small_model(rng, 5);
    nn::Vector t = m.theta(), g;
    m.log_marginal_likelihood(t, &g);
    auto fd = oracle::central_difference([&](const nn::Vector& v) { return m.log_marginal_likelihood(v); }, t);
    EXPECT_LE(oracle::max_relative_error(g, fd), 1e-3) << "trial " << trial;
  }
}

TEST(Surrogate, NoiseFreeMeanInterpolates) {
  std::mt19937_64 rng(6);
  auto xs = random_points(rng, 12);
  std::vector<double> ys;
  for (const auto& x : xs) ys.push_back(std::log(2.0 + x[0] + x[3] * x[3]));
  SurrogateOptions o;
  o.widths = {8, 4};
  o.noise_free = true;
  DklSurrogate m(o, rng);
  m.set_data(xs, ys);
  auto p = m.predict(to_matrix(xs));
  for (std::size_t i = 0; i < xs.size(); ++i) EXPECT_NEAR(p.mean[static_cast<Eigen::Index>(i)], ys[i], 1e-6);
}

TEST(Surrogate, TrainingNeverLowersLikelihood) {
  std::mt19937_64 rng(7);
  auto m = small_model(rng, 30);
  m.train(80);
  const auto& c = m.lml_curve();
  ASSERT_EQ(c.size(), 81u);
  for (std::size_t i = 1; i < c.size(); ++i) EXPECT_GE(c[i], c[i - 1]);
  EXPECT_GT(c.back(), c.front());
}

TEST(Surrogate, RankPutsTheBestTrainingPointFirst) {
  HwConstraints c;
  Lattice lat = Lattice::of(c);
  std::mt19937_64 rng(8);
  HwParams good{4, 4, 16, 16, 64, 64, 64}, bad{16, 16, 256, 256, 2048, 2048, 2048};
  std::vector<ParamVector> xs{encode(good, lat), encode(bad, lat)};
  std::vector<double> ys{0.0, 5.0};
  for (const auto& x : random_points(rng, 6)) {
    HwParams p = decode(x, lat);
    xs.push_back(encode(p, lat));
    ys.push_back(2.0 + x[0]);
  }
  SurrogateOptions o;
  o.widths = {8, 4};
  DklSurrogate m(o, rng);
  m.set_data(xs, ys);
  m.train(50);
  auto ranked = surrogate_rank(m, {bad, good}, lat);
  ASSERT_EQ(ranked.size(), 2u);
  EXPECT_EQ(ranked[0], good);
  EXPECT_TRUE(surrogate_rank(m, {}, lat).empty());

  // Affine changes of the targets leave the order alone.
  std::vector<double> scaled;
  for (double y : ys) scaled.push_back(3.0 * y + 7.0);
  DklSurrogate m2 = m;
  m2.set_data(xs, scaled);
  auto cands = sample_candidates(40, AreaFilter{}, c, rng).kept;
  EXPECT_EQ(surrogate_rank(m, cands, lat), surrogate_rank(m2, cands, lat));
}

TEST(TuneLoop, BudgetOneEvaluatesOnce) {
  HwConstraints c;
  testing_support::Landscape land(c);
  std::mt19937_64 rng(9);
  TuneOptions o;
  o.budget = 1;
  auto r = tune_loop(c, land, o, rng);
  ASSERT_EQ(r.history.size(), 1u);
  ASSERT_TRUE(r.best.has_value());
  EXPECT_LE(r.best->area_mm2, c.area_budget_mm2);
}

TEST(TuneLoop, HistoryCountsSuccessfulEvaluations) {
  HwConstraints c;
  testing_support::Landscape land(c);
  int calls = 0;
  auto flaky = [&](const HwParams& p) -> std::optional<EvalResult> {
    if (++calls % 3 == 0) return std::nullopt;
    return land(p);
  };
  std::mt19937_64 rng(10);
  TuneOptions o;
  o.budget = 9;
  o.candidates = 64;
  auto r = tune_loop(c, flaky, o, rng);
  EXPECT_EQ(r.history.size(), 6u);
  EXPECT_EQ(r.warnings.size(), 3u);
}

TEST(TuneLoop, SameSeedSameHistory) {
  HwConstraints c;
  testing_support::Landscape land(c);
  TuneOptions o;
  o.budget = 8;
  o.candidates = 64;
  std::mt19937_64 a(11), b(11);
  auto ra = tune_loop(c, land, o, a);
  auto rb = tune_loop(c, land, o, b);
  ASSERT_EQ(ra.history.size(), rb.history.size());
  for (std::size_t i = 0; i < ra.history.size(); ++i) {
    EXPECT_EQ(ra.history[i].params, rb.history[i].params);
    EXPECT_EQ(ra.history[i].cost, rb.history[i].cost);
  }
}

TEST(TuneLoop, EvaluatesRealWorkloads) {
  HwConstraints c;
  auto g = load_dnn("samples/workloads/chain.json");
  MapperEvaluator ev({g}, c, 1.0, 1.0);
  std::mt19937_64 rng(12);
  TuneOptions o;
  o.budget = 3;
  o.candidates = 32;
  auto r = tune_loop(c, ev, o, rng);
  ASSERT_FALSE(r.history.empty());
  for (const auto& h : r.history) {
    ASSERT_EQ(h.workloads.size(), 1u);
    EXPECT_NEAR(h.cost, h.workloads[0].energy_pj * static_cast<double>(h.workloads[0].latency_cycles),
                1e-9 * h.cost);
  }
}

}  // namespace
}  // namespace pimdse
