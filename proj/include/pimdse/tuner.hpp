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

// Hardware-parameter search: a normalised encoding of the seven
// parameters, an area-filter regressor, a deep-kernel Gaussian-process
// surrogate for the workload cost, and the iterative search loop.

#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "pimdse/arch.hpp"
#include "pimdse/costmodel.hpp"
#include "pimdse/error.hpp"
#include "pimdse/mapper.hpp"
#include "pimdse/nn.hpp"
#include "pimdse/workload.hpp"

namespace pimdse {

using ParamVector = std::array<double, 7>;

// ---- encoding ------------------------------------------------------------------

// The decoded design space: legal node extents, a log-scaled integer PE
// range, and power-of-two buffer sizes with the range endpoints kept.
struct Lattice {
  std::vector<int> node_rows, node_cols;
  int pe_min = 1, pe_max = 256;
  std::vector<int> buffers;

  static Lattice of(const HwConstraints& c) {
    Lattice l;
    l.node_rows = legal_node_extents(c.bank_rows, c);
    l.node_cols = legal_node_extents(c.bank_cols, c);
    if (l.node_rows.empty() || l.node_cols.empty()) throw ConfigError("no node extent divides the bank array");
    if (c.min_pe < 1 || c.max_pe < c.min_pe) throw ConfigError("invalid PE range");
    if (c.min_buf_kib < 1 || c.max_buf_kib < c.min_buf_kib) throw ConfigError("invalid buffer range");
    l.pe_min = c.min_pe;
    l.pe_max = c.max_pe;
    l.buffers.push_back(c.min_buf_kib);
    for (std::int64_t v = 1; v < c.max_buf_kib; v *= 2)
      if (v > c.min_buf_kib) l.buffers.push_back(static_cast<int>(v));
    if (c.max_buf_kib != c.min_buf_kib) l.buffers.push_back(c.max_buf_kib);
    return l;
  }
};

namespace detail {

inline double encode_index(const std::vector<int>& set, int v, const char* what) {
  auto it = std::find(set.begin(), set.end(), v);
  if (it == set.end()) throw ConfigError(std::string(what) + " " + std::to_string(v) + " is not on the lattice");
  if (set.size() == 1) return 0.0;
  return static_cast<double>(it - set.begin()) / static_cast<double>(set.size() - 1);
}

inline int decode_index(const std::vector<int>& set, double x) {
  x = std::clamp(x, 0.0, 1.0);
  auto i = static_cast<std::size_t>(std::lround(x * static_cast<double>(set.size() - 1)));
  return set[i];
}

inline double encode_log(int v, int lo, int hi) {
  if (v < lo || v > hi) throw ConfigError("PE extent " + std::to_string(v) + " outside range");
  if (hi == lo) return 0.0;
  return std::log(static_cast<double>(v) / lo) / std::log(static_cast<double>(hi) / lo);
}

inline int decode_log(double x, int lo, int hi) {
  x = std::clamp(x, 0.0, 1.0);
  double v = lo * std::pow(static_cast<double>(hi) / lo, x);
  return std::clamp(static_cast<int>(std::lround(v)), lo, hi);
}

}  // namespace detail

inline ParamVector encode(const HwParams& p, const Lattice& l) {
  return {detail::encode_index(l.node_rows, p.node_rows, "node rows"),
          detail::encode_index(l.node_cols, p.node_cols, "node cols"),
          detail::encode_log(p.pe_rows, l.pe_min, l.pe_max),
          detail::encode_log(p.pe_cols, l.pe_min, l.pe_max),
          detail::encode_index(l.buffers, p.ibuf_kib, "ibuf KiB"),
          detail::encode_index(l.buffers, p.wbuf_kib, "wbuf KiB"),
          detail::encode_index(l.buffers, p.obuf_kib, "obuf KiB")};
}

inline HwParams decode(const ParamVector& x, const Lattice& l) {
  return {detail::decode_index(l.node_rows, x[0]), detail::decode_index(l.node_cols, x[1]),
          detail::decode_log(x[2], l.pe_min, l.pe_max), detail::decode_log(x[3], l.pe_min, l.pe_max),
          detail::decode_index(l.buffers, x[4]), detail::decode_index(l.buffers, x[5]),
          detail::decode_index(l.buffers, x[6])};
}

inline nn::Matrix to_matrix(const std::vector<ParamVector>& xs) {
  nn::Matrix m(static_cast<Eigen::Index>(xs.size()), 7);
  for (std::size_t i = 0; i < xs.size(); ++i)
    for (std::size_t j = 0; j < 7; ++j) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = xs[i][j];
  return m;
}

// ---- area filter -----------------------------------------------------------------

struct FilterOptions {
  std::vector<int> hidden{32, 16, 8};  // full-scale widths: 256, 64, 16
  int epochs = 200;
  double lr = 5e-3;
  double min_lr = 1e-6;  // cosine decay from lr to min_lr over the epochs
  std::size_t batch = 8;
};

// Regressor on standardised log node area (the NN engine of one node). The
// total is the prediction times the node count. Untrained filters accept
// everything that passes the exact range and divisibility checks.
class AreaFilter {
 public:
  bool trained() const { return trained_; }
  const std::vector<double>& loss_curve() const { return loss_; }
  double final_loss() const { return loss_.empty() ? 0.0 : loss_.back(); }

  // Predicted node area in mm^2.
  double predict_area(const ParamVector& x) const {
    if (!trained_) throw ConfigError("filter is not trained");
    nn::Matrix in(1, 7);
    for (std::size_t j = 0; j < 7; ++j) in(0, static_cast<Eigen::Index>(j)) = x[j];
    return std::exp(net_.forward(in)(0, 0) * sd_ + mu_);
  }

  bool accepts(const HwParams& p, const Lattice& l, const HwConstraints& c) const {
    if (!check_divisibility(p, c)) return false;
    if (!trained_) return true;
    return static_cast<double>(p.node_rows) * p.node_cols * predict_area(encode(p, l)) <= c.area_budget_mm2;
  }

  // Mini-batch Adam on mean squared error with a cosine learning-rate decay.
  // The model keeps the parameters with the lowest full-data loss seen at an
  // epoch boundary; the recorded curve is that incumbent's loss.
  void train(const std::vector<ParamVector>& xs, const std::vector<double>& areas, const FilterOptions& opt,
             std::mt19937_64& rng) {
    if (xs.size() < 2 || xs.size() != areas.size()) throw ConfigError("filter training needs at least two samples");
    nn::Vector y(static_cast<Eigen::Index>(areas.size()));
    for (std::size_t i = 0; i < areas.size(); ++i) {
      if (!(areas[i] > 0.0)) throw NumericError("filter training area must be positive");
      y[static_cast<Eigen::Index>(i)] = std::log(areas[i]);
    }
    mu_ = y.mean();
    sd_ = std::sqrt((y.array() - mu_).square().mean());
    if (!(sd_ > 1e-12)) sd_ = 1.0;
    nn::Vector t = (y.array() - mu_) / sd_;
    std::vector<int> widths{7};
    widths.insert(widths.end(), opt.hidden.begin(), opt.hidden.end());
    widths.push_back(1);
    if (!trained_ || net_.widths() != widths) net_ = nn::Mlp(widths, rng);
    adam_ = nn::Adam(opt.lr);
    const nn::Matrix x = to_matrix(xs);
    auto loss_grad = [&](const nn::Matrix& bx, const nn::Vector& bt, nn::Vector* grad) {
      nn::Mlp::Tape tape;
      nn::Matrix out = net_.forward(bx, grad ? &tape : nullptr);
      nn::Matrix r = out.col(0) - bt;
      double loss = r.squaredNorm() / static_cast<double>(r.rows());
      if (grad) *grad = net_.backward(tape, r * (2.0 / static_cast<double>(r.rows())));
      return loss;
    };
    loss_.clear();
    double loss = loss_grad(x, t, nullptr);
    if (!std::isfinite(loss)) throw NumericError("filter loss is not finite");
    loss_.push_back(loss);
    const auto n = static_cast<std::size_t>(x.rows());
    const std::size_t batch = std::max<std::size_t>(1, std::min<std::size_t>(opt.batch, n));
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    nn::Vector best = net_.params();
    const double pi = std::acos(-1.0);
    for (int e = 0; e < opt.epochs; ++e) {
      const double phase = static_cast<double>(e) / static_cast<double>(opt.epochs);
      adam_.set_learning_rate(opt.min_lr + 0.5 * (opt.lr - opt.min_lr) * (1.0 + std::cos(pi * phase)));
      std::shuffle(order.begin(), order.end(), rng);
      for (std::size_t s = 0; s < n; s += batch) {
        const std::size_t m = std::min(batch, n - s);
        nn::Matrix bx(static_cast<Eigen::Index>(m), 7);
        nn::Vector bt(static_cast<Eigen::Index>(m));
        for (std::size_t i = 0; i < m; ++i) {
          bx.row(static_cast<Eigen::Index>(i)) = x.row(static_cast<Eigen::Index>(order[s + i]));
          bt[static_cast<Eigen::Index>(i)] = t[static_cast<Eigen::Index>(order[s + i])];
        }
        nn::Vector g;
        loss_grad(bx, bt, &g);
        net_.set_params(net_.params() + adam_.step(g));
      }
      const double l2 = loss_grad(x, t, nullptr);
      if (!std::isfinite(l2)) throw NumericError("filter loss is not finite at epoch " + std::to_string(e));
      if (l2 < loss) {
        loss = l2;
        best = net_.params();
      }
      loss_.push_back(loss);
    }
    net_.set_params(best);
    trained_ = true;
  }

 private:
  bool trained_ = false;
  nn::Mlp net_;
  nn::Adam adam_;
  double mu_ = 0, sd_ = 1;
  std::vector<double> loss_;
};

// ---- candidate sampling -------------------------------------------------------------

struct SampleResult {
  std::vector<HwParams> kept;
  std::int64_t draws = 0;
  std::int64_t truly_legal = 0;           // draws within the true area budget
  std::int64_t truly_legal_rejected = 0;  // of those, rejected by the filter
  bool exhausted = false;                 // draw cap hit before the target

  double false_negative_rate() const {
    return truly_legal == 0 ? 0.0 : static_cast<double>(truly_legal_rejected) / static_cast<double>(truly_legal);
  }
};

// Uniform draws over the encoded space; keeps distinct candidates the filter
// accepts until `n_target` are kept or the draw cap is reached.
inline SampleResult sample_candidates(std::size_t n_target, const AreaFilter& filter, const HwConstraints& c,
                                      std::mt19937_64& rng, std::int64_t draw_cap = -1) {
  const Lattice lat = Lattice::of(c);
  if (draw_cap < 0) draw_cap = 100 * static_cast<std::int64_t>(std::max<std::size_t>(n_target, 1));
  std::uniform_real_distribution<double> u(0.0, 1.0);
  SampleResult r;
  std::set<HwParams> seen;
  while (r.kept.size() < n_target) {
    if (r.draws >= draw_cap) {
      r.exhausted = true;
      break;
    }
    ++r.draws;
    ParamVector x;
    for (auto& v : x) v = u(rng);
    HwParams p = decode(x, lat);
    bool legal = static_cast<bool>(validate_params(p, c));
    bool ok = filter.accepts(p, lat, c);
    if (legal) {
      ++r.truly_legal;
      if (!ok) ++r.truly_legal_rejected;
    }
    if (ok && seen.insert(p).second) r.kept.push_back(p);
  }
  return r;
}

// ---- deep-kernel surrogate -----------------------------------------------------------

struct SurrogateOptions {
  std::vector<int> widths{32, 16, 8};  // full-scale widths: 256, 64, 16
  int epochs = 100;
  double lr = 1e-2;
  double init_noise = 1e-2;  // variance, standardised targets
  double min_noise = 1e-6;
  bool noise_free = false;   // fix the noise at zero (jitter only)
  std::size_t max_points = 512;
  double kappa = 0.0;        // rank by mean - kappa * stddev
};

// Gaussian process with a squared-exponential kernel over learned features.
// Parameters: network weights, then log lengthscale, log signal variance,
// log noise variance.
class DklSurrogate {
 public:
  DklSurrogate() = default;

  DklSurrogate(const SurrogateOptions& opt, std::mt19937_64& rng) : opt_(opt) {
    std::vector<int> widths{7};
    widths.insert(widths.end(), opt.widths.begin(), opt.widths.end());
    if (widths.size() < 2) throw ConfigError("feature extractor needs at least one layer");
    net_ = nn::Mlp(widths, rng);
    log_ls_ = std::log(std::sqrt(static_cast<double>(widths.back())));
    log_sf2_ = 0.0;
    log_sn2_ = std::log(std::max(opt.init_noise, opt.min_noise));
    adam_ = nn::Adam(opt.lr);
  }

  const nn::Mlp& network() const { return net_; }
  const std::vector<double>& lml_curve() const { return curve_; }
  std::size_t size() const { return static_cast<std::size_t>(x_.rows()); }
  double target_mean() const { return mu_; }
  double target_scale() const { return sd_; }

  // Targets are standardised; pass log costs.
  void set_data(const std::vector<ParamVector>& xs, const std::vector<double>& targets) {
    if (xs.size() < 2 || xs.size() != targets.size()) throw ConfigError("surrogate needs at least two samples");
    std::size_t start = xs.size() > opt_.max_points ? xs.size() - opt_.max_points : 0;
    std::vector<ParamVector> kept(xs.begin() + static_cast<std::ptrdiff_t>(start), xs.end());
    x_ = to_matrix(kept);
    nn::Vector y(static_cast<Eigen::Index>(kept.size()));
    for (std::size_t i = start; i < targets.size(); ++i) {
      if (!std::isfinite(targets[i])) throw NumericError("surrogate target is not finite");
      y[static_cast<Eigen::Index>(i - start)] = targets[i];
    }
    mu_ = y.mean();
    sd_ = std::sqrt((y.array() - mu_).square().mean());
    if (!(sd_ > 1e-12)) sd_ = 1.0;
    y_ = (y.array() - mu_) / sd_;
    factor_valid_ = false;
  }

  nn::Vector theta() const {
    nn::Vector t(net_.parameter_count() + 3);
    t.head(net_.parameter_count()) = net_.params();
    t[net_.parameter_count()] = log_ls_;
    t[net_.parameter_count() + 1] = log_sf2_;
    t[net_.parameter_count() + 2] = log_sn2_;
    return t;
  }

  void set_theta(const nn::Vector& t) {
    net_.set_params(t.head(net_.parameter_count()));
    log_ls_ = t[net_.parameter_count()];
    log_sf2_ = t[net_.parameter_count() + 1];
    log_sn2_ = t[net_.parameter_count() + 2];
    factor_valid_ = false;
  }

  // Exact log marginal likelihood of the standardised targets and, if
  // requested, its gradient with respect to every parameter.
  double log_marginal_likelihood(const nn::Vector& t, nn::Vector* grad = nullptr) const {
    const Eigen::Index pc = net_.parameter_count();
    nn::Mlp net = net_;
    net.set_params(t.head(pc));
    const double ls2 = std::exp(2.0 * t[pc]), sf2 = std::exp(t[pc + 1]);
    const double sn2 = opt_.noise_free ? 0.0 : std::exp(t[pc + 2]);
    nn::Mlp::Tape tape;
    nn::Matrix z = net.forward(x_, grad ? &tape : nullptr);
    nn::Matrix d = sqdist(z, z);
    nn::Matrix k = sf2 * (-d / (2.0 * ls2)).array().exp();
    const Eigen::Index n = x_.rows();
    auto llt = factor(k, sn2);
    nn::Vector alpha = llt.solve(y_);
    double lml = -0.5 * y_.dot(alpha) - nn::Matrix(llt.matrixL()).diagonal().array().log().sum() -
                 0.5 * static_cast<double>(n) * std::log(2.0 * M_PI);
    if (grad) {
      nn::Matrix kinv = llt.solve(nn::Matrix::Identity(n, n));
      nn::Matrix g = 0.5 * (alpha * alpha.transpose() - kinv);
      nn::Matrix gk = g.cwiseProduct(k);
      grad->resize(pc + 3);
      (*grad)[pc] = gk.cwiseProduct(d).sum() / ls2;
      (*grad)[pc + 1] = gk.sum();
      (*grad)[pc + 2] = opt_.noise_free ? 0.0 : sn2 * g.trace();
      nn::Matrix dz = -(2.0 / ls2) * (gk.rowwise().sum().asDiagonal() * z - gk * z);
      grad->head(pc) = net.backward(tape, dz);
    }
    return lml;
  }

  // Adam ascent on the marginal likelihood; steps that lower it are undone
  // and the learning rate halved.
  void train(int epochs) {
    if (x_.rows() < 2) throw ConfigError("surrogate has no data");
    adam_.set_learning_rate(opt_.lr);
    nn::Vector t = theta(), grad;
    double cur = log_marginal_likelihood(t, &grad);
    curve_.assign(1, cur);
    for (int e = 0; e < epochs; ++e) {
      nn::Vector next = t + adam_.step(-grad);
      clamp_noise(next);
      nn::Vector g2;
      double v = -std::numeric_limits<double>::infinity();
      try {
        v = log_marginal_likelihood(next, &g2);
      } catch (const NumericError&) {
      }
      if (std::isfinite(v) && v >= cur) {
        t = next;
        cur = v;
        grad = g2;
      } else {
        adam_.set_learning_rate(adam_.learning_rate() * 0.5);
      }
      curve_.push_back(cur);
    }
    set_theta(t);
  }

  struct Prediction {
    nn::Vector mean;    // in target units
    nn::Vector stddev;  // in target units
  };

  Prediction predict(const nn::Matrix& xs) const {
    refresh();
    const double ls2 = std::exp(2.0 * log_ls_), sf2 = std::exp(log_sf2_);
    nn::Matrix zs = net_.forward(xs);
    nn::Matrix ks = sf2 * (-sqdist(zs, z_) / (2.0 * ls2)).array().exp();
    Prediction p;
    p.mean = (ks * alpha_).array() * sd_ + mu_;
    nn::Matrix v = llt_.matrixL().solve(ks.transpose());
    nn::Vector var = (sf2 - v.colwise().squaredNorm().transpose().array()).cwiseMax(0.0);
    p.stddev = var.array().sqrt() * sd_;
    return p;
  }

  const SurrogateOptions& options() const { return opt_; }

 private:
  static nn::Matrix sqdist(const nn::Matrix& a, const nn::Matrix& b) {
    nn::Vector na = a.rowwise().squaredNorm(), nb = b.rowwise().squaredNorm();
    nn::Matrix d = (-2.0 * a * b.transpose()).colwise() + na;
    d.rowwise() += nb.transpose();
    return d.cwiseMax(0.0);
  }

  // Cholesky with escalating diagonal jitter.
  static Eigen::LLT<nn::Matrix> factor(const nn::Matrix& k, double noise) {
    const Eigen::Index n = k.rows();
    const double scale = std::max(1e-300, k.diagonal().mean());
    double jitter = 0.0;
    for (int attempt = 0; attempt < 12; ++attempt) {
      nn::Matrix ky = k;
      ky.diagonal().array() += noise + jitter;
      Eigen::LLT<nn::Matrix> llt(ky);
      if (llt.info() == Eigen::Success && (nn::Matrix(llt.matrixL()).diagonal().array() > 0).all()) return llt;
      jitter = jitter == 0.0 ? 1e-12 * scale : jitter * 10.0;
    }
    throw NumericError("covariance is not positive definite after jitter up to " + std::to_string(jitter) + " (n=" +
                       std::to_string(n) + ")");
  }

  void clamp_noise(nn::Vector& t) const {
    auto i = net_.parameter_count() + 2;
    t[i] = std::max(t[i], std::log(opt_.min_noise));
  }

  void refresh() const {
    if (factor_valid_) return;
    const double ls2 = std::exp(2.0 * log_ls_), sf2 = std::exp(log_sf2_);
    const double sn2 = opt_.noise_free ? 0.0 : std::exp(log_sn2_);
    z_ = net_.forward(x_);
    nn::Matrix k = sf2 * (-sqdist(z_, z_) / (2.0 * ls2)).array().exp();
    llt_ = factor(k, sn2);
    alpha_ = llt_.solve(y_);
    factor_valid_ = true;
  }

  SurrogateOptions opt_;
  nn::Mlp net_;
  nn::Adam adam_;
  double log_ls_ = 0, log_sf2_ = 0, log_sn2_ = 0;
  nn::Matrix x_;
  nn::Vector y_;
  double mu_ = 0, sd_ = 1;
  std::vector<double> curve_;

  mutable bool factor_valid_ = false;
  mutable nn::Matrix z_;
  mutable Eigen::LLT<nn::Matrix> llt_;
  mutable nn::Vector alpha_;
};

// Candidates ordered by ascending predicted score; equal scores fall back
// to the parameter encoding.
inline std::vector<HwParams> surrogate_rank(const DklSurrogate& model, const std::vector<HwParams>& candidates,
                                            const Lattice& lat) {
  if (candidates.empty()) return {};
  std::vector<ParamVector> xs;
  for (const auto& p : candidates) xs.push_back(encode(p, lat));
  auto pred = model.predict(to_matrix(xs));
  const double kappa = model.options().kappa;
  std::vector<std::size_t> idx(candidates.size());
  std::iota(idx.begin(), idx.end(), 0);
  auto score = [&](std::size_t i) {
    auto k = static_cast<Eigen::Index>(i);
    return pred.mean[k] - kappa * pred.stddev[k];
  };
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    double sa = score(a), sb = score(b);
    if (sa != sb) return sa < sb;
    return candidates[a] < candidates[b];
  });
  std::vector<HwParams> out;
  for (auto i : idx) out.push_back(candidates[i]);
  return out;
}

// ---- search loop -----------------------------------------------------------------------

struct WorkloadMetrics {
  std::string name;
  std::int64_t latency_cycles = 0;
  double energy_pj = 0;
};

struct EvalResult {
  double cost = 0;
  std::vector<WorkloadMetrics> workloads;
};

struct TuneRecord {
  int iteration = 0;
  HwParams params;
  double area_mm2 = 0;
  double cost = 0;
  std::vector<WorkloadMetrics> workloads;
  double filter_false_negative = 0;
};

struct TuneOptions {
  int budget = 20;                // iterations
  std::size_t candidates = 1024;  // filtered samples ranked per iteration
  int init_random = 4;            // leading iterations that evaluate a random legal architecture
  std::size_t filter_min_samples = 32;
  int refit_epochs = 50;          // training epochs after the first fit
  FilterOptions filter;
  SurrogateOptions surrogate;
};

struct TuneResult {
  std::optional<TuneRecord> best;
  std::vector<TuneRecord> history;
  std::vector<std::string> warnings;
};

namespace detail {

// A legal architecture not yet evaluated, drawn uniformly.
inline std::optional<HwParams> random_legal(const Lattice& lat, const HwConstraints& c, std::mt19937_64& rng,
                                            const std::set<HwParams>& skip, std::vector<ParamVector>* area_x = nullptr,
                                            std::vector<double>* area_y = nullptr, int cap = 100000) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < cap; ++i) {
    ParamVector x;
    for (auto& v : x) v = u(rng);
    HwParams p = decode(x, lat);
    if (!check_divisibility(p, c)) continue;
    if (area_x) {
      area_x->push_back(encode(p, lat));
      area_y->push_back(area_model(p, c));
    }
    if (total_area(p, c) <= c.area_budget_mm2 && !skip.count(p)) return p;
  }
  return std::nullopt;
}

inline void record(TuneResult& r, TuneRecord rec) {
  if (!r.best || rec.cost < r.best->cost) r.best = rec;
  r.history.push_back(std::move(rec));
}

}  // namespace detail

// Sample, filter, rank, verify the true area down the ranked list, and
// evaluate the first legal unseen architecture; both models are refit
// every iteration. `eval` returns nullopt when an architecture cannot be
// mapped; that iteration is skipped with a warning.
template <class Evaluator>
TuneResult tune_loop(const HwConstraints& c, Evaluator&& eval, const TuneOptions& opt, std::mt19937_64& rng) {
  if (opt.budget < 1) throw ConfigError("tuning budget must be at least 1");
  const Lattice lat = Lattice::of(c);
  TuneResult result;
  AreaFilter filter;
  std::optional<DklSurrogate> model;
  std::vector<ParamVector> area_x, cost_x;
  std::vector<double> area_y, cost_y;
  std::set<HwParams> tried;

  for (int it = 0; it < opt.budget; ++it) {
    std::optional<HwParams> pick;
    double fn_rate = 0;
    if (it < opt.init_random || cost_x.size() < 2) {
      pick = detail::random_legal(lat, c, rng, tried, &area_x, &area_y);
    } else {
      if (area_x.size() >= opt.filter_min_samples) {
        FilterOptions fo = opt.filter;
        if (filter.trained()) fo.epochs = opt.refit_epochs;
        filter.train(area_x, area_y, fo, rng);
      }
      if (!model) model.emplace(opt.surrogate, rng);
      model->set_data(cost_x, cost_y);
      model->train(model->lml_curve().empty() ? opt.surrogate.epochs : opt.refit_epochs);
      auto sampled = sample_candidates(opt.candidates, filter, c, rng);
      fn_rate = sampled.false_negative_rate();
      if (sampled.exhausted)
        result.warnings.push_back("iteration " + std::to_string(it) + ": draw cap reached with " +
                                  std::to_string(sampled.kept.size()) + " candidates");
      for (const auto& p : surrogate_rank(*model, sampled.kept, lat)) {
        if (tried.count(p)) continue;
        double area = total_area(p, c);
        area_x.push_back(encode(p, lat));
        area_y.push_back(area_model(p, c));
        if (area <= c.area_budget_mm2) {
          pick = p;
          break;
        }
      }
    }
    if (!pick) {
      result.warnings.push_back("iteration " + std::to_string(it) + ": no legal architecture found");
      continue;
    }
    tried.insert(*pick);
    std::optional<EvalResult> ev = eval(*pick);
    if (!ev) {
      result.warnings.push_back("iteration " + std::to_string(it) + ": " + to_string(*pick) + " could not be mapped");
      continue;
    }
    if (!(ev->cost > 0) || !std::isfinite(ev->cost)) throw NumericError("evaluated cost must be positive and finite");
    cost_x.push_back(encode(*pick, lat));
    cost_y.push_back(std::log(ev->cost));
    detail::record(result, {it, *pick, total_area(*pick, c), ev->cost, ev->workloads, fn_rate});
  }
  return result;
}

// Same budget, every iteration a uniformly drawn legal architecture.
template <class Evaluator>
TuneResult random_search(const HwConstraints& c, Evaluator&& eval, int budget, std::mt19937_64& rng) {
  if (budget < 1) throw ConfigError("tuning budget must be at least 1");
  const Lattice lat = Lattice::of(c);
  TuneResult result;
  std::set<HwParams> tried;
  for (int it = 0; it < budget; ++it) {
    auto pick = detail::random_legal(lat, c, rng, tried);
    if (!pick) {
      result.warnings.push_back("iteration " + std::to_string(it) + ": no legal architecture found");
      continue;
    }
    tried.insert(*pick);
    std::optional<EvalResult> ev = eval(*pick);
    if (!ev) {
      result.warnings.push_back("iteration " + std::to_string(it) + ": " + to_string(*pick) + " could not be mapped");
      continue;
    }
    detail::record(result, {it, *pick, total_area(*pick, c), ev->cost, ev->workloads, 0.0});
  }
  return result;
}

// Maps every workload on the architecture and combines the results as
// the sum over workloads of gamma * E^alpha * L^beta.
class MapperEvaluator {
 public:
  MapperEvaluator(std::vector<DnnGraph> workloads, HwConstraints c, double alpha, double beta,
                  MapperOptions mapper = {})
      : workloads_(std::move(workloads)), c_(c), alpha_(alpha), beta_(beta), mapper_(mapper) {
    mapper_.alpha = alpha;
    mapper_.beta = beta;
    if (workloads_.empty()) throw ConfigError("at least one workload is required");
  }

  std::optional<EvalResult> operator()(const HwParams& p) const {
    EvalResult r;
    std::vector<WorkloadCost> items;
    for (const auto& g : workloads_) {
      MappingScheme s;
      try {
        s = map_dnn(g, p, c_, mapper_);
      } catch (const InfeasibleError&) {
        return std::nullopt;
      }
      r.workloads.push_back({g.name, s.latency_cycles, s.energy_pj});
      items.push_back({s.energy_pj, static_cast<double>(s.latency_cycles), g.gamma});
    }
    r.cost = total_cost(items, alpha_, beta_);
    return r;
  }

 private:
  std::vector<DnnGraph> workloads_;
  HwConstraints c_;
  double alpha_, beta_;
  MapperOptions mapper_;
};

}  // namespace pimdse
