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

// Small dense networks with rectifier hidden layers, reverse-mode
// gradients over a flat parameter vector, and the Adam update.

#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <random>
#include <vector>

#include "pimdse/error.hpp"

namespace pimdse::nn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Rows of the input are samples. Hidden layers use ReLU; the last layer is
// linear.
class Mlp {
 public:
  Mlp() = default;

  // widths: input, hidden..., output.
  Mlp(std::vector<int> widths, std::mt19937_64& rng) : widths_(std::move(widths)) {
    if (widths_.size() < 2) throw ConfigError("network needs an input and an output width");
    for (int w : widths_)
      if (w < 1) throw ConfigError("network widths must be positive");
    params_.resize(parameter_count());
    Eigen::Index off = 0;
    for (std::size_t l = 0; l + 1 < widths_.size(); ++l) {
      const int in = widths_[l], out = widths_[l + 1];
      std::normal_distribution<double> he(0.0, std::sqrt(2.0 / in));
      for (int i = 0; i < in * out; ++i) params_[off++] = he(rng);
      for (int i = 0; i < out; ++i) params_[off++] = 0.01;
    }
  }

  const std::vector<int>& widths() const { return widths_; }
  int input_width() const { return widths_.front(); }
  int output_width() const { return widths_.back(); }

  Eigen::Index parameter_count() const {
    Eigen::Index n = 0;
    for (std::size_t l = 0; l + 1 < widths_.size(); ++l) n += static_cast<Eigen::Index>(widths_[l] + 1) * widths_[l + 1];
    return n;
  }
  const Vector& params() const { return params_; }
  void set_params(const Vector& p) {
    if (p.size() != params_.size()) throw ConfigError("parameter vector size mismatch");
    params_ = p;
  }

  // Pre-activations of every layer, kept for the backward pass.
  struct Tape {
    std::vector<Matrix> inputs;  // input of layer l (post-activation of l-1)
    std::vector<Matrix> pre;     // pre-activation of layer l
  };

  Matrix forward(const Matrix& x, Tape* tape = nullptr) const {
    if (x.cols() != input_width()) throw ConfigError("network input width mismatch");
    Matrix h = x;
    Eigen::Index off = 0;
    const std::size_t layers = widths_.size() - 1;
    if (tape) {
      tape->inputs.clear();
      tape->pre.clear();
    }
    for (std::size_t l = 0; l < layers; ++l) {
      const int in = widths_[l], out = widths_[l + 1];
      Eigen::Map<const Matrix> w(params_.data() + off, in, out);
      Eigen::Map<const Vector> b(params_.data() + off + static_cast<Eigen::Index>(in) * out, out);
      off += static_cast<Eigen::Index>(in + 1) * out;
      Matrix z = h * w;
      z.rowwise() += b.transpose();
      if (tape) {
        tape->inputs.push_back(h);
        tape->pre.push_back(z);
      }
      h = l + 1 < layers ? Matrix(z.cwiseMax(0.0)) : z;
    }
    return h;
  }

  // Gradient of a scalar loss with respect to the parameters, given the
  // loss gradient at the output.
  Vector backward(const Tape& tape, const Matrix& d_out) const {
    Vector grad = Vector::Zero(params_.size());
    const std::size_t layers = widths_.size() - 1;
    std::vector<Eigen::Index> offsets(layers);
    Eigen::Index off = 0;
    for (std::size_t l = 0; l < layers; ++l) {
      offsets[l] = off;
      off += static_cast<Eigen::Index>(widths_[l] + 1) * widths_[l + 1];
    }
    Matrix d = d_out;
    for (std::size_t l = layers; l-- > 0;) {
      const int in = widths_[l], out = widths_[l + 1];
      if (l + 1 < layers) d = d.cwiseProduct((tape.pre[l].array() > 0.0).cast<double>().matrix());
      Eigen::Map<Matrix> gw(grad.data() + offsets[l], in, out);
      Eigen::Map<Vector> gb(grad.data() + offsets[l] + static_cast<Eigen::Index>(in) * out, out);
      gw = tape.inputs[l].transpose() * d;
      gb = d.colwise().sum().transpose();
      if (l > 0) {
        Eigen::Map<const Matrix> w(params_.data() + offsets[l], in, out);
        d = d * w.transpose();
      }
    }
    return grad;
  }

 private:
  std::vector<int> widths_;
  Vector params_;
};

class Adam {
 public:
  explicit Adam(double lr = 1e-2, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : lr_(lr), b1_(beta1), b2_(beta2), eps_(eps) {}

  double learning_rate() const { return lr_; }
  void set_learning_rate(double lr) { lr_ = lr; }

  // Returns the step to add to the parameters for a descent direction.
  Vector step(const Vector& grad) {
    if (m_.size() != grad.size()) {
      m_ = Vector::Zero(grad.size());
      v_ = Vector::Zero(grad.size());
      t_ = 0;
    }
    ++t_;
    m_ = b1_ * m_ + (1 - b1_) * grad;
    v_ = b2_ * v_ + (1 - b2_) * grad.cwiseProduct(grad);
    const double c1 = 1 - std::pow(b1_, t_), c2 = 1 - std::pow(b2_, t_);
    return -lr_ * (m_ / c1).cwiseQuotient(((v_ / c2).cwiseSqrt().array() + eps_).matrix());
  }

 private:
  double lr_, b1_, b2_, eps_;
  Vector m_, v_;
  int t_ = 0;
};

}  // namespace pimdse::nn
