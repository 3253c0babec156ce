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

// Fourth-order central finite differences of a scalar function of a
// parameter vector, and the worst relative disagreement with an analytic
// gradient.

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>

namespace oracle {

template <class F>
Eigen::VectorXd central_difference(F&& f, const Eigen::VectorXd& x, double h = 1e-4) {
  Eigen::VectorXd g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    auto at = [&](double d) {
      Eigen::VectorXd y = x;
      y[i] += d;
      return f(y);
    };
    g[i] = (-at(2 * h) + 8 * at(h) - 8 * at(-h) + at(-2 * h)) / (12 * h);
  }
  return g;
}

// max_i |a_i - b_i| / max(|a_i|, |b_i|, floor). Entries far below the
// gradient's scale are compared against that scale instead: the floor is
// 1e-4 of the largest finite-difference entry, and at least 1e-6.
inline double max_relative_error(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  const double floor = std::max(1e-6, 1e-4 * b.cwiseAbs().maxCoeff());
  double worst = 0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    double den = std::max({std::abs(a[i]), std::abs(b[i]), floor});
    worst = std::max(worst, std::abs(a[i] - b[i]) / den);
  }
  return worst;
}

}  // namespace oracle
