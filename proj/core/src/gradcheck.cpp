/* Copyright 2026 The zskt Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include "zskt/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "zskt/error.hpp"

namespace zskt {
namespace {

double eval(const ScalarFn& fn, const Tensor& point) {
  Graph g(/*recording=*/false);
  const Var out = fn(g, g.constant(point));
  if (out.value().size() != 1) {
    throw Error(ErrorCode::kNonScalar, "finite_difference_check: function output has shape " +
                                           shape_string(out.value().shape()));
  }
  return out.value()[0];
}

}  // namespace

Tensor analytic_gradient(const ScalarFn& fn, const Tensor& point) {
  Graph g;
  const Var x = g.variable(point);
  const Var out = fn(g, x);
  if (out.value().size() != 1) {
    throw Error(ErrorCode::kNonScalar, "finite_difference_check: function output has shape " +
                                           shape_string(out.value().shape()));
  }
  if (!out.requires_grad()) return Tensor(point.shape(), 0.0);
  return g.backward(out)[x];
}

Tensor numeric_gradient(const ScalarFn& fn, const Tensor& point, double h) {
  if (!(h > 0.0)) throw Error(ErrorCode::kInvalidArgument, "finite_difference_check: h must be positive");
  Tensor grad(point.shape());
  Tensor probe = point;
  auto at = [&](std::size_t i, double offset) {
    probe[i] = point[i] + offset;
    return eval(fn, probe);
  };
  for (std::size_t i = 0; i < point.size(); ++i) {
    const double up1 = at(i, h), down1 = at(i, -h);
    const double up2 = at(i, 2.0 * h), down2 = at(i, -2.0 * h);
    probe[i] = point[i];
    // Differences first: equal values cancel exactly, so coordinates the
    // function ignores come out as exact zeros.
    grad[i] = (8.0 * (up1 - down1) - (up2 - down2)) / (12.0 * h);
  }
  return grad;
}

double finite_difference_check(const ScalarFn& fn, const Tensor& point, double h) {
  const Tensor analytic = analytic_gradient(fn, point);
  const Tensor numeric = numeric_gradient(fn, point, h);
  double worst = 0.0;
  for (std::size_t i = 0; i < point.size(); ++i) {
    const double a = analytic[i], c = numeric[i];
    const double denom = std::max({std::abs(a), std::abs(c), 1e-8});
    worst = std::max(worst, std::abs(a - c) / denom);
  }
  return worst;
}

}  // namespace zskt
