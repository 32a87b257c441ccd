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

#ifndef ZSKT_GRADCHECK_HPP_
#define ZSKT_GRADCHECK_HPP_

#include <functional>

#include "zskt/autodiff.hpp"

namespace zskt {

// Builds a scalar on `graph` from the leaf `x`.
using ScalarFn = std::function<Var(Graph& graph, Var x)>;

// Max over coordinates of |analytic - central| / max(|analytic|, |central|, 1e-8),
// with fourth-order central differences of step h. Throws kNonScalar if fn is not scalar.
double finite_difference_check(const ScalarFn& fn, const Tensor& point, double h);

// Analytic gradient of fn at point.
Tensor analytic_gradient(const ScalarFn& fn, const Tensor& point);

// Fourth-order central-difference gradient of fn at point: stencil x +- h, x +- 2h.
// Its truncation error is O(h^4), so h near 1e-3 keeps both truncation and
// roundoff far below 1e-4 relative error for losses of size in the hundreds.
Tensor numeric_gradient(const ScalarFn& fn, const Tensor& point, double h);

}  // namespace zskt

#endif  // ZSKT_GRADCHECK_HPP_
