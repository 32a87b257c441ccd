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

#ifndef ZSKT_OPS_HPP_
#define ZSKT_OPS_HPP_

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "zskt/autodiff.hpp"

namespace zskt {

// Running statistics and mode flags of one batchnorm site.
struct BatchNormAttrs {
  bool train = true;
  // Fold batch statistics into the running buffers (train mode only).
  bool update_running = true;
  double momentum = 0.9;
  double eps = 1e-5;
  Tensor* running_mean = nullptr;
  Tensor* running_var = nullptr;
};

// Attributes for the generic `apply` entry point. Unused fields are ignored.
struct OpAttrs {
  int axis = -1;
  double scalar = 1.0;
  std::size_t stride = 1;
  std::size_t pad = 0;
  Shape shape;
  std::vector<std::size_t> indices;
  double clamp_min = 0.0;
  BatchNormAttrs batchnorm;
};

OpKind op_kind_from_name(std::string_view name);
std::string_view op_kind_name(OpKind kind);

// Dispatches by op kind; checks arity and forwards to the functions below.
Var apply(OpKind kind, std::span<const Var> inputs, const OpAttrs& attrs = {});
Var apply(std::string_view kind, std::span<const Var> inputs, const OpAttrs& attrs = {});

// Elementwise with numpy-style broadcasting.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var div(Var a, Var b);
Var scale(Var a, double s);

Var matmul(Var a, Var b);  // [m,k] x [k,n]
Var transpose(Var a);      // 2-d

// x [B,Cin,H,W], w [Cout,Cin,k,k], optional bias [Cout] (pass an invalid Var to omit).
Var conv2d(Var x, Var w, Var bias, std::size_t stride, std::size_t pad);

Var relu(Var a);
Var exp(Var a);
// log(max(a, clamp_min)); zero gradient where clamped. clamp_min = 0 disables.
Var log(Var a, double clamp_min = 0.0);
Var square(Var a);
Var tanh(Var a);

Var sum(Var a);
Var sum(Var a, int axis);
Var mean(Var a);
Var mean(Var a, int axis);

// L2 norm over axes [start_axis, rank); output keeps the leading axes.
// The gradient at a zero vector is taken as zero.
Var l2_norm(Var a, std::size_t start_axis);
// a / l2_norm(a) over axes [start_axis, rank); zero groups map to zero.
Var normalize(Var a, std::size_t start_axis);

Var reshape(Var a, Shape shape);
Var concat(std::span<const Var> parts, int axis);
Var upsample_nearest2x(Var a);  // [B,C,H,W] -> [B,C,2H,2W]

// Per-channel over axis 1 of [B,C] or [B,C,H,W].
Var batchnorm(Var x, Var gamma, Var beta, const BatchNormAttrs& attrs);

Var softmax(Var a, int axis = -1);
Var log_softmax(Var a, int axis = -1);
// out[b] = a[b, indices[b]] for 2-d a.
Var pick(Var a, std::span<const std::size_t> indices);

}  // namespace zskt

#endif  // ZSKT_OPS_HPP_
