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

#include "zskt/optim.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "zskt/error.hpp"

namespace zskt {
namespace {

void check(std::string_view op, std::span<Tensor* const> params, std::span<const Tensor> grads, OptState& state) {
  if (params.size() != grads.size()) {
    throw Error(ErrorCode::kShapeMismatch, std::string(op) + ": " + std::to_string(params.size()) +
                                               " parameters, " + std::to_string(grads.size()) + " gradients");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i]->shape() != grads[i].shape()) {
      throw Error(ErrorCode::kShapeMismatch, std::string(op) + ": parameter " + std::to_string(i) + " is " +
                                                 shape_string(params[i]->shape()) + ", gradient is " +
                                                 shape_string(grads[i].shape()));
    }
    if (!grads[i].all_finite()) {
      throw Error(ErrorCode::kNanGradient, std::string(op) + ": non-finite gradient for parameter " +
                                               std::to_string(i) + " at step " + std::to_string(state.t + 1));
    }
  }
}

void ensure(std::vector<Tensor>& buffers, std::span<Tensor* const> params) {
  if (buffers.size() == params.size()) return;
  buffers.clear();
  for (const Tensor* p : params) buffers.emplace_back(p->shape(), 0.0);
}

}  // namespace

void adam_step(std::span<Tensor* const> params, std::span<const Tensor> grads, OptState& state, double lr,
               const AdamConfig& c) {
  check("adam_step", params, grads, state);
  ensure(state.m, params);
  ensure(state.v, params);
  ++state.t;
  const double t = static_cast<double>(state.t);
  const double bc1 = 1.0 - std::pow(c.beta1, t);
  const double bc2 = 1.0 - std::pow(c.beta2, t);
  for (std::size_t k = 0; k < params.size(); ++k) {
    double* p = params[k]->data();
    const double* g = grads[k].data();
    double* m = state.m[k].data();
    double* v = state.v[k].data();
    for (std::size_t i = 0; i < grads[k].size(); ++i) {
      m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g[i];
      v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g[i] * g[i];
      p[i] -= lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + c.eps);
    }
  }
}

void sgd_momentum_step(std::span<Tensor* const> params, std::span<const Tensor> grads, OptState& state,
                       double lr, const SgdConfig& c) {
  check("sgd_momentum_step", params, grads, state);
  ensure(state.v, params);
  ++state.t;
  for (std::size_t k = 0; k < params.size(); ++k) {
    double* p = params[k]->data();
    const double* g = grads[k].data();
    double* v = state.v[k].data();
    for (std::size_t i = 0; i < grads[k].size(); ++i) {
      v[i] = c.momentum * v[i] + g[i] + c.weight_decay * p[i];
      p[i] -= lr * v[i];
    }
  }
}

double cosine_lr(double t, double n, double eta0) {
  if (!(n > 0.0) || t < 0.0 || t > n) {
    throw Error(ErrorCode::kInvalidArgument, "cosine_lr: need 0 <= t <= N and N > 0");
  }
  return eta0 * 0.5 * (1.0 + std::cos(std::numbers::pi * t / n));
}

double step_lr(double t, double n, double eta0) {
  if (!(n > 0.0) || t < 0.0 || t > n) {
    throw Error(ErrorCode::kInvalidArgument, "step_lr: need 0 <= t <= N and N > 0");
  }
  const double f = t / n;
  if (f < 0.3) return eta0;
  if (f < 0.6) return eta0 / 5.0;
  if (f < 0.8) return eta0 / 25.0;
  return eta0 / 125.0;
}

double schedule_lr(Schedule s, double t, double n, double eta0) {
  switch (s) {
    case Schedule::kCosine: return cosine_lr(t, n, eta0);
    case Schedule::kStep: return step_lr(t, n, eta0);
    case Schedule::kConstant: return eta0;
  }
  return eta0;
}

std::vector<Tensor*> parameter_views(Network& net) {
  std::vector<Tensor*> views;
  for (Parameter& p : net.parameters()) views.push_back(&p.value);
  return views;
}

}  // namespace zskt
