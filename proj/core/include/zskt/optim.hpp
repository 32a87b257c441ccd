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

#ifndef ZSKT_OPTIM_HPP_
#define ZSKT_OPTIM_HPP_

#include <cstddef>
#include <span>
#include <vector>

#include "zskt/nn.hpp"
#include "zskt/tensor.hpp"

namespace zskt {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct SgdConfig {
  double momentum = 0.9;
  double weight_decay = 5e-4;
};

// Moment (Adam) or velocity (SGD) buffers plus the step counter.
struct OptState {
  std::vector<Tensor> m;
  std::vector<Tensor> v;
  std::size_t t = 0;
};

// Views over parameter values and matching gradients.
void adam_step(std::span<Tensor* const> params, std::span<const Tensor> grads, OptState& state, double lr,
               const AdamConfig& config = {});
void sgd_momentum_step(std::span<Tensor* const> params, std::span<const Tensor> grads, OptState& state,
                       double lr, const SgdConfig& config = {});

// eta0 * (1 + cos(pi t / n)) / 2.
double cosine_lr(double t, double n, double eta0);
// eta0, divided by 5 at 30%, 60% and 80% of n.
double step_lr(double t, double n, double eta0);

enum class Schedule { kCosine, kStep, kConstant };
double schedule_lr(Schedule s, double t, double n, double eta0);

// Pointers to every parameter tensor of a network.
std::vector<Tensor*> parameter_views(Network& net);

}  // namespace zskt

#endif  // ZSKT_OPTIM_HPP_
