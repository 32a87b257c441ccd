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

#ifndef ZSKT_RANDOM_HPP_
#define ZSKT_RANDOM_HPP_

#include <cstdint>
#include <random>

#include "zskt/tensor.hpp"

namespace zskt {

using Rng = std::mt19937_64;

Tensor uniform_tensor(Shape shape, Rng& rng, double lo, double hi);
Tensor normal_tensor(Shape shape, Rng& rng, double mean = 0.0, double stddev = 1.0);

// Seed for an independent stream derived from (seed, stream).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace zskt

#endif  // ZSKT_RANDOM_HPP_
