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

#ifndef ZSKT_TESTS_SUPPORT_SUITES_HPP_
#define ZSKT_TESTS_SUPPORT_SUITES_HPP_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "zskt/gradcheck.hpp"
#include "zskt/random.hpp"

namespace zskt::testing {

// One random instance of a scalar function and the point to check it at.
struct GradInstance {
  ScalarFn fn;
  Tensor point;
};

struct GradCase {
  std::string name;
  std::function<GradInstance(Rng&)> make;
};

std::vector<GradCase> op_cases();
std::vector<GradCase> loss_cases();

struct GradSuiteResult {
  std::string worst_case;
  double worst_error = 0.0;
  std::size_t instances = 0;
  std::size_t cases = 0;
};

// Runs every case on `instances` random draws with step h.
GradSuiteResult run_grad_suite(const std::vector<GradCase>& cases, std::size_t instances, double h,
                               std::uint64_t seed);

// Largest |generator_loss + KL part of student_loss| over random batches.
double loss_sign_identity_gap(std::size_t batches, std::uint64_t seed);

// Number of random normalized pairs with forward_kl < 0.
std::size_t forward_kl_violations(std::size_t pairs, std::uint64_t seed);

// Reference KL(t || s) by direct summation with 0 log 0 = 0.
double reference_kl(const std::vector<double>& t, const std::vector<double>& s);

}  // namespace zskt::testing

#endif  // ZSKT_TESTS_SUPPORT_SUITES_HPP_
