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

#ifndef ZSKT_BASELINES_HPP_
#define ZSKT_BASELINES_HPP_

#include <cstddef>
#include <cstdint>

#include "zskt/data.hpp"
#include "zskt/engine.hpp"
#include "zskt/nn.hpp"
#include "zskt/optim.hpp"

namespace zskt {

struct BaselineConfig {
  std::size_t iterations = 10000;
  std::size_t batch = 64;
  double lr = 0.1;
  Schedule schedule = Schedule::kStep;
  bool use_adam = false;  // SGD with momentum otherwise
  SgdConfig sgd;
  AdamConfig adam;
  // Random integer translation of image inputs by up to this many pixels
  // per axis. 0 disables augmentation.
  std::size_t shift = 0;
  std::uint64_t seed = 0;
  std::size_t log_every = 100;
};

// Adam with cosine decay from 2e-3, used to finetune zero-shot students.
BaselineConfig finetune_defaults();

struct KdConfig {
  double tau = 4.0;
  double alpha = 0.9;
  double beta = 250.0;
};

struct FewShotConfig {
  std::size_t m = 0;  // images per class; 0 uses the full training set
  std::uint64_t seed = 0;
};

struct TrainResult {
  Network net;
  double train_accuracy = 0.0;
  double test_accuracy = 0.0;  // NaN without a test set
  std::size_t steps = 0;
  std::size_t epochs = 0;
  std::size_t train_size = 0;
  // Teacher agreement on the training subset before and after (distill and
  // finetune only).
  double agreement_before = 0.0;
  double agreement_after = 0.0;
  Telemetry telemetry;
};

// Passes over n samples in batches of `batch` needed to reach `iterations`.
std::size_t epochs_for(std::size_t n, std::size_t batch, std::size_t iterations);

TrainResult train_scratch(const NetSpec& spec, const Dataset& train, const Dataset* test, const BaselineConfig& cfg);

// Student trained from scratch on the kd_at loss over the subset chosen by few.
TrainResult distill_kd_at(Network& teacher, const NetSpec& student_spec, const Dataset& train, const Dataset* test,
                          const FewShotConfig& few, const KdConfig& kd, const BaselineConfig& cfg);

// Continues training `student` on the kd_at loss over the subset.
TrainResult finetune_few_shot(const Network& student, Network& teacher, const Dataset& train, const Dataset* test,
                              const FewShotConfig& few, const KdConfig& kd, const BaselineConfig& cfg);

// Randomly translated copy of an image batch [B,C,H,W], zero-filled in raw
// pixel space.
Tensor shift_images(const Tensor& batch, std::size_t max_shift, const NormStats* stats, Rng& rng);

}  // namespace zskt

#endif  // ZSKT_BASELINES_HPP_
