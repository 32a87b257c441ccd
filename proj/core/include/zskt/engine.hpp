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

#ifndef ZSKT_ENGINE_HPP_
#define ZSKT_ENGINE_HPP_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "zskt/data.hpp"
#include "zskt/losses.hpp"
#include "zskt/nn.hpp"
#include "zskt/optim.hpp"

namespace zskt {

// When the learning-rate schedule advances.
enum class ScheduleUnit { kOuterIteration, kGradientStep };

struct ZeroShotConfig {
  std::size_t iterations = 1000;  // N
  std::size_t generator_steps = 1;  // n_G
  std::size_t student_steps = 10;   // n_S
  double lr = 2e-3;
  double beta = 250.0;
  std::size_t z_dim = 100;
  std::size_t batch = 128;
  std::vector<ExtraLossConfig> extras;
  std::uint64_t seed = 0;
  // Draw a fresh z before every generator step instead of once per iteration.
  bool resample_z = false;
  ScheduleUnit schedule_unit = ScheduleUnit::kOuterIteration;
  Divergence divergence = Divergence::kForwardKl;
};

void validate(const ZeroShotConfig& cfg);

struct TelemetryRecord {
  std::size_t iter = 0;
  double loss_g = 0.0;  // NaN when the run has no generator phase
  double loss_s = 0.0;
  double t_maxprob = 0.0;
  double s_maxprob = 0.0;
  double lr = 0.0;
  std::vector<std::size_t> class_hist;  // teacher argmax on the batch
  double wall_seconds = 0.0;            // not written to CSV
  // KL part of the first student step's loss on the same batch.
  double first_student_kl = 0.0;
};

struct Telemetry {
  std::size_t classes = 0;
  std::vector<TelemetryRecord> records;

  // iter,L_G,L_S,t_maxprob,s_maxprob,lr,class_0..class_{C-1}
  std::string csv() const;
  void write_csv(const std::string& path) const;
};

enum class Phase { kGenerator, kStudent };

// Called after every optimizer step of either phase with state digests of
// the adversary (generator weights or pseudo points) and the student.
using StepObserver = std::function<void(Phase phase, std::uint64_t adversary_digest, std::uint64_t student_digest)>;

struct ZeroShotResult {
  Network student;
  Network generator;
  Telemetry telemetry;
  std::size_t generator_updates = 0;
  std::size_t student_updates = 0;
};

// Algorithm: per outer iteration sample z, take n_G generator steps on
// -divergence(T || S) and n_S student steps on the student loss over the
// last generated batch.
ZeroShotResult run_zero_shot(Network& teacher, const NetSpec& student_spec, const NetSpec& generator_spec,
                             const ZeroShotConfig& cfg, const StepObserver& observer = {});

struct ToyConfig {
  ZeroShotConfig zs;
  std::size_t points = 128;      // P
  double point_lr = 0.02;
  // Initial points lie at radius in [inner, outer] times the half diagonal
  // of the data bounding box, around its centre.
  double ring_inner = 1.0;
  double ring_outer = 1.5;
  std::size_t snapshot_every = 50;
};

ToyConfig default_toy_config();

struct BoundingBox {
  double x_min = 0, x_max = 0, y_min = 0, y_max = 0;
};

BoundingBox bounding_box(const Dataset& ds);

struct Snapshot {
  std::size_t index = 0;
  std::size_t iter = 0;
  Tensor points;  // [P, 2]
};

struct ToyResult {
  Network student;
  std::vector<Snapshot> trajectory;
  Telemetry telemetry;
};

// Same alternation with the pseudo points themselves as the adversary.
// A non-null student_init replaces the freshly built student.
ToyResult run_toy_direct(Network& teacher, const NetSpec& student_spec, const BoundingBox& box,
                         const ToyConfig& cfg, const Network* student_init = nullptr,
                         const StepObserver& observer = {});

// snapshot,point_id,x,y
void write_trajectory_csv(const std::vector<Snapshot>& trajectory, const std::string& path);

// Fraction of a res x res grid over box where teacher and student argmax agree.
double grid_agreement(Network& a, Network& b, const BoundingBox& box, std::size_t res);

enum class NoiseKind { kUniformPixel, kGaussian };
std::string_view noise_kind_name(NoiseKind k);
NoiseKind noise_kind_from_name(std::string_view name);

struct NoiseMatchConfig {
  std::size_t steps = 20000;
  std::size_t batch = 64;
  double lr = 2e-3;
  NoiseKind noise = NoiseKind::kGaussian;
  std::uint64_t seed = 0;
  std::size_t log_every = 100;
};

// Uniform discrete pixels in [0,255] mapped through stats, or N(0,1) in
// normalized space, drawn fresh per batch.
Tensor sample_noise(NoiseKind kind, const Shape& sample_shape, std::size_t n, const NormStats& stats, Rng& rng);

struct NoiseMatchResult {
  Network student;
  Telemetry telemetry;
};

// Student trained on the divergence to the teacher over fresh noise batches.
NoiseMatchResult match_on_noise(Network& teacher, const NetSpec& student_spec, const NormStats& stats,
                                const NoiseMatchConfig& cfg);

// Eval-mode generator samples for dumping.
Tensor sample_generator(Network& generator, std::size_t n, std::uint64_t seed);

}  // namespace zskt

#endif  // ZSKT_ENGINE_HPP_
