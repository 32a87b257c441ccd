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

#ifndef ZSKT_PROBE_HPP_
#define ZSKT_PROBE_HPP_

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "zskt/data.hpp"
#include "zskt/nn.hpp"

namespace zskt {

struct ProbeConfig {
  std::size_t k = 100;  // adversarial steps
  double xi = 1.0;      // step size
  std::size_t max_images = 1000;
  // Clamp x_adv to [clamp_lo, clamp_hi] after every step. Off by default.
  bool clamp = false;
  double clamp_lo = 0.0;
  double clamp_hi = 1.0;
  bool keep_vectors = false;  // retain full output vectors per step
  std::size_t chunk = 512;    // rows per batched evaluation
};

struct TransitionCurve {
  std::size_t image_id = 0;
  std::size_t source = 0;  // i
  std::size_t target = 0;  // j
  std::vector<double> p_a;  // p_j^A per step
  std::vector<double> p_b;
  std::vector<Tensor> y_a;  // full vectors when keep_vectors
  std::vector<Tensor> y_b;
};

struct ProbeResult {
  std::vector<TransitionCurve> curves;
  std::size_t images_considered = 0;
  std::size_t images_agreeing = 0;
  std::size_t images_skipped = 0;
};

// For every test image both nets assign the same class i, and every j != i,
// step x_adv down the gradient of CE(A(x_adv), j), saving both nets'
// outputs before each step. Curves are ordered by (image, j).
ProbeResult transition_curves(Network& a, Network& b, const Dataset& test, const ProbeConfig& cfg);

// Mean over images, then target classes, then steps of |p_j^A - p_j^B|.
double mte(std::span<const TransitionCurve> curves);

// Per-step mean and standard error of the mean of p_j^A and p_j^B.
struct CurveSummary {
  std::vector<double> mean_a, se_a, mean_b, se_b;
};
CurveSummary summarize(std::span<const TransitionCurve> curves);

// image_id,i,j,step,p_j_A,p_j_B
void write_curves_csv(std::span<const TransitionCurve> curves, const std::string& path);
std::string mte_report(const ProbeResult& result, const ProbeConfig& cfg, double value);

struct NoiseAuditResult {
  std::vector<std::size_t> counts;
  std::vector<double> fractions;
  double entropy = 0.0;  // nats, of the empirical class distribution
  std::size_t n = 0;
};

// Argmax histogram of `net` over images with pixels drawn uniformly from
// the integers in [pixel_lo, pixel_hi], scaled by pixel_hi and normalized.
NoiseAuditResult noise_audit(Network& net, std::size_t n_images, int pixel_lo, int pixel_hi, const NormStats& stats,
                             std::uint64_t seed);

// class,count,fraction
void write_histogram_csv(const NoiseAuditResult& audit, const std::string& path);

}  // namespace zskt

#endif  // ZSKT_PROBE_HPP_
