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

#ifndef ZSKT_LOSSES_HPP_
#define ZSKT_LOSSES_HPP_

#include <cstddef>
#include <functional>
#include <span>
#include <string_view>

#include "zskt/autodiff.hpp"
#include "zskt/random.hpp"

namespace zskt {

// Floor applied to probabilities inside every log.
inline constexpr double kProbFloor = 1e-12;
// Allowed deviation of a probability row sum from 1.
inline constexpr double kNormTolerance = 1e-6;

// Batch-averaged KL(t || s) over rows of two probability tensors ([C] is
// treated as one row). Throws kNotNormalized for rows not summing to 1.
Var forward_kl(Var t, Var s);

// Ablation variants selectable by the trainers. kForwardKl is the default.
enum class Divergence { kForwardKl, kReverseKl, kJensenShannon };
std::string_view divergence_name(Divergence d);
Divergence divergence_from_name(std::string_view name);
Var divergence(Var t, Var s, Divergence d);

// Batch-averaged entropy of probability rows.
Var entropy(Var p);

// Mean over the batch of -log softmax(logits)[label].
Var cross_entropy(Var logits, std::span<const std::size_t> labels);

// Per-sample spatial attention: channel mean of squares, flattened to
// [B, h*w] and L2-normalized per sample (zero maps stay zero).
Var attention_map(Var block);

// Sum over taps of the batch mean of ||f(A_t) - f(A_s)||_2.
// Returns a zero scalar when there are no taps.
Var attention_term(Graph& graph, std::span<const Var> t_blocks, std::span<const Var> s_blocks);

Var student_loss(Var t_logits, Var s_logits, std::span<const Var> t_blocks, std::span<const Var> s_blocks,
                 double beta, Divergence d = Divergence::kForwardKl);

enum class ExtraKind { kTeacherEntropy, kStudentEntropy, kConsistency, kDiversity };
enum class Augmentation { kNone, kGaussianNoise, kGaussianBlur };

std::string_view extra_kind_name(ExtraKind k);
ExtraKind extra_kind_from_name(std::string_view name);
std::string_view augmentation_name(Augmentation a);
Augmentation augmentation_from_name(std::string_view name);

struct ExtraLossConfig {
  ExtraKind kind = ExtraKind::kTeacherEntropy;
  double gamma = 0.0;
  int sign = 1;  // entropy terms only
  Augmentation augmentation = Augmentation::kNone;
  double noise_sigma = 0.1;
  std::size_t blur_kernel = 3;
};

// Throws kInvalidConfig for non-finite gamma, sign not +-1, or an
// augmentation on a non-consistency term (or none on a consistency term).
void validate_extra(const ExtraLossConfig& extra);

// Inputs some extras need beyond the logits.
struct ExtraContext {
  Var x;                                     // pseudo samples
  Var teacher_penultimate;                   // diversity
  std::function<Var(Var)> teacher_logits;    // consistency: T(.)
  Rng* rng = nullptr;                        // gaussian-noise augmentation
};

// Deterministic augmentation used by the consistency term.
Var augment(Var x, const ExtraLossConfig& extra, Rng* rng);

// -divergence(softmax(t), softmax(s)) plus the configured extras.
Var generator_loss(Var t_logits, Var s_logits, std::span<const ExtraLossConfig> extras,
                   const ExtraContext& context = {}, Divergence d = Divergence::kForwardKl);

// alpha * tau^2 * KL(softmax(t/tau) || softmax(s/tau)) + (1 - alpha) * CE
// + beta * attention term.
Var kd_at_loss(Var t_logits, Var s_logits, std::span<const std::size_t> labels, std::span<const Var> t_blocks,
               std::span<const Var> s_blocks, double tau, double alpha, double beta);

}  // namespace zskt

#endif  // ZSKT_LOSSES_HPP_
