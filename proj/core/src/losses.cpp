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

#include "zskt/losses.hpp"

#include <cmath>
#include <string>
#include <vector>

#include "zskt/error.hpp"
#include "zskt/ops.hpp"

namespace zskt {
namespace {

Var as_rows(Var p) {
  const Shape& s = p.value().shape();
  if (s.size() == 1) return reshape(p, Shape{1, s[0]});
  if (s.size() != 2) throw Error(ErrorCode::kShapeMismatch, "probabilities must be [B,C], got " + shape_string(s));
  return p;
}

void check_normalized(std::string_view what, const Tensor& p) {
  const std::size_t cols = p.dim(1);
  for (std::size_t r = 0; r < p.dim(0); ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < cols; ++c) s += p[r * cols + c];
    if (!(std::abs(s - 1.0) <= kNormTolerance)) {
      throw Error(ErrorCode::kNotNormalized, std::string(what) + ": row " + std::to_string(r) + " sums to " +
                                                 std::to_string(s));
    }
  }
}

Var scalar(Graph& g, double v) { return g.constant(Tensor::scalar(v)); }

Var batch_mean_of_sum(Var rows) {
  const double b = static_cast<double>(rows.value().dim(0));
  return scale(sum(rows), 1.0 / b);
}

Tensor gaussian_kernel(std::size_t k) {
  const double sigma = 0.3 * ((static_cast<double>(k) - 1.0) * 0.5 - 1.0) + 0.8;
  const double c = (static_cast<double>(k) - 1.0) / 2.0;
  std::vector<double> w1(k);
  double total = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    const double d = static_cast<double>(i) - c;
    w1[i] = std::exp(-d * d / (2.0 * sigma * sigma));
    total += w1[i];
  }
  Tensor kernel(Shape{1, 1, k, k});
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < k; ++j) kernel[i * k + j] = w1[i] * w1[j] / (total * total);
  }
  return kernel;
}

}  // namespace

Var forward_kl(Var t, Var s) {
  t = as_rows(t);
  s = as_rows(s);
  if (t.value().shape() != s.value().shape()) {
    throw Error(ErrorCode::kShapeMismatch, "forward_kl: " + shape_string(t.value().shape()) + " vs " +
                                               shape_string(s.value().shape()));
  }
  check_normalized("forward_kl: teacher", t.value());
  check_normalized("forward_kl: student", s.value());
  return batch_mean_of_sum(mul(t, sub(log(t, kProbFloor), log(s, kProbFloor))));
}

std::string_view divergence_name(Divergence d) {
  switch (d) {
    case Divergence::kForwardKl: return "forward-kl";
    case Divergence::kReverseKl: return "reverse-kl";
    case Divergence::kJensenShannon: return "jensen-shannon";
  }
  return "unknown";
}

Divergence divergence_from_name(std::string_view name) {
  if (name == "forward-kl") return Divergence::kForwardKl;
  if (name == "reverse-kl") return Divergence::kReverseKl;
  if (name == "jensen-shannon") return Divergence::kJensenShannon;
  throw Error(ErrorCode::kInvalidConfig, "unknown divergence '" + std::string(name) + "'");
}

Var divergence(Var t, Var s, Divergence d) {
  switch (d) {
    case Divergence::kForwardKl: return forward_kl(t, s);
    case Divergence::kReverseKl: return forward_kl(s, t);
    case Divergence::kJensenShannon: {
      const Var m = scale(add(t, s), 0.5);
      return scale(add(forward_kl(t, m), forward_kl(s, m)), 0.5);
    }
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown divergence");
}

Var entropy(Var p) {
  p = as_rows(p);
  return scale(batch_mean_of_sum(mul(p, log(p, kProbFloor))), -1.0);
}

Var cross_entropy(Var logits, std::span<const std::size_t> labels) {
  return scale(mean(pick(log_softmax(logits, 1), labels)), -1.0);
}

Var attention_map(Var block) {
  const Shape& s = block.value().shape();
  if (s.size() != 4) {
    throw Error(ErrorCode::kShapeMismatch, "attention_map: expected [B,C,h,w], got " + shape_string(s));
  }
  const Var f = mean(square(block), 1);
  return normalize(reshape(f, Shape{s[0], s[2] * s[3]}), 1);
}

Var attention_term(Graph& graph, std::span<const Var> t_blocks, std::span<const Var> s_blocks) {
  if (t_blocks.size() != s_blocks.size()) {
    throw Error(ErrorCode::kInvalidArgument, "attention term: teacher has " + std::to_string(t_blocks.size()) +
                                                 " taps, student has " + std::to_string(s_blocks.size()));
  }
  Var total = scalar(graph, 0.0);
  for (std::size_t l = 0; l < t_blocks.size(); ++l) {
    const Var diff = sub(attention_map(t_blocks[l]), attention_map(s_blocks[l]));
    total = add(total, mean(l2_norm(diff, 1)));
  }
  return total;
}

Var student_loss(Var t_logits, Var s_logits, std::span<const Var> t_blocks, std::span<const Var> s_blocks,
                 double beta, Divergence d) {
  if (t_blocks.size() != s_blocks.size()) {
    throw Error(ErrorCode::kInvalidArgument, "student_loss: teacher has " + std::to_string(t_blocks.size()) +
                                                 " taps, student has " + std::to_string(s_blocks.size()));
  }
  if (!(beta >= 0.0)) throw Error(ErrorCode::kInvalidArgument, "student_loss: beta must be >= 0");
  const Var kl = divergence(softmax(t_logits, -1), softmax(s_logits, -1), d);
  if (beta == 0.0 || t_blocks.empty()) return kl;
  return add(kl, scale(attention_term(*t_logits.graph(), t_blocks, s_blocks), beta));
}

std::string_view extra_kind_name(ExtraKind k) {
  switch (k) {
    case ExtraKind::kTeacherEntropy: return "teacher-entropy";
    case ExtraKind::kStudentEntropy: return "student-entropy";
    case ExtraKind::kConsistency: return "consistency";
    case ExtraKind::kDiversity: return "diversity";
  }
  return "unknown";
}

ExtraKind extra_kind_from_name(std::string_view name) {
  for (ExtraKind k : {ExtraKind::kTeacherEntropy, ExtraKind::kStudentEntropy, ExtraKind::kConsistency,
                      ExtraKind::kDiversity}) {
    if (extra_kind_name(k) == name) return k;
  }
  throw Error(ErrorCode::kInvalidConfig, "unknown extra loss kind '" + std::string(name) + "'");
}

std::string_view augmentation_name(Augmentation a) {
  switch (a) {
    case Augmentation::kNone: return "none";
    case Augmentation::kGaussianNoise: return "gaussian-noise";
    case Augmentation::kGaussianBlur: return "gaussian-blur";
  }
  return "unknown";
}

Augmentation augmentation_from_name(std::string_view name) {
  for (Augmentation a : {Augmentation::kNone, Augmentation::kGaussianNoise, Augmentation::kGaussianBlur}) {
    if (augmentation_name(a) == name) return a;
  }
  throw Error(ErrorCode::kInvalidConfig, "unknown augmentation '" + std::string(name) + "'");
}

void validate_extra(const ExtraLossConfig& e) {
  const std::string what = "extra loss '" + std::string(extra_kind_name(e.kind)) + "': ";
  if (!std::isfinite(e.gamma)) throw Error(ErrorCode::kInvalidConfig, what + "gamma must be finite");
  if (e.sign != 1 && e.sign != -1) throw Error(ErrorCode::kInvalidConfig, what + "sign must be +1 or -1");
  const bool consistency = e.kind == ExtraKind::kConsistency;
  if (consistency != (e.augmentation != Augmentation::kNone)) {
    throw Error(ErrorCode::kInvalidConfig, what + "augmentation is required for consistency and only for it");
  }
  if (e.augmentation == Augmentation::kGaussianNoise && !(e.noise_sigma > 0.0)) {
    throw Error(ErrorCode::kInvalidConfig, what + "noise sigma must be positive");
  }
  if (e.augmentation == Augmentation::kGaussianBlur && (e.blur_kernel == 0 || e.blur_kernel % 2 == 0)) {
    throw Error(ErrorCode::kInvalidConfig, what + "blur kernel must be odd");
  }
}

Var augment(Var x, const ExtraLossConfig& e, Rng* rng) {
  Graph& g = *x.graph();
  const Shape& s = x.value().shape();
  switch (e.augmentation) {
    case Augmentation::kNone:
      return x;
    case Augmentation::kGaussianNoise: {
      if (!rng) throw Error(ErrorCode::kInvalidArgument, "gaussian-noise augmentation needs a random stream");
      return add(x, g.constant(normal_tensor(s, *rng, 0.0, e.noise_sigma)));
    }
    case Augmentation::kGaussianBlur: {
      if (s.size() != 4) {
        throw Error(ErrorCode::kShapeMismatch, "gaussian-blur: expected [B,C,h,w], got " + shape_string(s));
      }
      const Var planes = reshape(x, Shape{s[0] * s[1], 1, s[2], s[3]});
      const Var blurred = conv2d(planes, g.constant(gaussian_kernel(e.blur_kernel)), Var(), 1, e.blur_kernel / 2);
      return reshape(blurred, s);
    }
  }
  return x;
}

Var generator_loss(Var t_logits, Var s_logits, std::span<const ExtraLossConfig> extras,
                   const ExtraContext& ctx, Divergence d) {
  const Var t = softmax(t_logits, -1);
  Var loss = scale(divergence(t, softmax(s_logits, -1), d), -1.0);
  for (const ExtraLossConfig& e : extras) {
    validate_extra(e);
    Var term;
    switch (e.kind) {
      case ExtraKind::kTeacherEntropy:
        term = scale(entropy(t), e.gamma * e.sign);
        break;
      case ExtraKind::kStudentEntropy:
        term = scale(entropy(softmax(s_logits, -1)), e.gamma * e.sign);
        break;
      case ExtraKind::kConsistency: {
        if (!ctx.x.valid() || !ctx.teacher_logits) {
          throw Error(ErrorCode::kInvalidArgument, "consistency extra needs samples and the teacher");
        }
        const Var t_aug = softmax(ctx.teacher_logits(augment(ctx.x, e, ctx.rng)), -1);
        term = scale(forward_kl(t, t_aug), e.gamma);
        break;
      }
      case ExtraKind::kDiversity: {
        if (!ctx.teacher_penultimate.valid()) {
          throw Error(ErrorCode::kInvalidArgument, "diversity extra needs teacher penultimate features");
        }
        const Var phi = ctx.teacher_penultimate;
        term = scale(mean(matmul(phi, transpose(phi))), -e.gamma);
        break;
      }
    }
    loss = add(loss, term);
  }
  return loss;
}

Var kd_at_loss(Var t_logits, Var s_logits, std::span<const std::size_t> labels, std::span<const Var> t_blocks,
               std::span<const Var> s_blocks, double tau, double alpha, double beta) {
  if (!(tau > 0.0)) throw Error(ErrorCode::kInvalidArgument, "kd_at_loss: temperature must be > 0");
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw Error(ErrorCode::kInvalidArgument, "kd_at_loss: alpha must be in [0,1]");
  if (!(beta >= 0.0)) throw Error(ErrorCode::kInvalidArgument, "kd_at_loss: beta must be >= 0");
  Graph& g = *s_logits.graph();
  Var loss = scalar(g, 0.0);
  if (alpha > 0.0) {
    const Var kl = forward_kl(softmax(scale(t_logits, 1.0 / tau), -1), softmax(scale(s_logits, 1.0 / tau), -1));
    loss = add(loss, scale(kl, alpha * tau * tau));
  }
  if (alpha < 1.0) loss = add(loss, scale(cross_entropy(s_logits, labels), 1.0 - alpha));
  if (beta > 0.0) loss = add(loss, scale(attention_term(g, t_blocks, s_blocks), beta));
  return loss;
}

}  // namespace zskt
