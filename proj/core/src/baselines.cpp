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

#include "zskt/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "zskt/error.hpp"
#include "zskt/losses.hpp"
#include "zskt/ops.hpp"

namespace zskt {
namespace {

// Endless stream of shuffled passes over [0, n).
class BatchStream {
 public:
  BatchStream(std::size_t n, std::size_t batch, std::uint64_t seed)
      : order_(n), batch_(std::min(batch, n)), rng_(seed) {
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    reshuffle();
  }

  std::vector<std::size_t> next() {
    std::vector<std::size_t> idx;
    idx.reserve(batch_);
    while (idx.size() < batch_) {
      if (pos_ == order_.size()) reshuffle();
      idx.push_back(order_[pos_++]);
    }
    return idx;
  }

 private:
  void reshuffle() {
    std::shuffle(order_.begin(), order_.end(), rng_);
    pos_ = 0;
  }

  std::vector<std::size_t> order_;
  std::size_t batch_;
  std::size_t pos_ = 0;
  Rng rng_;
};

double agreement(Network& a, Network& b, const Tensor& x) {
  const auto pa = argmax_rows(a.predict(x));
  const auto pb = argmax_rows(b.predict(x));
  std::size_t same = 0;
  for (std::size_t i = 0; i < pa.size(); ++i) same += pa[i] == pb[i];
  return pa.empty() ? 0.0 : static_cast<double>(same) / static_cast<double>(pa.size());
}

double max_prob_mean(const Tensor& logits) {
  const std::size_t rows = logits.dim(0), cols = logits.dim(1);
  double total = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    const double* l = logits.data() + r * cols;
    double mx = l[0];
    for (std::size_t c = 1; c < cols; ++c) mx = std::max(mx, l[c]);
    double s = 0.0;
    for (std::size_t c = 0; c < cols; ++c) s += std::exp(l[c] - mx);
    total += 1.0 / s;
  }
  return rows ? total / static_cast<double>(rows) : 0.0;
}

// Shared loop: cross-entropy when teacher is null, kd_at otherwise.
TrainResult train_loop(Network net, Network* teacher, const Dataset& train, const Dataset* test,
                       const KdConfig* kd, const BaselineConfig& cfg) {
  if (train.size() == 0) throw Error(ErrorCode::kEmptyDataset, "training set is empty");
  for (std::size_t l : train.labels) {
    if (l >= net.spec().classes) {
      throw Error(ErrorCode::kInvalidArgument, "label " + std::to_string(l) + " out of range for " +
                                                   std::to_string(net.spec().classes) + " classes");
    }
  }
  if (cfg.batch < 1) throw Error(ErrorCode::kInvalidConfig, "batch must be >= 1");
  if (!(cfg.lr >= 0.0)) throw Error(ErrorCode::kInvalidConfig, "lr must be >= 0");
  TrainResult r;
  r.train_size = train.size();
  r.steps = cfg.iterations;
  r.epochs = epochs_for(train.size(), cfg.batch, cfg.iterations);
  r.telemetry.classes = net.spec().classes;
  if (teacher) r.agreement_before = agreement(*teacher, net, train.inputs);

  BatchStream stream(train.size(), cfg.batch, derive_seed(cfg.seed, 7));
  Rng aug_rng(derive_seed(cfg.seed, 8));
  OptState state;
  std::vector<Tensor*> views = parameter_views(net);
  const bool use_at = kd && kd->beta > 0.0;
  for (std::size_t step = 0; step < cfg.iterations; ++step) {
    const std::vector<std::size_t> idx = stream.next();
    Tensor x = train.gather(idx);
    if (cfg.shift > 0 && x.rank() == 4) {
      x = shift_images(x, cfg.shift, train.normalized ? &train.stats : nullptr, aug_rng);
    }
    const std::vector<std::size_t> labels = train.gather_labels(idx);
    Graph g;
    const Var xv = g.external(x, false);
    const std::vector<Var> params = net.bind(g, true);
    const ForwardVars sf = net.forward(g, xv, params, ForwardOptions{.train = true});
    Var loss;
    Tensor t_logits;
    if (teacher) {
      const std::vector<Var> tp = teacher->bind(g, false);
      const ForwardVars tf = teacher->forward(g, xv, tp, ForwardOptions{});
      t_logits = tf.output.value();
      loss = kd_at_loss(tf.output, sf.output, labels, use_at ? tf.blocks : std::vector<Var>{},
                        use_at ? sf.blocks : std::vector<Var>{}, kd->tau, kd->alpha, kd->beta);
    } else {
      loss = cross_entropy(sf.output, labels);
    }
    const double value = loss.value().item();
    if (!std::isfinite(value)) {
      throw Error(ErrorCode::kNanLoss, "training loss is not finite at step " + std::to_string(step));
    }
    const double lr = schedule_lr(cfg.schedule, static_cast<double>(step), static_cast<double>(cfg.iterations), cfg.lr);
    if (cfg.log_every > 0 && (step % cfg.log_every == 0 || step + 1 == cfg.iterations)) {
      TelemetryRecord rec;
      rec.iter = step;
      rec.loss_g = std::numeric_limits<double>::quiet_NaN();
      rec.loss_s = value;
      rec.t_maxprob = teacher ? max_prob_mean(t_logits) : std::numeric_limits<double>::quiet_NaN();
      rec.s_maxprob = max_prob_mean(sf.output.value());
      rec.lr = lr;
      rec.class_hist.assign(net.spec().classes, 0);
      for (std::size_t c : argmax_rows(teacher ? t_logits : sf.output.value())) ++rec.class_hist[c];
      r.telemetry.records.push_back(std::move(rec));
    }
    const Gradients grads = g.backward(loss);
    std::vector<Tensor> gv;
    gv.reserve(params.size());
    for (const Var& p : params) gv.push_back(grads[p]);
    if (cfg.use_adam) {
      adam_step(views, gv, state, lr, cfg.adam);
    } else {
      sgd_momentum_step(views, gv, state, lr, cfg.sgd);
    }
  }
  r.train_accuracy = accuracy(net.predict(train.inputs), train.labels);
  r.test_accuracy = test ? accuracy(net.predict(test->inputs), test->labels) : std::numeric_limits<double>::quiet_NaN();
  if (teacher) r.agreement_after = agreement(*teacher, net, train.inputs);
  r.net = std::move(net);
  return r;
}

Dataset select(const Dataset& train, const FewShotConfig& few) {
  return few.m == 0 ? train : few_shot_subset(train, few.m, few.seed);
}

}  // namespace

BaselineConfig finetune_defaults() {
  BaselineConfig c;
  c.lr = 2e-3;
  c.schedule = Schedule::kCosine;
  c.use_adam = true;
  return c;
}

std::size_t epochs_for(std::size_t n, std::size_t batch, std::size_t iterations) {
  if (n == 0) return 0;
  const std::size_t per_epoch = (n + std::min(batch, n) - 1) / std::min(batch, n);
  return (iterations + per_epoch - 1) / per_epoch;
}

TrainResult train_scratch(const NetSpec& spec, const Dataset& train, const Dataset* test, const BaselineConfig& cfg) {
  return train_loop(build_classifier(spec, derive_seed(cfg.seed, 1)), nullptr, train, test, nullptr, cfg);
}

TrainResult distill_kd_at(Network& teacher, const NetSpec& student_spec, const Dataset& train, const Dataset* test,
                          const FewShotConfig& few, const KdConfig& kd, const BaselineConfig& cfg) {
  if (teacher.spec().classes != student_spec.classes) {
    throw Error(ErrorCode::kClassMismatch, "distill_kd_at: teacher and student class counts differ");
  }
  return train_loop(build_classifier(student_spec, derive_seed(cfg.seed, 1)), &teacher, select(train, few), test, &kd,
                    cfg);
}

TrainResult finetune_few_shot(const Network& student, Network& teacher, const Dataset& train, const Dataset* test,
                              const FewShotConfig& few, const KdConfig& kd, const BaselineConfig& cfg) {
  if (teacher.spec().classes != student.spec().classes) {
    throw Error(ErrorCode::kClassMismatch, "finetune_few_shot: teacher and student class counts differ");
  }
  if (few.m == 0) throw Error(ErrorCode::kInvalidConfig, "finetune_few_shot: M must be >= 1");
  return train_loop(student, &teacher, select(train, few), test, &kd, cfg);
}

Tensor shift_images(const Tensor& batch, std::size_t max_shift, const NormStats* stats, Rng& rng) {
  if (batch.rank() != 4) throw Error(ErrorCode::kShapeMismatch, "shift_images: expected [B,C,H,W]");
  const std::size_t b = batch.dim(0), c = batch.dim(1), h = batch.dim(2), w = batch.dim(3);
  const auto m = static_cast<long>(max_shift);
  std::uniform_int_distribution<long> d(-m, m);
  Tensor out(batch.shape());
  for (std::size_t i = 0; i < b; ++i) {
    const long dy = d(rng), dx = d(rng);
    for (std::size_t ch = 0; ch < c; ++ch) {
      const double fill = stats && !stats->mean.empty() ? normalized_value(*stats, ch, 0.0) : 0.0;
      const double* src = batch.data() + (i * c + ch) * h * w;
      double* dst = out.data() + (i * c + ch) * h * w;
      for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
          const long sy = static_cast<long>(y) - dy, sx = static_cast<long>(x) - dx;
          const bool in = sy >= 0 && sy < static_cast<long>(h) && sx >= 0 && sx < static_cast<long>(w);
          dst[y * w + x] = in ? src[static_cast<std::size_t>(sy) * w + static_cast<std::size_t>(sx)] : fill;
        }
      }
    }
  }
  return out;
}

}  // namespace zskt
