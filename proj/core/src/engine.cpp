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

#include "zskt/engine.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>

#include "zskt/error.hpp"
#include "zskt/ops.hpp"

namespace zskt {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(double v) {
  if (std::isnan(v)) return "";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<Tensor> grads_of(const Gradients& g, const std::vector<Var>& vars) {
  std::vector<Tensor> out;
  out.reserve(vars.size());
  for (const Var& v : vars) out.push_back(g[v]);
  return out;
}

std::vector<Var> externals(Graph& g, const std::vector<Tensor>& values) {
  std::vector<Var> out;
  for (const Tensor& t : values) out.push_back(g.external(t, false));
  return out;
}

std::vector<Tensor> values_of(const std::vector<Var>& vars) {
  std::vector<Tensor> out;
  for (const Var& v : vars) out.push_back(v.value());
  return out;
}

// Mean over rows of the largest softmax probability.
double mean_max_prob(const Tensor& logits) {
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

std::vector<std::size_t> class_histogram(const Tensor& logits) {
  std::vector<std::size_t> hist(logits.dim(1), 0);
  for (std::size_t c : argmax_rows(logits)) ++hist[c];
  return hist;
}

void check_loss(double v, std::string_view what, std::size_t iter) {
  if (!std::isfinite(v)) {
    throw Error(ErrorCode::kNanLoss, std::string(what) + " is not finite at iteration " + std::to_string(iter));
  }
}

// Non-finite logits would otherwise surface as a normalization error.
void check_logits(const Var& t, const Var& s, std::string_view what, std::size_t iter) {
  if (!t.value().all_finite() || !s.value().all_finite()) {
    throw Error(ErrorCode::kNanLoss, std::string(what) + " inputs are not finite at iteration " + std::to_string(iter));
  }
}

void check_pair(const Network& teacher, const NetSpec& student_spec) {
  if (teacher.spec().classes != student_spec.classes) {
    throw Error(ErrorCode::kClassMismatch, "teacher has " + std::to_string(teacher.spec().classes) +
                                               " classes, student spec has " + std::to_string(student_spec.classes));
  }
}

double lr_at(const ZeroShotConfig& cfg, double eta0, std::size_t iter, std::size_t step, std::size_t per_iter) {
  if (cfg.schedule_unit == ScheduleUnit::kOuterIteration) {
    return cosine_lr(static_cast<double>(iter), static_cast<double>(cfg.iterations), eta0);
  }
  return cosine_lr(static_cast<double>(step), static_cast<double>(cfg.iterations * per_iter), eta0);
}

std::uint64_t digest_of(const Tensor& t) { return tensor_digest(t); }

// Student phase shared by the generator and direct-point modes. Returns the
// last loss; fills the record's student fields.
double student_phase(Network& student, OptState& state, const Tensor& xp, const Tensor& t_logits,
                     const std::vector<Tensor>& t_blocks, const ZeroShotConfig& cfg, std::size_t iter,
                     std::size_t& updates, TelemetryRecord& rec, const std::function<std::uint64_t()>& adversary,
                     const StepObserver& observer) {
  std::vector<Tensor*> views = parameter_views(student);
  const bool use_at = cfg.beta > 0.0;
  double loss_s = 0.0;
  for (std::size_t k = 0; k < cfg.student_steps; ++k) {
    Graph g;
    const std::vector<Var> params = student.bind(g, true);
    const Var x = g.external(xp, false);
    const ForwardVars sf = student.forward(g, x, params, ForwardOptions{.train = true, .update_running = true});
    const Var tl = g.external(t_logits, false);
    const std::vector<Var> tb = use_at ? externals(g, t_blocks) : std::vector<Var>{};
    const std::vector<Var> sb = use_at ? sf.blocks : std::vector<Var>{};
    check_logits(tl, sf.output, "student loss", iter);
    const Var loss = student_loss(tl, sf.output, tb, sb, cfg.beta, cfg.divergence);
    loss_s = loss.value().item();
    check_loss(loss_s, "student loss", iter);
    if (k == 0) {
      rec.first_student_kl = divergence(softmax(tl, -1), softmax(sf.output, -1), cfg.divergence).value().item();
    }
    if (k + 1 == cfg.student_steps) rec.s_maxprob = mean_max_prob(sf.output.value());
    const Gradients grads = g.backward(loss);
    const double lr = lr_at(cfg, cfg.lr, iter, updates, cfg.student_steps);
    adam_step(views, grads_of(grads, params), state, lr);
    ++updates;
    if (observer) observer(Phase::kStudent, adversary(), student.state_digest());
  }
  return loss_s;
}

}  // namespace

void validate(const ZeroShotConfig& c) {
  auto bad = [](const std::string& m) { throw Error(ErrorCode::kInvalidConfig, "zero-shot config: " + m); };
  if (c.iterations < 1) bad("iterations must be >= 1");
  if (c.generator_steps < 1) bad("generator_steps must be >= 1");
  if (c.student_steps < 1) bad("student_steps must be >= 1");
  if (c.z_dim < 1) bad("z_dim must be >= 1");
  if (c.batch < 1) bad("batch must be >= 1");
  if (!(c.beta >= 0.0) || !std::isfinite(c.beta)) bad("beta must be finite and >= 0");
  if (!(c.lr > 0.0) || !std::isfinite(c.lr)) bad("lr must be finite and > 0");
  for (const ExtraLossConfig& e : c.extras) validate_extra(e);
}

std::string Telemetry::csv() const {
  std::ostringstream out;
  out << "iter,L_G,L_S,t_maxprob,s_maxprob,lr";
  for (std::size_t c = 0; c < classes; ++c) out << ",class_" << c;
  out << '\n';
  for (const TelemetryRecord& r : records) {
    out << r.iter << ',' << fmt(r.loss_g) << ',' << fmt(r.loss_s) << ',' << fmt(r.t_maxprob) << ','
        << fmt(r.s_maxprob) << ',' << fmt(r.lr);
    for (std::size_t c = 0; c < classes; ++c) out << ',' << (c < r.class_hist.size() ? r.class_hist[c] : 0);
    out << '\n';
  }
  return out.str();
}

void Telemetry::write_csv(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIo, "cannot write '" + path + "'");
  out << csv();
}

ZeroShotResult run_zero_shot(Network& teacher, const NetSpec& student_spec, const NetSpec& gen_spec,
                             const ZeroShotConfig& cfg, const StepObserver& observer) {
  validate(cfg);
  check_pair(teacher, student_spec);
  if (gen_spec.kind != NetKind::kGenerator) throw Error(ErrorCode::kInvalidSpec, "run_zero_shot: not a generator spec");
  if (gen_spec.z_dim != cfg.z_dim) {
    throw Error(ErrorCode::kInvalidConfig, "run_zero_shot: generator z_dim " + std::to_string(gen_spec.z_dim) +
                                               " differs from config z_dim " + std::to_string(cfg.z_dim));
  }
  if (gen_spec.output_shape != teacher.spec().input_shape) {
    throw Error(ErrorCode::kShapeMismatch, "run_zero_shot: generator emits " + shape_string(gen_spec.output_shape) +
                                               ", teacher expects " + shape_string(teacher.spec().input_shape));
  }
  ZeroShotResult r;
  r.student = build_classifier(student_spec, derive_seed(cfg.seed, 1));
  r.generator = build_generator(gen_spec, derive_seed(cfg.seed, 2));
  r.telemetry.classes = student_spec.classes;
  Rng z_rng(derive_seed(cfg.seed, 3));
  Rng aug_rng(derive_seed(cfg.seed, 4));
  OptState g_state, s_state;
  std::vector<Tensor*> g_views = parameter_views(r.generator);
  const bool use_at = cfg.beta > 0.0;
  const auto start = Clock::now();
  auto gen_digest = [&r] { return r.generator.state_digest(); };

  for (std::size_t it = 0; it < cfg.iterations; ++it) {
    TelemetryRecord rec;
    rec.iter = it;
    rec.lr = cosine_lr(static_cast<double>(it), static_cast<double>(cfg.iterations), cfg.lr);
    Tensor z = normal_tensor(Shape{cfg.batch, cfg.z_dim}, z_rng);
    Tensor xp, t_logits;
    std::vector<Tensor> t_blocks;
    for (std::size_t k = 0; k < cfg.generator_steps; ++k) {
      if (k > 0 && cfg.resample_z) z = normal_tensor(Shape{cfg.batch, cfg.z_dim}, z_rng);
      Graph g;
      const std::vector<Var> gp = r.generator.bind(g, true);
      const Var x = r.generator.forward(g, g.external(z, false), gp, ForwardOptions{.train = true}).output;
      const std::vector<Var> tp = teacher.bind(g, false);
      const ForwardVars tf = teacher.forward(g, x, tp, ForwardOptions{});
      const std::vector<Var> sp = r.student.bind(g, false);
      const ForwardVars sf =
          r.student.forward(g, x, sp, ForwardOptions{.train = true, .update_running = false});
      ExtraContext ctx;
      ctx.x = x;
      ctx.teacher_penultimate = tf.penultimate;
      ctx.teacher_logits = [&](Var a) { return teacher.forward(g, a, tp, ForwardOptions{}).output; };
      ctx.rng = &aug_rng;
      check_logits(tf.output, sf.output, "generator loss", it);
      const Var loss = generator_loss(tf.output, sf.output, cfg.extras, ctx, cfg.divergence);
      rec.loss_g = loss.value().item();
      check_loss(rec.loss_g, "generator loss", it);
      const Gradients grads = g.backward(loss);
      const double lr = lr_at(cfg, cfg.lr, it, r.generator_updates, cfg.generator_steps);
      adam_step(g_views, grads_of(grads, gp), g_state, lr);
      ++r.generator_updates;
      if (observer) observer(Phase::kGenerator, r.generator.state_digest(), r.student.state_digest());
      if (k + 1 == cfg.generator_steps) {
        xp = x.value();
        t_logits = tf.output.value();
        if (use_at) t_blocks = values_of(tf.blocks);
      }
    }
    rec.t_maxprob = mean_max_prob(t_logits);
    rec.class_hist = class_histogram(t_logits);
    rec.loss_s = student_phase(r.student, s_state, xp, t_logits, t_blocks, cfg, it, r.student_updates, rec,
                               gen_digest, observer);
    rec.wall_seconds = seconds_since(start);
    r.telemetry.records.push_back(std::move(rec));
  }
  return r;
}

ToyConfig default_toy_config() {
  ToyConfig c;
  c.zs.iterations = 400;
  c.zs.batch = 128;
  c.zs.beta = 0.0;
  return c;
}

BoundingBox bounding_box(const Dataset& ds) {
  if (ds.inputs.rank() != 2 || ds.inputs.dim(1) != 2 || ds.size() == 0) {
    throw Error(ErrorCode::kShapeMismatch, "bounding_box: expected non-empty [n,2] inputs");
  }
  BoundingBox b{ds.inputs[0], ds.inputs[0], ds.inputs[1], ds.inputs[1]};
  for (std::size_t i = 0; i < ds.size(); ++i) {
    b.x_min = std::min(b.x_min, ds.inputs[2 * i]);
    b.x_max = std::max(b.x_max, ds.inputs[2 * i]);
    b.y_min = std::min(b.y_min, ds.inputs[2 * i + 1]);
    b.y_max = std::max(b.y_max, ds.inputs[2 * i + 1]);
  }
  return b;
}

ToyResult run_toy_direct(Network& teacher, const NetSpec& student_spec, const BoundingBox& box,
                         const ToyConfig& cfg, const Network* student_init, const StepObserver& observer) {
  validate(cfg.zs);
  check_pair(teacher, student_spec);
  if (teacher.spec().input_shape != Shape{2}) {
    throw Error(ErrorCode::kShapeMismatch, "run_toy_direct: teacher must take 2-d inputs, got " +
                                               shape_string(teacher.spec().input_shape));
  }
  if (cfg.points < 1) throw Error(ErrorCode::kInvalidConfig, "run_toy_direct: need at least one point");
  if (!(cfg.ring_inner > 0.0 && cfg.ring_inner <= cfg.ring_outer)) {
    throw Error(ErrorCode::kInvalidConfig, "run_toy_direct: need 0 < ring_inner <= ring_outer");
  }
  const ZeroShotConfig& zs = cfg.zs;
  ToyResult r;
  r.student = student_init ? *student_init : build_classifier(student_spec, derive_seed(zs.seed, 1));
  r.telemetry.classes = student_spec.classes;

  Rng rng(derive_seed(zs.seed, 6));
  const double cx = 0.5 * (box.x_min + box.x_max), cy = 0.5 * (box.y_min + box.y_max);
  const double half_diag = 0.5 * std::hypot(box.x_max - box.x_min, box.y_max - box.y_min);
  std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
  std::uniform_real_distribution<double> radius(cfg.ring_inner * half_diag, cfg.ring_outer * half_diag);
  Tensor points(Shape{cfg.points, 2});
  for (std::size_t i = 0; i < cfg.points; ++i) {
    const double a = angle(rng), rad = radius(rng);
    points[2 * i] = cx + rad * std::cos(a);
    points[2 * i + 1] = cy + rad * std::sin(a);
  }
  r.trajectory.push_back({0, 0, points});

  OptState p_state, s_state;
  Tensor* p_view = &points;
  std::size_t p_updates = 0, s_updates = 0;
  Rng aug_rng(derive_seed(zs.seed, 4));
  const bool use_at = zs.beta > 0.0;
  const auto start = Clock::now();
  auto point_digest = [&points] { return digest_of(points); };

  for (std::size_t it = 0; it < zs.iterations; ++it) {
    TelemetryRecord rec;
    rec.iter = it;
    rec.lr = cosine_lr(static_cast<double>(it), static_cast<double>(zs.iterations), zs.lr);
    Tensor xp, t_logits;
    std::vector<Tensor> t_blocks;
    for (std::size_t k = 0; k < zs.generator_steps; ++k) {
      Graph g;
      const Var x = g.external(points, true);
      const std::vector<Var> tp = teacher.bind(g, false);
      const ForwardVars tf = teacher.forward(g, x, tp, ForwardOptions{});
      const std::vector<Var> sp = r.student.bind(g, false);
      const ForwardVars sf =
          r.student.forward(g, x, sp, ForwardOptions{.train = true, .update_running = false});
      ExtraContext ctx;
      ctx.x = x;
      ctx.teacher_penultimate = tf.penultimate;
      ctx.teacher_logits = [&](Var a) { return teacher.forward(g, a, tp, ForwardOptions{}).output; };
      ctx.rng = &aug_rng;
      check_logits(tf.output, sf.output, "generator loss", it);
      const Var loss = generator_loss(tf.output, sf.output, zs.extras, ctx, zs.divergence);
      rec.loss_g = loss.value().item();
      check_loss(rec.loss_g, "generator loss", it);
      if (k + 1 == zs.generator_steps) {
        xp = points;
        t_logits = tf.output.value();
        if (use_at) t_blocks = values_of(tf.blocks);
      }
      const Gradients grads = g.backward(loss);
      const double lr = lr_at(zs, cfg.point_lr, it, p_updates, zs.generator_steps);
      const std::vector<Tensor> pg{grads[x]};
      adam_step(std::span<Tensor* const>(&p_view, 1), pg, p_state, lr);
      ++p_updates;
      if (observer) observer(Phase::kGenerator, digest_of(points), r.student.state_digest());
    }
    rec.t_maxprob = mean_max_prob(t_logits);
    rec.class_hist = class_histogram(t_logits);
    rec.loss_s = student_phase(r.student, s_state, xp, t_logits, t_blocks, zs, it, s_updates, rec, point_digest,
                               observer);
    rec.wall_seconds = seconds_since(start);
    r.telemetry.records.push_back(std::move(rec));
    const bool last = it + 1 == zs.iterations;
    if (last || (cfg.snapshot_every > 0 && (it + 1) % cfg.snapshot_every == 0)) {
      r.trajectory.push_back({r.trajectory.size(), it + 1, points});
    }
  }
  return r;
}

void write_trajectory_csv(const std::vector<Snapshot>& trajectory, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIo, "cannot write '" + path + "'");
  out << "snapshot,point_id,x,y\n";
  for (const Snapshot& s : trajectory) {
    for (std::size_t i = 0; i < s.points.dim(0); ++i) {
      out << s.index << ',' << i << ',' << fmt(s.points[2 * i]) << ',' << fmt(s.points[2 * i + 1]) << '\n';
    }
  }
}

double grid_agreement(Network& a, Network& b, const BoundingBox& box, std::size_t res) {
  if (res < 2) throw Error(ErrorCode::kInvalidArgument, "grid_agreement: resolution must be >= 2");
  Tensor grid(Shape{res * res, 2});
  for (std::size_t i = 0; i < res; ++i) {
    for (std::size_t j = 0; j < res; ++j) {
      grid[2 * (i * res + j)] = box.x_min + (box.x_max - box.x_min) * static_cast<double>(j) / static_cast<double>(res - 1);
      grid[2 * (i * res + j) + 1] = box.y_min + (box.y_max - box.y_min) * static_cast<double>(i) / static_cast<double>(res - 1);
    }
  }
  const std::vector<std::size_t> pa = argmax_rows(a.predict(grid, 4096));
  const std::vector<std::size_t> pb = argmax_rows(b.predict(grid, 4096));
  std::size_t same = 0;
  for (std::size_t i = 0; i < pa.size(); ++i) same += pa[i] == pb[i];
  return static_cast<double>(same) / static_cast<double>(pa.size());
}

std::string_view noise_kind_name(NoiseKind k) {
  return k == NoiseKind::kGaussian ? "gaussian" : "uniform-pixel";
}

NoiseKind noise_kind_from_name(std::string_view name) {
  if (name == "gaussian") return NoiseKind::kGaussian;
  if (name == "uniform-pixel") return NoiseKind::kUniformPixel;
  throw Error(ErrorCode::kInvalidConfig, "unknown noise kind '" + std::string(name) + "'");
}

Tensor sample_noise(NoiseKind kind, const Shape& sample_shape, std::size_t n, const NormStats& stats, Rng& rng) {
  Shape s{n};
  s.insert(s.end(), sample_shape.begin(), sample_shape.end());
  if (kind == NoiseKind::kGaussian) return normal_tensor(s, rng);
  Tensor out(s);
  const std::size_t channels = sample_shape.empty() ? 1 : sample_shape[0];
  const std::size_t inner = channels ? shape_size(sample_shape) / channels : 0;
  std::uniform_int_distribution<int> pixel(0, 255);
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double v = static_cast<double>(pixel(rng)) / 255.0;
    const std::size_t c = inner ? (i / inner) % channels : 0;
    out[i] = stats.mean.empty() ? v : normalized_value(stats, c, v);
  }
  return out;
}

NoiseMatchResult match_on_noise(Network& teacher, const NetSpec& student_spec, const NormStats& stats,
                                const NoiseMatchConfig& cfg) {
  check_pair(teacher, student_spec);
  if (cfg.batch < 1 || !(cfg.lr > 0.0)) throw Error(ErrorCode::kInvalidConfig, "match_on_noise: bad batch or lr");
  NoiseMatchResult r;
  r.student = build_classifier(student_spec, derive_seed(cfg.seed, 1));
  r.telemetry.classes = student_spec.classes;
  Rng rng(derive_seed(cfg.seed, 5));
  OptState state;
  std::vector<Tensor*> views = parameter_views(r.student);
  for (std::size_t step = 0; step < cfg.steps; ++step) {
    const Tensor x = sample_noise(cfg.noise, teacher.spec().input_shape, cfg.batch, stats, rng);
    Graph g;
    const Var xv = g.external(x, false);
    const std::vector<Var> tp = teacher.bind(g, false);
    const Var tl = teacher.forward(g, xv, tp, ForwardOptions{}).output;
    const std::vector<Var> sp = r.student.bind(g, true);
    const Var sl = r.student.forward(g, xv, sp, ForwardOptions{.train = true}).output;
    check_logits(tl, sl, "noise-matching loss", step);
    const Var loss = student_loss(tl, sl, {}, {}, 0.0);
    const double lr = cosine_lr(static_cast<double>(step), static_cast<double>(cfg.steps), cfg.lr);
    check_loss(loss.value().item(), "noise-matching loss", step);
    if (cfg.log_every > 0 && (step % cfg.log_every == 0 || step + 1 == cfg.steps)) {
      TelemetryRecord rec;
      rec.iter = step;
      rec.loss_g = std::numeric_limits<double>::quiet_NaN();
      rec.loss_s = loss.value().item();
      rec.t_maxprob = mean_max_prob(tl.value());
      rec.s_maxprob = mean_max_prob(sl.value());
      rec.lr = lr;
      rec.class_hist = class_histogram(tl.value());
      r.telemetry.records.push_back(std::move(rec));
    }
    const Gradients grads = g.backward(loss);
    adam_step(views, grads_of(grads, sp), state, lr);
  }
  return r;
}

Tensor sample_generator(Network& generator, std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  return generator.predict(normal_tensor(Shape{n, generator.spec().z_dim}, rng));
}

}  // namespace zskt
