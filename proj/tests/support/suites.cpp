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

#include "suites.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <string>

#include "zskt/losses.hpp"
#include "zskt/ops.hpp"

namespace zskt::testing {
namespace {

// Contract y against fixed random weights so the check sees the whole
// Jacobian rather than only its column sums.
Var contract(Graph& g, Var y, std::uint64_t seed) {
  Rng r(seed);
  Tensor w = normal_tensor(y.shape(), r);
  return sum(mul(y, g.constant(std::move(w))));
}

Tensor away_from_zero(Shape shape, Rng& rng) {
  Tensor t = uniform_tensor(std::move(shape), rng, -1.0, 1.0);
  for (double& v : t.values()) v = std::copysign(0.1 + std::abs(v), v);
  return t;
}

std::uint64_t next_seed(Rng& rng) { return rng(); }

// Smallest |pre-activation| accepted in network cases that pass through ReLU.
constexpr double kKinkMargin = 5e-3;

// Unary case: fn(x) = <op(x), W>.
GradCase unary_case(std::string name, Shape shape, std::function<Var(Var)> op,
                    double lo = -1.0, double hi = 1.0) {
  return {std::move(name), [shape, op, lo, hi](Rng& rng) {
            std::uint64_t s = next_seed(rng);
            Tensor p = uniform_tensor(shape, rng, lo, hi);
            ScalarFn fn = [op, s](Graph& g, Var x) { return contract(g, op(x), s); };
            return GradInstance{fn, p};
          }};
}

// Binary case differentiated w.r.t. one operand; the other is a constant.
GradCase binary_case(std::string name, Shape xs, Shape cs, bool x_first, std::function<Var(Var, Var)> op,
                     double clo = -1.0, double chi = 1.0, double xlo = -1.0, double xhi = 1.0) {
  return {std::move(name), [=](Rng& rng) {
            std::uint64_t s = next_seed(rng);
            Tensor c = uniform_tensor(cs, rng, clo, chi);
            Tensor p = uniform_tensor(xs, rng, xlo, xhi);
            ScalarFn fn = [op, c, s, x_first](Graph& g, Var x) {
              Var k = g.constant(c);
              return contract(g, x_first ? op(x, k) : op(k, x), s);
            };
            return GradInstance{fn, p};
          }};
}

GradCase batchnorm_case(std::string name, Shape shape, int wrt, bool train) {
  return {std::move(name), [=](Rng& rng) {
            std::uint64_t s = next_seed(rng);
            const std::size_t c = shape[1];
            Tensor x = normal_tensor(shape, rng);
            Tensor gamma = uniform_tensor({c}, rng, 0.5, 1.5);
            Tensor beta = uniform_tensor({c}, rng, -0.5, 0.5);
            Tensor rm = uniform_tensor({c}, rng, -0.2, 0.2);
            Tensor rv = uniform_tensor({c}, rng, 0.5, 1.5);
            Tensor point = wrt == 0 ? x : (wrt == 1 ? gamma : beta);
            ScalarFn fn = [=](Graph& g, Var v) {
              Var xv = wrt == 0 ? v : g.constant(x);
              Var gv = wrt == 1 ? v : g.constant(gamma);
              Var bv = wrt == 2 ? v : g.constant(beta);
              BatchNormAttrs attrs;
              attrs.train = train;
              attrs.update_running = false;
              // Eval reads the running buffers; copies keep the lambda pure.
              auto mean_copy = std::make_shared<Tensor>(rm);
              auto var_copy = std::make_shared<Tensor>(rv);
              attrs.running_mean = mean_copy.get();
              attrs.running_var = var_copy.get();
              Var y = batchnorm(xv, gv, bv, attrs);
              return contract(g, y, s);
            };
            return GradInstance{fn, point};
          }};
}

GradCase conv_case(std::string name, int wrt, std::size_t k, std::size_t stride, std::size_t pad) {
  return {std::move(name), [=](Rng& rng) {
            std::uint64_t s = next_seed(rng);
            Tensor x = uniform_tensor({2, 3, 5, 5}, rng, -1.0, 1.0);
            Tensor w = uniform_tensor({4, 3, k, k}, rng, -0.5, 0.5);
            Tensor b = uniform_tensor({4}, rng, -0.5, 0.5);
            Tensor point = wrt == 0 ? x : (wrt == 1 ? w : b);
            ScalarFn fn = [=](Graph& g, Var v) {
              Var xv = wrt == 0 ? v : g.constant(x);
              Var wv = wrt == 1 ? v : g.constant(w);
              Var bv = wrt == 2 ? v : g.constant(b);
              return contract(g, conv2d(xv, wv, bv, stride, pad), s);
            };
            return GradInstance{fn, point};
          }};
}

Tensor random_probs(std::size_t rows, std::size_t cols, Rng& rng) {
  Tensor t = uniform_tensor({rows, cols}, rng, 0.05, 1.0);
  for (std::size_t r = 0; r < rows; ++r) {
    double z = 0.0;
    for (std::size_t c = 0; c < cols; ++c) z += t[r * cols + c];
    for (std::size_t c = 0; c < cols; ++c) t[r * cols + c] /= z;
  }
  return t;
}

// Tiny teacher/student pair over [B,1,6,6] images for the generator extras.
struct TinyPair {
  Tensor wt;  // [36, 5]
  Tensor ws;  // [36, 5]
  Tensor wp;  // [36, 4]
};

Var flat(Var x) { return reshape(x, {x.shape()[0], shape_size(x.shape()) / x.shape()[0]}); }

GradCase extra_case(std::string name, ExtraLossConfig extra) {
  return {std::move(name), [extra](Rng& rng) {
            TinyPair tp{uniform_tensor({36, 5}, rng, -0.5, 0.5), uniform_tensor({36, 5}, rng, -0.5, 0.5),
                        uniform_tensor({36, 4}, rng, -0.5, 0.5)};
            Tensor x = uniform_tensor({3, 1, 6, 6}, rng, -1.0, 1.0);
            std::uint64_t noise_seed = next_seed(rng);
            ScalarFn fn = [tp, extra, noise_seed](Graph& g, Var v) {
              Var wt = g.constant(tp.wt);
              Var ws = g.constant(tp.ws);
              Var wp = g.constant(tp.wp);
              auto teacher = [wt](Var a) { return matmul(flat(a), wt); };
              Rng noise(noise_seed);
              ExtraContext ctx;
              ctx.x = v;
              ctx.teacher_penultimate = tanh(matmul(flat(v), wp));
              ctx.teacher_logits = teacher;
              ctx.rng = &noise;
              std::vector<ExtraLossConfig> extras{extra};
              return generator_loss(teacher(v), matmul(flat(v), ws), extras, ctx);
            };
            return GradInstance{fn, x};
          }};
}

}  // namespace

std::vector<GradCase> op_cases() {
  std::vector<GradCase> c;
  auto add_op = [](Var a, Var b) { return add(a, b); };
  auto sub_op = [](Var a, Var b) { return sub(a, b); };
  auto mul_op = [](Var a, Var b) { return mul(a, b); };
  auto div_op = [](Var a, Var b) { return div(a, b); };
  auto mm_op = [](Var a, Var b) { return matmul(a, b); };
  c.push_back(binary_case("add", {3, 4}, {3, 4}, true, add_op));
  c.push_back(binary_case("add-broadcast", {4}, {3, 4}, false, add_op));
  c.push_back(binary_case("sub-broadcast", {3, 1}, {3, 4}, false, sub_op));
  c.push_back(binary_case("sub-scalar", {}, {2, 3}, true, sub_op));
  c.push_back(binary_case("mul", {3, 4}, {3, 4}, true, mul_op));
  c.push_back(binary_case("mul-broadcast", {2, 3, 4}, {3, 1}, true, mul_op));
  c.push_back(binary_case("div-numerator", {3, 4}, {3, 4}, true, div_op, 1.0, 2.0));
  c.push_back(binary_case("div-denominator", {3, 4}, {3, 4}, false, div_op, -1.0, 1.0, 1.0, 2.0));
  c.push_back(binary_case("matmul-lhs", {3, 4}, {4, 5}, true, mm_op));
  c.push_back(binary_case("matmul-rhs", {4, 5}, {3, 4}, false, mm_op));
  c.push_back(unary_case("scalar-mul", {3, 4}, [](Var a) { return scale(a, -2.5); }));
  c.push_back(unary_case("transpose", {3, 4}, [](Var a) { return transpose(a); }));
  c.push_back(conv_case("conv2d-input", 0, 3, 2, 1));
  c.push_back(conv_case("conv2d-weight", 1, 3, 2, 1));
  c.push_back(conv_case("conv2d-bias", 2, 3, 1, 1));
  c.push_back(conv_case("conv2d-1x1-input", 0, 1, 1, 0));
  c.push_back(conv_case("conv2d-1x1-weight", 1, 1, 1, 0));
  c.push_back({"relu", [](Rng& rng) {
                 std::uint64_t s = next_seed(rng);
                 Tensor p = away_from_zero({3, 4}, rng);
                 ScalarFn fn = [s](Graph& g, Var x) { return contract(g, relu(x), s); };
                 return GradInstance{fn, p};
               }});
  c.push_back(unary_case("exp", {3, 4}, [](Var a) { return exp(a); }));
  c.push_back(unary_case("log", {3, 4}, [](Var a) { return log(a); }, 0.5, 2.0));
  c.push_back(unary_case("square", {3, 4}, [](Var a) { return square(a); }));
  c.push_back(unary_case("tanh", {3, 4}, [](Var a) { return tanh(a); }));
  c.push_back(unary_case("sum", {3, 4}, [](Var a) { return sum(a); }));
  c.push_back(unary_case("sum-axis0", {3, 4}, [](Var a) { return sum(a, 0); }));
  c.push_back(unary_case("sum-axis1", {2, 3, 4}, [](Var a) { return sum(a, 1); }));
  c.push_back(unary_case("mean", {3, 4}, [](Var a) { return mean(a); }));
  c.push_back(unary_case("mean-axis", {2, 3, 4}, [](Var a) { return mean(a, -1); }));
  c.push_back(unary_case("l2-norm", {3, 2, 2}, [](Var a) { return l2_norm(a, 1); }));
  c.push_back(unary_case("normalize", {3, 5}, [](Var a) { return normalize(a, 1); }));
  c.push_back(unary_case("reshape", {3, 4}, [](Var a) { return reshape(a, {2, 6}); }));
  c.push_back(binary_case("concat", {2, 3}, {2, 2}, true, [](Var a, Var b) {
    std::vector<Var> parts{a, b, a};
    return concat(parts, 1);
  }));
  c.push_back(unary_case("upsample-nearest-2x", {2, 2, 3, 3}, [](Var a) { return upsample_nearest2x(a); }));
  c.push_back(batchnorm_case("batchnorm-train-x", {4, 3, 2, 2}, 0, true));
  c.push_back(batchnorm_case("batchnorm-train-gamma", {4, 3, 2, 2}, 1, true));
  c.push_back(batchnorm_case("batchnorm-train-beta", {4, 3, 2, 2}, 2, true));
  c.push_back(batchnorm_case("batchnorm-train-rank2", {5, 3}, 0, true));
  c.push_back(batchnorm_case("batchnorm-eval-x", {4, 3, 2, 2}, 0, false));
  c.push_back(batchnorm_case("batchnorm-eval-gamma", {4, 3, 2, 2}, 1, false));
  c.push_back(unary_case("softmax", {3, 5}, [](Var a) { return softmax(a); }, -3.0, 3.0));
  c.push_back(unary_case("softmax-axis0", {3, 5}, [](Var a) { return softmax(a, 0); }, -3.0, 3.0));
  c.push_back(unary_case("log-softmax", {3, 5}, [](Var a) { return log_softmax(a); }, -3.0, 3.0));
  c.push_back(unary_case("pick", {3, 5}, [](Var a) {
    std::vector<std::size_t> idx{4, 0, 2};
    return pick(a, idx);
  }));
  return c;
}

std::vector<GradCase> loss_cases() {
  std::vector<GradCase> c;
  c.push_back({"forward-kl-student", [](Rng& rng) {
                 Tensor t = random_probs(4, 10, rng);
                 Tensor p = uniform_tensor({4, 10}, rng, -2.0, 2.0);
                 ScalarFn fn = [t](Graph& g, Var s) { return forward_kl(g.constant(t), softmax(s)); };
                 return GradInstance{fn, p};
               }});
  c.push_back({"forward-kl-teacher", [](Rng& rng) {
                 Tensor s = random_probs(4, 10, rng);
                 Tensor p = uniform_tensor({4, 10}, rng, -2.0, 2.0);
                 ScalarFn fn = [s](Graph& g, Var t) { return forward_kl(softmax(t), g.constant(s)); };
                 return GradInstance{fn, p};
               }});
  for (Divergence d : {Divergence::kReverseKl, Divergence::kJensenShannon}) {
    c.push_back({std::string(divergence_name(d)), [d](Rng& rng) {
                   Tensor t = random_probs(3, 6, rng);
                   Tensor p = uniform_tensor({3, 6}, rng, -2.0, 2.0);
                   ScalarFn fn = [t, d](Graph& g, Var s) { return divergence(g.constant(t), softmax(s), d); };
                   return GradInstance{fn, p};
                 }});
  }
  c.push_back({"entropy", [](Rng& rng) {
                 Tensor p = uniform_tensor({3, 6}, rng, -2.0, 2.0);
                 ScalarFn fn = [](Graph&, Var x) { return entropy(softmax(x)); };
                 return GradInstance{fn, p};
               }});
  c.push_back({"cross-entropy", [](Rng& rng) {
                 Tensor p = uniform_tensor({4, 7}, rng, -2.0, 2.0);
                 std::vector<std::size_t> labels(4);
                 for (auto& l : labels) l = rng() % 7;
                 ScalarFn fn = [labels](Graph&, Var x) { return cross_entropy(x, labels); };
                 return GradInstance{fn, p};
               }});
  c.push_back({"attention-map", [](Rng& rng) {
                 std::uint64_t s = next_seed(rng);
                 Tensor p = uniform_tensor({2, 3, 3, 3}, rng, -1.0, 1.0);
                 ScalarFn fn = [s](Graph& g, Var x) { return contract(g, attention_map(x), s); };
                 return GradInstance{fn, p};
               }});
  // Full student objective through the weights of a conv + dense student.
  c.push_back({"student-loss-net", [](Rng& rng) {
                 const std::size_t b = 3;
                 Tensor t_logits = uniform_tensor({b, 4}, rng, -2.0, 2.0);
                 Tensor t_block = uniform_tensor({b, 3, 5, 5}, rng, -1.0, 1.0);
                 const std::size_t n_conv = 3 * 2 * 3 * 3;
                 const std::size_t n_dense = 3 * 25 * 4;
                 // Redraw until every conv pre-activation clears the ReLU kink by a
                 // margin. Near the kink a step of h can cross it, and the dense
                 // weights on almost-dead units get gradients small enough for the
                 // roundoff of a loss near 250 to dominate the relative error.
                 Tensor images, p;
                 for (;;) {
                   images = uniform_tensor({b, 2, 5, 5}, rng, -1.0, 1.0);
                   p = uniform_tensor({n_conv + n_dense}, rng, -0.3, 0.3);
                   Tensor wc({3, 2, 3, 3}, 0.0);
                   for (std::size_t i = 0; i < n_conv; ++i) wc[i] = p[i];
                   Graph g;
                   Var z = conv2d(g.constant(images), g.constant(wc), g.constant(Tensor({3}, 0.0)), 1, 1);
                   double closest = 1.0;
                   for (double v : z.value().values()) closest = std::min(closest, std::abs(v));
                   if (closest >= kKinkMargin) break;
                 }
                 ScalarFn fn = [=](Graph& g, Var theta) {
                   Var th = reshape(theta, {1, n_conv + n_dense});
                   // Split the flat parameter vector with fixed selection matrices.
                   Tensor sel_c({n_conv + n_dense, n_conv}, 0.0);
                   Tensor sel_d({n_conv + n_dense, n_dense}, 0.0);
                   for (std::size_t i = 0; i < n_conv; ++i) sel_c[i * n_conv + i] = 1.0;
                   for (std::size_t i = 0; i < n_dense; ++i) sel_d[(n_conv + i) * n_dense + i] = 1.0;
                   Var wc = reshape(matmul(th, g.constant(sel_c)), {3, 2, 3, 3});
                   Var wd = reshape(matmul(th, g.constant(sel_d)), {75, 4});
                   Var h = relu(conv2d(g.constant(images), wc, g.constant(Tensor({3}, 0.0)), 1, 1));
                   Var s_logits = matmul(reshape(h, {b, 75}), wd);
                   std::vector<Var> tb{g.constant(t_block)};
                   std::vector<Var> sb{h};
                   return student_loss(g.constant(t_logits), s_logits, tb, sb, 250.0);
                 };
                 return GradInstance{fn, p};
               }});
  c.push_back({"student-loss-block", [](Rng& rng) {
                 Tensor tl = uniform_tensor({3, 5}, rng, -2.0, 2.0);
                 Tensor sl = uniform_tensor({3, 5}, rng, -2.0, 2.0);
                 Tensor tb = uniform_tensor({3, 2, 3, 3}, rng, -1.0, 1.0);
                 Tensor p = uniform_tensor({3, 2, 3, 3}, rng, -1.0, 1.0);
                 ScalarFn fn = [=](Graph& g, Var x) {
                   std::vector<Var> t{g.constant(tb)};
                   std::vector<Var> s{x};
                   return student_loss(g.constant(tl), g.constant(sl), t, s, 250.0);
                 };
                 return GradInstance{fn, p};
               }});
  c.push_back({"kd-at-student-logits", [](Rng& rng) {
                 Tensor tl = uniform_tensor({4, 6}, rng, -3.0, 3.0);
                 Tensor tb = uniform_tensor({4, 2, 3, 3}, rng, -1.0, 1.0);
                 Tensor sb = uniform_tensor({4, 2, 3, 3}, rng, -1.0, 1.0);
                 Tensor p = uniform_tensor({4, 6}, rng, -3.0, 3.0);
                 std::vector<std::size_t> labels(4);
                 for (auto& l : labels) l = rng() % 6;
                 ScalarFn fn = [=](Graph& g, Var x) {
                   std::vector<Var> t{g.constant(tb)};
                   std::vector<Var> s{g.constant(sb)};
                   return kd_at_loss(g.constant(tl), x, labels, t, s, 4.0, 0.9, 250.0);
                 };
                 return GradInstance{fn, p};
               }});
  c.push_back({"kd-at-student-block", [](Rng& rng) {
                 Tensor tl = uniform_tensor({4, 6}, rng, -3.0, 3.0);
                 Tensor sl = uniform_tensor({4, 6}, rng, -3.0, 3.0);
                 Tensor tb = uniform_tensor({4, 2, 3, 3}, rng, -1.0, 1.0);
                 Tensor p = uniform_tensor({4, 2, 3, 3}, rng, -1.0, 1.0);
                 std::vector<std::size_t> labels(4);
                 for (auto& l : labels) l = rng() % 6;
                 ScalarFn fn = [=](Graph& g, Var x) {
                   std::vector<Var> t{g.constant(tb)};
                   std::vector<Var> s{x};
                   return kd_at_loss(g.constant(tl), g.constant(sl), labels, t, s, 4.0, 0.9, 250.0);
                 };
                 return GradInstance{fn, p};
               }});
  c.push_back(extra_case("generator-plain", {ExtraKind::kTeacherEntropy, 0.0, 1}));
  c.push_back(extra_case("generator-teacher-entropy", {ExtraKind::kTeacherEntropy, 0.5, 1}));
  c.push_back(extra_case("generator-teacher-entropy-neg", {ExtraKind::kTeacherEntropy, 0.5, -1}));
  c.push_back(extra_case("generator-student-entropy", {ExtraKind::kStudentEntropy, 0.5, 1}));
  c.push_back(extra_case("generator-consistency-noise",
                         {ExtraKind::kConsistency, 0.5, 1, Augmentation::kGaussianNoise, 0.1, 3}));
  c.push_back(extra_case("generator-consistency-blur",
                         {ExtraKind::kConsistency, 0.5, 1, Augmentation::kGaussianBlur, 0.1, 3}));
  c.push_back(extra_case("generator-diversity", {ExtraKind::kDiversity, 0.5, 1}));
  return c;
}

GradSuiteResult run_grad_suite(const std::vector<GradCase>& cases, std::size_t instances, double h,
                               std::uint64_t seed) {
  GradSuiteResult out;
  out.cases = cases.size();
  for (std::size_t ci = 0; ci < cases.size(); ++ci) {
    Rng rng(derive_seed(seed, ci));
    for (std::size_t i = 0; i < instances; ++i) {
      GradInstance inst = cases[ci].make(rng);
      double err = finite_difference_check(inst.fn, inst.point, h);
      ++out.instances;
      if (!(err <= out.worst_error)) {
        out.worst_error = err;
        out.worst_case = cases[ci].name;
      }
    }
  }
  return out;
}

double loss_sign_identity_gap(std::size_t batches, std::uint64_t seed) {
  Rng rng(seed);
  double gap = 0.0;
  for (std::size_t i = 0; i < batches; ++i) {
    const std::size_t b = 1 + rng() % 16;
    const std::size_t c = 2 + rng() % 12;
    Graph g(false);
    Var t = g.constant(uniform_tensor({b, c}, rng, -5.0, 5.0));
    Var s = g.constant(uniform_tensor({b, c}, rng, -5.0, 5.0));
    double lg = generator_loss(t, s, {}).value().item();
    double ls = student_loss(t, s, {}, {}, 0.0).value().item();
    gap = std::max(gap, std::abs(lg + ls));
  }
  return gap;
}

std::size_t forward_kl_violations(std::size_t pairs, std::uint64_t seed) {
  Rng rng(seed);
  std::size_t bad = 0;
  for (std::size_t i = 0; i < pairs; ++i) {
    const std::size_t c = 2 + rng() % 20;
    Graph g(false);
    // Mix in exact zeros so the clamp path is covered too.
    Tensor t = random_probs(1, c, rng);
    if (rng() % 4 == 0) {
      t[0] += t[1];
      t[1] = 0.0;
    }
    Tensor s = random_probs(1, c, rng);
    if (forward_kl(g.constant(t), g.constant(s)).value().item() < 0.0) ++bad;
  }
  return bad;
}

double reference_kl(const std::vector<double>& t, const std::vector<double>& s) {
  double kl = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (t[i] > 0.0) kl += t[i] * (std::log(t[i]) - std::log(s[i]));
  }
  return kl;
}

}  // namespace zskt::testing
