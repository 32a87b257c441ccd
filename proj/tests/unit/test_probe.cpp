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

#include <cmath>
#include <fstream>
#include <numeric>
#include <string>
#include <vector>

#include "doctest.h"
#include "zskt/baselines.hpp"
#include "zskt/data.hpp"
#include "zskt/error.hpp"
#include "zskt/losses.hpp"
#include "zskt/nn.hpp"
#include "zskt/ops.hpp"
#include "zskt/probe.hpp"
#include "zskt/random.hpp"

using namespace zskt;

namespace {

std::string tmp(const std::string& name) { return std::string(ZSKT_TEST_TMP) + "/probe_" + name; }

NetSpec image_mlp(std::size_t width) {
  NetSpec s;
  s.kind = NetKind::kMlp;
  s.input_shape = {1, 4, 4};
  s.classes = 4;
  s.widths = {width};
  return s;
}

Dataset random_images(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  Dataset d;
  d.inputs = normal_tensor({n, 1, 4, 4}, rng);
  d.labels.assign(n, 0);
  d.classes = 4;
  d.split = Split::kTest;
  return d;
}

TransitionCurve curve(std::size_t image, std::size_t j, std::vector<double> a, std::vector<double> b) {
  TransitionCurve c;
  c.image_id = image;
  c.source = 0;
  c.target = j;
  c.p_a = std::move(a);
  c.p_b = std::move(b);
  return c;
}

}  // namespace

namespace {

// Chunked and full-batch products may take different vector kernels, so
// they agree to rounding rather than bit for bit.
double max_abs_diff(const zskt::Tensor& a, const zskt::Tensor& b) {
  REQUIRE(a.shape() == b.shape());
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}
}  // namespace

TEST_CASE("identical networks give identical curves and zero MTE") {
  Network a = build_classifier(image_mlp(16), 1);
  Network b = a.clone();
  Dataset d = random_images(12, 2);
  ProbeConfig cfg;
  cfg.k = 8;
  cfg.keep_vectors = true;
  ProbeResult r = transition_curves(a, b, d, cfg);
  CHECK(r.images_agreeing == 12);
  CHECK(r.curves.size() == 12 * 3);
  for (const TransitionCurve& c : r.curves) {
    REQUIRE(c.y_a.size() == 8);
    for (std::size_t s = 0; s < 8; ++s) CHECK(c.y_a[s] == c.y_b[s]);
    CHECK(c.p_a == c.p_b);
  }
  CHECK(std::abs(mte(r.curves)) <= 1e-12);
}

TEST_CASE("curve count and record invariants") {
  Network a = build_classifier(image_mlp(16), 1);
  Network b = build_classifier(image_mlp(16), 2);
  Dataset d = random_images(60, 3);
  ProbeConfig cfg;
  cfg.k = 5;
  cfg.keep_vectors = true;
  ProbeResult r = transition_curves(a, b, d, cfg);
  CHECK(r.images_considered == 60);
  CHECK(r.images_agreeing + r.images_skipped == 60);
  CHECK(r.images_agreeing > 0);
  CHECK(r.images_skipped > 0);
  CHECK(r.curves.size() == r.images_agreeing * 3);
  std::size_t prev_img = 0, prev_j = 0;
  for (std::size_t n = 0; n < r.curves.size(); ++n) {
    const TransitionCurve& c = r.curves[n];
    CHECK(c.target != c.source);
    CHECK(c.p_a.size() == 5);
    if (n > 0) CHECK((c.image_id > prev_img || (c.image_id == prev_img && c.target > prev_j)));
    prev_img = c.image_id;
    prev_j = c.target;
    for (std::size_t s = 0; s < 5; ++s) {
      CHECK(c.p_a[s] >= 0.0);
      CHECK(c.p_a[s] <= 1.0);
      for (const Tensor* y : {&c.y_a[s], &c.y_b[s]}) {
        double sum = 0.0;
        for (double v : y->values()) sum += v;
        CHECK(std::abs(sum - 1.0) <= 1e-9);
      }
      CHECK(c.p_a[s] == c.y_a[s][c.target]);
    }
  }
  const double m = mte(r.curves);
  CHECK(m > 0.0);
  CHECK(m <= 1.0);
}

TEST_CASE("first record is the original image and steps use the raw gradient") {
  Network a = build_classifier(image_mlp(16), 4);
  Network b = build_classifier(image_mlp(8), 5);
  Dataset d = random_images(30, 6);
  ProbeConfig cfg;
  cfg.k = 2;
  cfg.xi = 0.7;
  cfg.keep_vectors = true;
  ProbeResult r = transition_curves(a, b, d, cfg);
  REQUIRE(!r.curves.empty());
  const TransitionCurve& c = r.curves.front();
  Tensor x0 = d.inputs.slice_rows(c.image_id, c.image_id + 1);
  Graph g(false);
  Tensor ya = softmax(g.constant(a.predict(x0))).value().reshaped({4});
  CHECK(max_abs_diff(c.y_a[0], ya) <= 1e-12);
  // One explicit descent step on CE(A(x), j).
  Graph gg;
  Var x = gg.variable(x0);
  auto params = a.bind(gg, false);
  std::vector<std::size_t> j{c.target};
  Var loss = cross_entropy(a.forward(gg, x, params, ForwardOptions{}).output, j);
  Tensor grad = gg.backward(loss)[x];
  Tensor x1 = x0;
  for (std::size_t i = 0; i < x1.size(); ++i) x1[i] -= 0.7 * grad[i];
  Tensor ya1 = softmax(g.constant(a.predict(x1))).value().reshaped({4});
  Tensor yb1 = softmax(g.constant(b.predict(x1))).value().reshaped({4});
  for (std::size_t k = 0; k < 4; ++k) {
    CHECK(std::abs(c.y_a[1][k] - ya1[k]) < 1e-12);
    CHECK(std::abs(c.y_b[1][k] - yb1[k]) < 1e-12);
  }
}

TEST_CASE("descent on the probed network raises the target probability") {
  Network a = build_classifier(image_mlp(32), 7);
  Dataset d = random_images(40, 8);
  ProbeConfig cfg;
  cfg.k = 20;
  cfg.xi = 1.0;
  Network b = a.clone();
  ProbeResult r = transition_curves(a, b, d, cfg);
  std::size_t up = 0;
  for (const TransitionCurve& c : r.curves) up += c.p_a.back() > c.p_a.front();
  CHECK(static_cast<double>(up) >= 0.9 * static_cast<double>(r.curves.size()));
}

TEST_CASE("clamping keeps the adversarial input in range") {
  Network a = build_classifier(image_mlp(16), 1);
  Network b = build_classifier(image_mlp(16), 1);
  Dataset d = random_images(5, 3);
  ProbeConfig cfg;
  cfg.k = 4;
  cfg.xi = 50.0;
  cfg.clamp = true;
  ProbeResult clamped = transition_curves(a, b, d, cfg);
  cfg.clamp = false;
  ProbeResult free = transition_curves(a, b, d, cfg);
  REQUIRE(clamped.curves.size() == free.curves.size());
  CHECK(clamped.curves[0].p_a[0] == free.curves[0].p_a[0]);
  CHECK(clamped.curves[0].p_a[3] != free.curves[0].p_a[3]);
}

TEST_CASE("mte hand cases") {
  std::vector<TransitionCurve> one{curve(0, 1, {0.8}, {0.6})};
  CHECK(mte(one) == std::abs(0.8 - 0.6));
  CHECK(std::abs(mte(one) - 0.2) < 1e-15);
  // Two images with two classes each: mean of per-image means of per-class step means.
  std::vector<TransitionCurve> cs{curve(0, 1, {0.1, 0.3}, {0.2, 0.3}), curve(0, 2, {0.5, 0.5}, {0.1, 0.1}),
                                  curve(1, 0, {0.9, 0.9}, {0.9, 0.9}), curve(1, 2, {0.0, 1.0}, {1.0, 0.0})};
  const double expect = 0.5 * (0.5 * (0.05 + 0.4) + 0.5 * (0.0 + 1.0));
  CHECK(std::abs(mte(cs) - expect) < 1e-15);
  for (TransitionCurve& c : cs) std::swap(c.p_a, c.p_b);
  CHECK(std::abs(mte(cs) - expect) < 1e-15);
  CHECK_THROWS_AS(mte(std::vector<TransitionCurve>{}), Error);
}

TEST_CASE("curve summary") {
  std::vector<TransitionCurve> cs{curve(0, 1, {0.0, 1.0}, {0.5, 0.5}), curve(1, 2, {1.0, 1.0}, {0.5, 0.5})};
  CurveSummary s = summarize(cs);
  CHECK(s.mean_a == std::vector<double>{0.5, 1.0});
  CHECK(s.se_a[0] == doctest::Approx(0.5));
  CHECK(s.se_a[1] == 0.0);
  CHECK(s.se_b[0] == 0.0);
}

TEST_CASE("probe errors") {
  Network a = build_classifier(image_mlp(16), 1);
  NetSpec other = image_mlp(16);
  other.classes = 5;
  Network b = build_classifier(other, 1);
  Dataset d = random_images(3, 1);
  try {
    transition_curves(a, b, d, ProbeConfig{});
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kClassMismatch);
  }
  ProbeConfig bad;
  bad.k = 0;
  CHECK_THROWS_AS(transition_curves(a, a, d, bad), Error);
  bad = ProbeConfig{};
  bad.xi = 0.0;
  CHECK_THROWS_AS(transition_curves(a, a, d, bad), Error);
}

TEST_CASE("csv and report output") {
  std::vector<TransitionCurve> cs{curve(3, 1, {0.25, 0.5}, {0.125, 0.5})};
  write_curves_csv(cs, tmp("curves.csv"));
  std::ifstream f(tmp("curves.csv"));
  std::string line;
  std::getline(f, line);
  CHECK(line == "image_id,i,j,step,p_j_A,p_j_B");
  std::getline(f, line);
  CHECK(line == "3,0,1,0,0.25,0.125");
  ProbeResult r;
  r.curves = cs;
  r.images_considered = 4;
  r.images_agreeing = 1;
  r.images_skipped = 3;
  ProbeConfig cfg;
  const std::string rep = mte_report(r, cfg, 0.0625);
  for (const char* key : {"mte=0.0625\n", "K=100\n", "xi=1\n", "images_agreeing=1\n", "images_skipped=3\n", "curves=1\n"}) {
    CHECK(rep.find(key) != std::string::npos);
  }
}

TEST_CASE("noise audit") {
  Network a = build_classifier(image_mlp(16), 1);
  NormStats stats{{0.5}, {0.25}};
  NoiseAuditResult zero = noise_audit(a, 0, 0, 255, stats, 1);
  CHECK(zero.counts == std::vector<std::size_t>(4, 0));
  CHECK(zero.n == 0);
  NoiseAuditResult r = noise_audit(a, 200, 0, 255, stats, 1);
  CHECK(std::accumulate(r.counts.begin(), r.counts.end(), std::size_t{0}) == 200);
  double fsum = 0.0, h = 0.0;
  for (double p : r.fractions) {
    fsum += p;
    if (p > 0) h -= p * std::log(p);
  }
  CHECK(std::abs(fsum - 1.0) < 1e-12);
  CHECK(std::abs(r.entropy - h) < 1e-12);
  write_histogram_csv(r, tmp("hist.csv"));
  std::ifstream f(tmp("hist.csv"));
  std::string line;
  std::getline(f, line);
  CHECK(line == "class,count,fraction");
  std::size_t rows = 0;
  while (std::getline(f, line)) ++rows;
  CHECK(rows == 4);
}
