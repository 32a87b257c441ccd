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

#include "zskt/probe.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "zskt/error.hpp"
#include "zskt/ops.hpp"
#include "zskt/random.hpp"

namespace zskt {
namespace {

Tensor softmax_rows(const Tensor& logits) {
  const std::size_t rows = logits.dim(0), cols = logits.dim(1);
  Tensor p(logits.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* l = logits.data() + r * cols;
    double mx = l[0];
    for (std::size_t c = 1; c < cols; ++c) mx = std::max(mx, l[c]);
    double s = 0.0;
    for (std::size_t c = 0; c < cols; ++c) s += (p[r * cols + c] = std::exp(l[c] - mx));
    for (std::size_t c = 0; c < cols; ++c) p[r * cols + c] /= s;
  }
  return p;
}

Tensor row(const Tensor& t, std::size_t r) {
  const std::size_t cols = t.dim(1);
  return Tensor(Shape{cols}, std::vector<double>(t.data() + r * cols, t.data() + (r + 1) * cols));
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

ProbeResult transition_curves(Network& a, Network& b, const Dataset& test, const ProbeConfig& cfg) {
  if (a.spec().classes != b.spec().classes) {
    throw Error(ErrorCode::kClassMismatch, "transition_curves: networks have " + std::to_string(a.spec().classes) +
                                               " and " + std::to_string(b.spec().classes) + " classes");
  }
  if (cfg.k < 1 || !(cfg.xi > 0.0)) throw Error(ErrorCode::kInvalidConfig, "probe: need K >= 1 and xi > 0");
  const std::size_t classes = a.spec().classes;
  ProbeResult result;
  const Dataset subset = test.head(cfg.max_images);
  result.images_considered = subset.size();
  const auto pa = argmax_rows(a.predict(subset.inputs));
  const auto pb = argmax_rows(b.predict(subset.inputs));

  struct Job {
    std::size_t image, source, target;
  };
  std::vector<Job> jobs;
  for (std::size_t i = 0; i < subset.size(); ++i) {
    if (pa[i] != pb[i]) {
      ++result.images_skipped;
      continue;
    }
    ++result.images_agreeing;
    for (std::size_t j = 0; j < classes; ++j) {
      if (j != pa[i]) jobs.push_back({i, pa[i], j});
    }
  }
  result.curves.resize(jobs.size());
  const std::size_t chunk = std::max<std::size_t>(cfg.chunk, 1);
  for (std::size_t begin = 0; begin < jobs.size(); begin += chunk) {
    const std::size_t end = std::min(jobs.size(), begin + chunk);
    std::vector<std::size_t> images, targets;
    for (std::size_t q = begin; q < end; ++q) {
      images.push_back(jobs[q].image);
      targets.push_back(jobs[q].target);
      TransitionCurve& c = result.curves[q];
      c.image_id = jobs[q].image;
      c.source = jobs[q].source;
      c.target = jobs[q].target;
    }
    Tensor x_adv = subset.gather(images);
    for (std::size_t step = 0; step < cfg.k; ++step) {
      Graph g;
      const Var x = g.variable(x_adv);
      const std::vector<Var> params = a.bind(g, false);
      const Var logits = a.forward(g, x, params, ForwardOptions{}).output;
      const Tensor ya = softmax_rows(logits.value());
      const Tensor yb = softmax_rows(b.predict(x_adv, chunk));
      for (std::size_t q = begin; q < end; ++q) {
        TransitionCurve& c = result.curves[q];
        const std::size_t r = q - begin;
        c.p_a.push_back(ya[r * classes + c.target]);
        c.p_b.push_back(yb[r * classes + c.target]);
        if (cfg.keep_vectors) {
          c.y_a.push_back(row(ya, r));
          c.y_b.push_back(row(yb, r));
        }
      }
      // Summed so each row receives its own per-sample gradient.
      const Var loss = scale(sum(pick(log_softmax(logits, 1), targets)), -1.0);
      const Tensor grad = g.backward(loss)[x];
      for (std::size_t i = 0; i < x_adv.size(); ++i) {
        x_adv[i] -= cfg.xi * grad[i];
        if (cfg.clamp) x_adv[i] = std::clamp(x_adv[i], cfg.clamp_lo, cfg.clamp_hi);
      }
    }
  }
  return result;
}

double mte(std::span<const TransitionCurve> curves) {
  if (curves.empty()) throw Error(ErrorCode::kInvalidArgument, "mte: no curves");
  std::map<std::size_t, std::pair<double, std::size_t>> per_image;
  for (const TransitionCurve& c : curves) {
    if (c.p_a.empty() || c.p_a.size() != c.p_b.size()) {
      throw Error(ErrorCode::kInvalidArgument, "mte: curve with mismatched or empty steps");
    }
    double s = 0.0;
    for (std::size_t k = 0; k < c.p_a.size(); ++k) s += std::abs(c.p_a[k] - c.p_b[k]);
    auto& acc = per_image[c.image_id];
    acc.first += s / static_cast<double>(c.p_a.size());
    acc.second += 1;
  }
  double total = 0.0;
  for (const auto& [id, acc] : per_image) total += acc.first / static_cast<double>(acc.second);
  return total / static_cast<double>(per_image.size());
}

CurveSummary summarize(std::span<const TransitionCurve> curves) {
  CurveSummary s;
  if (curves.empty()) return s;
  const std::size_t k = curves[0].p_a.size();
  const double n = static_cast<double>(curves.size());
  auto stats = [&](auto member, std::vector<double>& mean, std::vector<double>& se) {
    mean.assign(k, 0.0);
    se.assign(k, 0.0);
    for (std::size_t t = 0; t < k; ++t) {
      double m = 0.0;
      for (const TransitionCurve& c : curves) m += (c.*member)[t];
      m /= n;
      double v = 0.0;
      for (const TransitionCurve& c : curves) v += ((c.*member)[t] - m) * ((c.*member)[t] - m);
      mean[t] = m;
      se[t] = curves.size() > 1 ? std::sqrt(v / (n - 1.0) / n) : 0.0;
    }
  };
  stats(&TransitionCurve::p_a, s.mean_a, s.se_a);
  stats(&TransitionCurve::p_b, s.mean_b, s.se_b);
  return s;
}

void write_curves_csv(std::span<const TransitionCurve> curves, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIo, "cannot write '" + path + "'");
  out << "image_id,i,j,step,p_j_A,p_j_B\n";
  for (const TransitionCurve& c : curves) {
    for (std::size_t k = 0; k < c.p_a.size(); ++k) {
      out << c.image_id << ',' << c.source << ',' << c.target << ',' << k << ',' << fmt(c.p_a[k]) << ','
          << fmt(c.p_b[k]) << '\n';
    }
  }
}

std::string mte_report(const ProbeResult& r, const ProbeConfig& cfg, double value) {
  std::ostringstream out;
  out << "mte=" << fmt(value) << '\n'
      << "K=" << cfg.k << '\n'
      << "xi=" << fmt(cfg.xi) << '\n'
      << "images_considered=" << r.images_considered << '\n'
      << "images_agreeing=" << r.images_agreeing << '\n'
      << "images_skipped=" << r.images_skipped << '\n'
      << "curves=" << r.curves.size() << '\n'
      << "clamp=" << (cfg.clamp ? 1 : 0) << '\n';
  return out.str();
}

NoiseAuditResult noise_audit(Network& net, std::size_t n_images, int pixel_lo, int pixel_hi, const NormStats& stats,
                             std::uint64_t seed) {
  if (pixel_lo > pixel_hi || pixel_hi <= 0) throw Error(ErrorCode::kInvalidArgument, "noise_audit: bad pixel range");
  const std::size_t classes = net.spec().classes;
  NoiseAuditResult r;
  r.n = n_images;
  r.counts.assign(classes, 0);
  const Shape& sample = net.spec().input_shape;
  const std::size_t channels = sample.size() >= 2 ? sample[0] : 1;
  const std::size_t inner = shape_size(sample) / channels;
  Rng rng(seed);
  std::uniform_int_distribution<int> pixel(pixel_lo, pixel_hi);
  const std::size_t chunk = 256;
  for (std::size_t begin = 0; begin < n_images; begin += chunk) {
    const std::size_t n = std::min(chunk, n_images - begin);
    Shape s{n};
    s.insert(s.end(), sample.begin(), sample.end());
    Tensor x(s);
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double v = static_cast<double>(pixel(rng)) / static_cast<double>(pixel_hi);
      x[i] = stats.mean.empty() ? v : normalized_value(stats, (i / inner) % channels, v);
    }
    for (std::size_t c : argmax_rows(net.predict(x))) ++r.counts[c];
  }
  r.fractions.assign(classes, 0.0);
  for (std::size_t c = 0; c < classes; ++c) {
    if (n_images == 0) continue;
    r.fractions[c] = static_cast<double>(r.counts[c]) / static_cast<double>(n_images);
    if (r.fractions[c] > 0.0) r.entropy -= r.fractions[c] * std::log(r.fractions[c]);
  }
  return r;
}

void write_histogram_csv(const NoiseAuditResult& audit, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIo, "cannot write '" + path + "'");
  out << "class,count,fraction\n";
  for (std::size_t c = 0; c < audit.counts.size(); ++c) {
    out << c << ',' << audit.counts[c] << ',' << fmt(audit.fractions[c]) << '\n';
  }
}

}  // namespace zskt
