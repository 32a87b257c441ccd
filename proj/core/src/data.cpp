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

#include "zskt/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numbers>
#include <numeric>

#include "zskt/error.hpp"
#include "zskt/random.hpp"

namespace zskt {
namespace {

constexpr std::uint32_t kImageMagic = 0x00000803;
constexpr std::uint32_t kLabelMagic = 0x00000801;

std::vector<unsigned char> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open '" + path + "'");
  return std::vector<unsigned char>(std::istreambuf_iterator<char>(in), {});
}

std::uint32_t read_be32(const std::vector<unsigned char>& b, std::size_t off, const std::string& path) {
  if (off + 4 > b.size()) throw Error(ErrorCode::kTruncated, "'" + path + "': truncated header");
  return (std::uint32_t{b[off]} << 24) | (std::uint32_t{b[off + 1]} << 16) | (std::uint32_t{b[off + 2]} << 8) |
         std::uint32_t{b[off + 3]};
}

void put_be32(std::vector<unsigned char>& b, std::uint32_t v) {
  b.push_back(static_cast<unsigned char>(v >> 24));
  b.push_back(static_cast<unsigned char>(v >> 16));
  b.push_back(static_cast<unsigned char>(v >> 8));
  b.push_back(static_cast<unsigned char>(v));
}

void write_file(const std::string& path, const std::vector<unsigned char>& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write '" + path + "'");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::kIo, "short write to '" + path + "'");
}

std::size_t channel_count(const Dataset& ds) { return ds.inputs.rank() >= 2 ? ds.inputs.dim(1) : 1; }

std::size_t channel_inner(const Dataset& ds) {
  std::size_t inner = 1;
  for (std::size_t a = 2; a < ds.inputs.rank(); ++a) inner *= ds.inputs.dim(a);
  return inner;
}

}  // namespace

Shape Dataset::sample_shape() const {
  if (inputs.rank() == 0) return {};
  return Shape(inputs.shape().begin() + 1, inputs.shape().end());
}

Tensor Dataset::gather(std::span<const std::size_t> indices) const {
  const Shape sample = sample_shape();
  const std::size_t row = shape_size(sample);
  Shape s{indices.size()};
  s.insert(s.end(), sample.begin(), sample.end());
  Tensor out(s);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= size()) throw Error(ErrorCode::kInvalidArgument, "gather: index out of range");
    std::copy_n(inputs.data() + indices[i] * row, row, out.data() + i * row);
  }
  return out;
}

std::vector<std::size_t> Dataset::gather_labels(std::span<const std::size_t> indices) const {
  std::vector<std::size_t> out;
  out.reserve(indices.size());
  for (std::size_t i : indices) out.push_back(labels.at(i));
  return out;
}

Dataset Dataset::head(std::size_t n) const {
  Dataset d = *this;
  n = std::min(n, size());
  d.inputs = inputs.slice_rows(0, n);
  d.labels.resize(n);
  return d;
}

SplitData make_toy_blobs(std::size_t classes, std::size_t n_per_class, double spread, std::uint64_t seed) {
  if (classes < 2) throw Error(ErrorCode::kInvalidArgument, "make_toy_blobs: need at least 2 classes");
  if (n_per_class == 0) throw Error(ErrorCode::kInvalidArgument, "make_toy_blobs: n_per_class must be positive");
  if (!(spread >= 0.0) || !std::isfinite(spread)) {
    throw Error(ErrorCode::kInvalidArgument, "make_toy_blobs: spread must be finite and >= 0");
  }
  Rng rng(seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  const std::size_t n_train = (n_per_class * 4 + 2) / 5;
  SplitData out;
  std::vector<double> tr, te;
  for (std::size_t c = 0; c < classes; ++c) {
    const double angle = 2.0 * std::numbers::pi * static_cast<double>(c) / static_cast<double>(classes);
    for (std::size_t i = 0; i < n_per_class; ++i) {
      const double x = std::cos(angle) + spread * noise(rng);
      const double y = std::sin(angle) + spread * noise(rng);
      auto& dst = i < n_train ? tr : te;
      dst.push_back(x);
      dst.push_back(y);
      (i < n_train ? out.train.labels : out.test.labels).push_back(c);
    }
  }
  out.train.inputs = Tensor(Shape{out.train.labels.size(), 2}, std::move(tr));
  out.test.inputs = Tensor(Shape{out.test.labels.size(), 2}, std::move(te));
  out.train.classes = out.test.classes = classes;
  out.train.split = Split::kTrain;
  out.test.split = Split::kTest;
  return out;
}

Dataset load_idx(const std::string& images_path, const std::string& labels_path) {
  const std::vector<unsigned char> img = read_file(images_path);
  const std::vector<unsigned char> lab = read_file(labels_path);
  const std::uint32_t im = read_be32(img, 0, images_path);
  if (im != kImageMagic) {
    throw Error(ErrorCode::kBadMagic, "'" + images_path + "': bad image magic " + std::to_string(im));
  }
  const std::uint32_t lm = read_be32(lab, 0, labels_path);
  if (lm != kLabelMagic) {
    throw Error(ErrorCode::kBadMagic, "'" + labels_path + "': bad label magic " + std::to_string(lm));
  }
  const std::size_t n = read_be32(img, 4, images_path);
  const std::size_t h = read_be32(img, 8, images_path);
  const std::size_t w = read_be32(img, 12, images_path);
  const std::size_t nl = read_be32(lab, 4, labels_path);
  if (img.size() < 16 + n * h * w) {
    throw Error(ErrorCode::kTruncated, "'" + images_path + "': expected " + std::to_string(n * h * w) +
                                           " pixel bytes, found " + std::to_string(img.size() - 16));
  }
  if (lab.size() < 8 + nl) {
    throw Error(ErrorCode::kTruncated, "'" + labels_path + "': expected " + std::to_string(nl) +
                                           " label bytes, found " + std::to_string(lab.size() - 8));
  }
  if (n != nl) {
    throw Error(ErrorCode::kCountMismatch, "image file has " + std::to_string(n) + " items, label file has " +
                                               std::to_string(nl));
  }
  Dataset ds;
  ds.inputs = Tensor(Shape{n, 1, h, w});
  for (std::size_t i = 0; i < n * h * w; ++i) ds.inputs[i] = static_cast<double>(img[16 + i]) / 255.0;
  ds.labels.resize(n);
  std::size_t max_label = 0;
  for (std::size_t i = 0; i < n; ++i) {
    ds.labels[i] = lab[8 + i];
    max_label = std::max(max_label, ds.labels[i]);
  }
  ds.classes = n ? max_label + 1 : 0;
  return ds;
}

void write_idx(const Dataset& ds, const std::string& images_path, const std::string& labels_path) {
  if (ds.normalized) throw Error(ErrorCode::kInvalidArgument, "write_idx: dataset is normalized");
  if (ds.inputs.rank() != 4 || ds.inputs.dim(1) != 1) {
    throw Error(ErrorCode::kShapeMismatch, "write_idx: expected [n,1,h,w], got " + shape_string(ds.inputs.shape()));
  }
  const std::size_t n = ds.size(), h = ds.inputs.dim(2), w = ds.inputs.dim(3);
  std::vector<unsigned char> img;
  img.reserve(16 + n * h * w);
  put_be32(img, kImageMagic);
  put_be32(img, static_cast<std::uint32_t>(n));
  put_be32(img, static_cast<std::uint32_t>(h));
  put_be32(img, static_cast<std::uint32_t>(w));
  for (double v : ds.inputs.values()) {
    img.push_back(static_cast<unsigned char>(std::clamp(std::lround(v * 255.0), 0L, 255L)));
  }
  std::vector<unsigned char> lab;
  put_be32(lab, kLabelMagic);
  put_be32(lab, static_cast<std::uint32_t>(n));
  for (std::size_t l : ds.labels) lab.push_back(static_cast<unsigned char>(l));
  write_file(images_path, img);
  write_file(labels_path, lab);
}

SplitData load_mnist_dir(const std::string& dir) {
  SplitData d;
  d.train = load_idx(dir + "/train-images-idx3-ubyte", dir + "/train-labels-idx1-ubyte");
  d.test = load_idx(dir + "/t10k-images-idx3-ubyte", dir + "/t10k-labels-idx1-ubyte");
  d.test.split = Split::kTest;
  d.train.classes = d.test.classes = std::max(d.train.classes, d.test.classes);
  return d;
}

NormStats compute_stats(const Dataset& ds) {
  if (ds.size() == 0) throw Error(ErrorCode::kEmptyDataset, "compute_stats: empty dataset");
  const std::size_t ch = channel_count(ds), inner = channel_inner(ds), n = ds.size();
  NormStats s;
  s.mean.assign(ch, 0.0);
  s.stddev.assign(ch, 0.0);
  const double count = static_cast<double>(n * inner);
  for (std::size_t c = 0; c < ch; ++c) {
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double* p = ds.inputs.data() + (i * ch + c) * inner;
      for (std::size_t k = 0; k < inner; ++k) sum += p[k];
    }
    const double m = sum / count;
    double var = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double* p = ds.inputs.data() + (i * ch + c) * inner;
      for (std::size_t k = 0; k < inner; ++k) var += (p[k] - m) * (p[k] - m);
    }
    s.mean[c] = m;
    s.stddev[c] = std::sqrt(var / count);
  }
  return s;
}

Dataset normalize(const Dataset& ds, const NormStats& stats) {
  if (ds.normalized) throw Error(ErrorCode::kInvalidArgument, "normalize: dataset is already normalized");
  const std::size_t ch = channel_count(ds), inner = channel_inner(ds);
  if (stats.mean.size() != ch || stats.stddev.size() != ch) {
    throw Error(ErrorCode::kShapeMismatch, "normalize: stats for " + std::to_string(stats.mean.size()) +
                                               " channels, data has " + std::to_string(ch));
  }
  for (std::size_t c = 0; c < ch; ++c) {
    if (!(stats.stddev[c] > 0.0) || !std::isfinite(stats.mean[c]) || !std::isfinite(stats.stddev[c])) {
      throw Error(ErrorCode::kInvalidArgument, "normalize: channel " + std::to_string(c) + " needs finite std > 0");
    }
  }
  Dataset out = ds;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    for (std::size_t c = 0; c < ch; ++c) {
      double* p = out.inputs.data() + (i * ch + c) * inner;
      for (std::size_t k = 0; k < inner; ++k) p[k] = (p[k] - stats.mean[c]) / stats.stddev[c];
    }
  }
  out.stats = stats;
  out.normalized = true;
  return out;
}

double normalized_value(const NormStats& stats, std::size_t channel, double v) {
  return (v - stats.mean.at(channel)) / stats.stddev.at(channel);
}

Dataset few_shot_subset(const Dataset& ds, std::size_t m, std::uint64_t seed) {
  std::vector<std::vector<std::size_t>> by_class(ds.classes);
  for (std::size_t i = 0; i < ds.size(); ++i) by_class.at(ds.labels[i]).push_back(i);
  Rng rng(seed);
  std::vector<std::size_t> picked;
  for (std::size_t c = 0; c < ds.classes; ++c) {
    std::vector<std::size_t>& idx = by_class[c];
    if (idx.size() < m) {
      throw Error(ErrorCode::kSubset, "few_shot_subset: class " + std::to_string(c) + " has " +
                                          std::to_string(idx.size()) + " samples, need " + std::to_string(m));
    }
    // Partial Fisher-Yates: the first m slots become the draw.
    for (std::size_t k = 0; k < m; ++k) {
      std::uniform_int_distribution<std::size_t> pick(k, idx.size() - 1);
      std::swap(idx[k], idx[pick(rng)]);
      picked.push_back(idx[k]);
    }
  }
  Dataset out = ds;
  out.inputs = ds.gather(picked);
  out.labels = ds.gather_labels(picked);
  return out;
}

void write_toy_csv(const Dataset& ds, const std::string& path) {
  if (ds.inputs.rank() != 2 || ds.inputs.dim(1) != 2) {
    throw Error(ErrorCode::kShapeMismatch, "write_toy_csv: expected [n,2] inputs");
  }
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIo, "cannot write '" + path + "'");
  out.precision(17);
  out << "x,y,label\n";
  for (std::size_t i = 0; i < ds.size(); ++i) {
    out << ds.inputs[2 * i] << ',' << ds.inputs[2 * i + 1] << ',' << ds.labels[i] << '\n';
  }
}

}  // namespace zskt
