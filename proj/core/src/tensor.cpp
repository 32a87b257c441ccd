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

#include "zskt/tensor.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <sstream>

#include "zskt/error.hpp"

namespace zskt {

std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

Tensor::Tensor(Shape shape, double fill)
    : shape_(std::move(shape)), values_(shape_size(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> values)
    : shape_(std::move(shape)), values_(std::move(values)) {
  if (values_.size() != shape_size(shape_)) {
    throw Error(ErrorCode::kShapeMismatch,
                "tensor: " + std::to_string(values_.size()) +
                    " values do not fill shape " + shape_string(shape_));
  }
}

Tensor Tensor::vector(std::initializer_list<double> values) {
  return Tensor(Shape{values.size()}, std::vector<double>(values));
}

double Tensor::item() const {
  if (values_.size() != 1) {
    throw Error(ErrorCode::kNonScalar,
                "item: tensor of shape " + shape_string(shape_) + " is not a scalar");
  }
  return values_[0];
}

Tensor Tensor::reshaped(Shape shape) const {
  if (shape_size(shape) != values_.size()) {
    throw Error(ErrorCode::kShapeMismatch, "reshape: cannot view " + shape_string(shape_) +
                                               " as " + shape_string(shape));
  }
  return Tensor(std::move(shape), values_);
}

Tensor Tensor::slice_rows(std::size_t begin, std::size_t end) const {
  if (shape_.empty() || begin > end || end > shape_[0]) {
    throw Error(ErrorCode::kShapeMismatch, "slice_rows: [" + std::to_string(begin) + ", " +
                                               std::to_string(end) + ") out of " +
                                               shape_string(shape_));
  }
  const std::size_t row = shape_[0] ? values_.size() / shape_[0] : 0;
  Shape shape = shape_;
  shape[0] = end - begin;
  return Tensor(std::move(shape),
                std::vector<double>(values_.begin() + static_cast<std::ptrdiff_t>(begin * row),
                                    values_.begin() + static_cast<std::ptrdiff_t>(end * row)));
}

void Tensor::fill(double value) {
  for (double& v : values_) v = value;
}

bool Tensor::all_finite() const {
  for (double v : values_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

Tensor stack_rows(std::span<const Tensor> rows) {
  if (rows.empty()) return Tensor(Shape{0});
  Shape shape{rows.size()};
  for (std::size_t d : rows[0].shape()) shape.push_back(d);
  std::vector<double> values;
  values.reserve(shape_size(shape));
  for (const Tensor& r : rows) {
    if (r.shape() != rows[0].shape()) {
      throw Error(ErrorCode::kShapeMismatch, "stack_rows: " + shape_string(r.shape()) +
                                                 " vs " + shape_string(rows[0].shape()));
    }
    values.insert(values.end(), r.values().begin(), r.values().end());
  }
  return Tensor(std::move(shape), std::move(values));
}

std::uint64_t tensor_digest(const Tensor& t) {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](const void* p, std::size_t n) {
    const auto* b = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= b[i];
      h *= 1099511628211ULL;
    }
  };
  for (std::size_t d : t.shape()) {
    const std::uint64_t d64 = d;
    mix(&d64, sizeof d64);
  }
  mix(t.data(), t.size() * sizeof(double));
  return h;
}

}  // namespace zskt
