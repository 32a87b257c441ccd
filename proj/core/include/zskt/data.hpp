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

#ifndef ZSKT_DATA_HPP_
#define ZSKT_DATA_HPP_

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "zskt/tensor.hpp"

namespace zskt {

enum class Split { kTrain, kTest };

// Per-channel statistics; channel is axis 1 of the input tensor.
struct NormStats {
  std::vector<double> mean;
  std::vector<double> stddev;
};

struct Dataset {
  Tensor inputs;  // [n, sample shape...]
  std::vector<std::size_t> labels;
  std::size_t classes = 0;
  Split split = Split::kTrain;
  NormStats stats;          // set by normalize()
  bool normalized = false;

  std::size_t size() const { return labels.size(); }
  Shape sample_shape() const;
  // Inputs at the given row indices.
  Tensor gather(std::span<const std::size_t> indices) const;
  std::vector<std::size_t> gather_labels(std::span<const std::size_t> indices) const;
  // First n rows.
  Dataset head(std::size_t n) const;
};

struct SplitData {
  Dataset train;
  Dataset test;
};

// Gaussian blobs centred on the unit circle, 80/20 stratified split.
SplitData make_toy_blobs(std::size_t classes, std::size_t n_per_class, double spread, std::uint64_t seed);

// Big-endian IDX image (0x00000803) and label (0x00000801) files; pixels
// scaled to [0,1]. Images become [n, 1, h, w].
Dataset load_idx(const std::string& images_path, const std::string& labels_path);
// Inverse of load_idx for unnormalized datasets.
void write_idx(const Dataset& ds, const std::string& images_path, const std::string& labels_path);

// train-/t10k- files under dir.
SplitData load_mnist_dir(const std::string& dir);

NormStats compute_stats(const Dataset& ds);
// (x - mean) / std per channel. Throws if already normalized or std <= 0.
Dataset normalize(const Dataset& ds, const NormStats& stats);
// Per-channel value that maps a raw value v to normalized space.
double normalized_value(const NormStats& stats, std::size_t channel, double v);

// Exactly m samples per class without replacement, deterministic in seed,
// ordered by class then draw.
Dataset few_shot_subset(const Dataset& ds, std::size_t m, std::uint64_t seed);

// CSV with columns x,y,label for 2-d inputs.
void write_toy_csv(const Dataset& ds, const std::string& path);

}  // namespace zskt

#endif  // ZSKT_DATA_HPP_
