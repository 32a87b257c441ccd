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

#ifndef ZSKT_NN_HPP_
#define ZSKT_NN_HPP_

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "zskt/autodiff.hpp"
#include "zskt/tensor.hpp"

namespace zskt {

enum class NetKind { kMlp, kConvnet, kGenerator };

std::string_view net_kind_name(NetKind kind);
NetKind net_kind_from_name(std::string_view name);

struct NetSpec {
  NetKind kind = NetKind::kMlp;

  // Classifiers: per-sample input shape, e.g. {2} or {1, 28, 28}.
  Shape input_shape;
  std::size_t classes = 0;

  // mlp: hidden widths.
  std::vector<std::size_t> widths;

  // convnet (mini-WRN): stem channels, width multiplier, residual blocks
  // per group. Group g has base * width_multiplier * 2^g channels.
  std::size_t base_channels = 16;
  std::size_t width_multiplier = 1;
  std::size_t depth_multiplier = 2;
  // Tap only the last block of each group instead of every block.
  bool group_taps = false;

  // generator: noise size, per-sample output shape {c, h, w}, hidden conv
  // channels, and the bounded output range (tanh rescaled to [lo, hi]).
  std::size_t z_dim = 100;
  Shape output_shape;
  std::size_t gen_channels = 64;
  bool bounded = true;
  double out_lo = -1.0;
  double out_hi = 1.0;

  friend bool operator==(const NetSpec&, const NetSpec&) = default;
};

// Canonical single-line text form; round-trips through spec_from_string.
std::string spec_to_string(const NetSpec& spec);
NetSpec spec_from_string(std::string_view text);
std::uint64_t spec_digest(const NetSpec& spec);

// Throws kInvalidSpec when extents are zero or the kind's fields are unusable.
void validate_spec(const NetSpec& spec);

enum class LayerType {
  kDense,
  kConv,
  kBatchNorm,
  kRelu,
  kTanh,
  kUpsample2x,
  kReshape,
  kFlatten,
  kGlobalAvgPool,
  kBlockBegin,
  kBlockEnd,
  kTap,
};

struct Layer {
  LayerType type = LayerType::kRelu;
  std::string name;
  std::size_t in = 0;   // dense in / conv in channels / bn channels
  std::size_t out = 0;  // dense out / conv out channels
  std::size_t kernel = 0;
  std::size_t stride = 1;
  std::size_t pad = 0;
  bool bias = false;
  bool projection = false;  // block end: 1x1 conv shortcut
  bool penultimate = false; // tap: penultimate features rather than a block
  Shape shape;              // reshape target (per sample)
  double lo = 0.0, hi = 0.0;

  // Number of trainable scalars owned by this layer.
  std::size_t parameter_count() const;
};

struct Parameter {
  std::string name;
  Tensor value;
};

struct ForwardOptions {
  bool train = false;
  // Train mode only: fold batch statistics into the running averages.
  bool update_running = true;
};

// Graph-level result of a forward pass.
struct ForwardVars {
  Var output;  // logits for classifiers, samples for generators
  std::vector<Var> blocks;
  Var penultimate;
};

// Concrete activation values.
struct ActivationSet {
  std::vector<std::pair<std::string, Tensor>> blocks;
  Tensor penultimate;
};

class Network {
 public:
  Network() = default;
  Network(NetSpec spec, std::vector<Layer> layers);

  const NetSpec& spec() const { return spec_; }
  const std::vector<Layer>& layers() const { return layers_; }

  std::vector<Parameter>& parameters() { return params_; }
  const std::vector<Parameter>& parameters() const { return params_; }
  // Non-trainable state (batchnorm running statistics).
  std::vector<Parameter>& buffers() { return buffers_; }
  const std::vector<Parameter>& buffers() const { return buffers_; }

  Parameter* find_parameter(std::string_view name);
  Parameter* find_buffer(std::string_view name);

  // Total trainable scalars.
  std::size_t parameter_count() const;
  // Number of activation-block taps (N_L).
  std::size_t tap_count() const;
  std::size_t conv_count() const;
  std::vector<std::string> tap_names() const;

  // Digest over parameter and buffer values.
  std::uint64_t state_digest() const;

  // Leaves over the parameters, aligned with parameters().
  std::vector<Var> bind(Graph& graph, bool requires_grad) const;

  ForwardVars forward(Graph& graph, Var x, std::span<const Var> params, const ForwardOptions& options);

  // Eval-mode outputs, computed in chunks along the batch axis.
  Tensor predict(const Tensor& batch, std::size_t chunk = 256);

  // Deep copy (parameters and buffers).
  Network clone() const { return *this; }

 private:
  NetSpec spec_;
  std::vector<Layer> layers_;
  std::vector<Parameter> params_;
  std::vector<Parameter> buffers_;
  std::vector<std::size_t> param_index_;  // first parameter per layer
  std::vector<std::size_t> buffer_index_;

  friend Network initialize(Network net, std::uint64_t seed);
};

Network build_classifier(const NetSpec& spec, std::uint64_t seed);
Network build_generator(const NetSpec& spec, std::uint64_t seed);
// Dispatches on spec.kind.
Network build_network(const NetSpec& spec, std::uint64_t seed);

// Convenience spec for a generator on normalized data.
NetSpec generator_spec(std::size_t z_dim, const Shape& output_shape, std::size_t channels,
                       bool bounded, double lo, double hi);

// Eval-mode logits plus activation values.
std::pair<Tensor, ActivationSet> forward_with_activations(Network& net, const Tensor& batch);

std::vector<std::size_t> argmax_rows(const Tensor& logits);
double accuracy(const Tensor& logits, std::span<const std::size_t> labels);

}  // namespace zskt

#endif  // ZSKT_NN_HPP_
