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

#ifndef ZSKT_AUTODIFF_HPP_
#define ZSKT_AUTODIFF_HPP_

#include <cstddef>
#include <deque>
#include <functional>
#include <span>
#include <vector>

#include "zskt/tensor.hpp"

namespace zskt {

class Graph;

enum class OpKind {
  kLeaf,
  kAdd,
  kSub,
  kMul,
  kDiv,
  kScale,
  kMatmul,
  kTranspose,
  kConv2d,
  kRelu,
  kExp,
  kLog,
  kSquare,
  kTanh,
  kSum,
  kMean,
  kL2Norm,
  kNormalize,
  kReshape,
  kConcat,
  kUpsample2x,
  kBatchNorm,
  kSoftmax,
  kLogSoftmax,
  kPick,
};

// Handle to a node of a Graph. Cheap to copy; valid while the graph lives.
class Var {
 public:
  Var() = default;
  Var(Graph* graph, int id) : graph_(graph), id_(id) {}

  Graph* graph() const { return graph_; }
  int id() const { return id_; }
  bool valid() const { return graph_ != nullptr; }

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  bool requires_grad() const;

 private:
  Graph* graph_ = nullptr;
  int id_ = -1;
};

// Gradient of one scalar output with respect to every node that requires
// grad, indexed by node id.
class Gradients {
 public:
  Gradients() = default;
  Gradients(const Graph* graph, std::vector<Tensor> grads)
      : graph_(graph), grads_(std::move(grads)) {}

  // Zero tensor of the node's shape when no gradient reached it.
  Tensor operator[](Var v) const;
  bool reached(Var v) const;

 private:
  const Graph* graph_ = nullptr;
  std::vector<Tensor> grads_;
};

// Accumulates d(output)/d(input_k) into *input_grads[k]; null entries are
// inputs that do not require grad.
using BackwardFn =
    std::function<void(const Graph& graph, const Tensor& grad_out,
                       std::span<Tensor* const> input_grads)>;

// Tape of op records in topological order. Confined to one thread.
class Graph {
 public:
  explicit Graph(bool recording = true) : recording_(recording) {}
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var constant(Tensor value);
  Var variable(Tensor value);
  // Leaf over caller-owned storage that must outlive the graph.
  Var external(const Tensor& value, bool requires_grad);

  bool recording() const { return recording_; }
  void set_recording(bool on) { recording_ = on; }

  std::size_t size() const { return nodes_.size(); }
  const Tensor& value(int id) const;
  bool requires_grad(int id) const { return nodes_.at(static_cast<std::size_t>(id)).requires_grad; }
  OpKind kind(int id) const { return nodes_.at(static_cast<std::size_t>(id)).kind; }
  const std::vector<int>& inputs(int id) const {
    return nodes_.at(static_cast<std::size_t>(id)).inputs;
  }

  // Records an op. The node requires grad when recording and any input does.
  Var record(OpKind kind, std::vector<int> inputs, Tensor value, BackwardFn backward);

  Gradients backward(Var output) const;

 private:
  struct Node {
    OpKind kind = OpKind::kLeaf;
    std::vector<int> inputs;
    Tensor value;
    const Tensor* external = nullptr;
    bool requires_grad = false;
    BackwardFn backward;
  };

  std::deque<Node> nodes_;
  bool recording_;
};

}  // namespace zskt

#endif  // ZSKT_AUTODIFF_HPP_
