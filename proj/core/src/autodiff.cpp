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

#include "zskt/autodiff.hpp"

#include "zskt/error.hpp"

namespace zskt {

const Tensor& Var::value() const { return graph_->value(id_); }

bool Var::requires_grad() const { return graph_->requires_grad(id_); }

Tensor Gradients::operator[](Var v) const {
  const auto id = static_cast<std::size_t>(v.id());
  if (id < grads_.size() && !grads_[id].empty()) return grads_[id];
  return Tensor(graph_ ? graph_->value(v.id()).shape() : v.shape(), 0.0);
}

bool Gradients::reached(Var v) const {
  const auto id = static_cast<std::size_t>(v.id());
  return id < grads_.size() && !grads_[id].empty();
}

Var Graph::constant(Tensor value) {
  Node n;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size() - 1));
}

Var Graph::variable(Tensor value) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = true;
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size() - 1));
}

Var Graph::external(const Tensor& value, bool requires_grad) {
  Node n;
  n.external = &value;
  n.requires_grad = requires_grad;
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size() - 1));
}

const Tensor& Graph::value(int id) const {
  const Node& n = nodes_.at(static_cast<std::size_t>(id));
  return n.external ? *n.external : n.value;
}

Var Graph::record(OpKind kind, std::vector<int> inputs, Tensor value, BackwardFn backward) {
  Node n;
  n.kind = kind;
  n.value = std::move(value);
  if (recording_) {
    for (int in : inputs) {
      if (nodes_.at(static_cast<std::size_t>(in)).requires_grad) {
        n.requires_grad = true;
        break;
      }
    }
  }
  if (n.requires_grad) n.backward = std::move(backward);
  n.inputs = std::move(inputs);
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size() - 1));
}

Gradients Graph::backward(Var output) const {
  if (output.graph() != this) {
    throw Error(ErrorCode::kInvalidArgument, "backward: variable belongs to another graph");
  }
  const Tensor& out = value(output.id());
  if (out.size() != 1) {
    throw Error(ErrorCode::kNonScalar,
                "backward: output of shape " + shape_string(out.shape()) + " is not a scalar");
  }
  if (!requires_grad(output.id())) {
    throw Error(ErrorCode::kDetached, "backward: output does not depend on any tensor requiring grad");
  }
  std::vector<Tensor> grads(nodes_.size());
  grads[static_cast<std::size_t>(output.id())] = Tensor(out.shape(), 1.0);
  std::vector<Tensor*> slots;
  for (int id = output.id(); id >= 0; --id) {
    const Node& n = nodes_[static_cast<std::size_t>(id)];
    Tensor& g = grads[static_cast<std::size_t>(id)];
    if (!n.requires_grad || !n.backward || g.empty()) continue;
    slots.assign(n.inputs.size(), nullptr);
    for (std::size_t k = 0; k < n.inputs.size(); ++k) {
      const auto in = static_cast<std::size_t>(n.inputs[k]);
      if (!nodes_[in].requires_grad) continue;
      if (grads[in].empty()) grads[in] = Tensor(value(n.inputs[k]).shape(), 0.0);
      slots[k] = &grads[in];
    }
    n.backward(*this, g, slots);
  }
  return Gradients(this, std::move(grads));
}

}  // namespace zskt
