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

#include "zskt/ops.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <string>

#include "zskt/error.hpp"

namespace zskt {
namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using MutMap = Eigen::Map<RowMat>;

[[noreturn]] void shape_error(std::string_view op, const std::string& detail) {
  throw Error(ErrorCode::kShapeMismatch, std::string(op) + ": " + detail);
}

Graph& graph_of(std::string_view op, std::initializer_list<Var> vars) {
  Graph* g = nullptr;
  for (const Var& v : vars) {
    if (!v.valid()) continue;
    if (g && v.graph() != g) shape_error(op, "inputs belong to different graphs");
    g = v.graph();
  }
  if (!g) throw Error(ErrorCode::kInvalidArgument, std::string(op) + ": no valid input");
  return *g;
}

int normalize_axis(std::string_view op, int axis, std::size_t rank) {
  const int r = static_cast<int>(rank);
  const int a = axis < 0 ? axis + r : axis;
  if (a < 0 || a >= r) {
    shape_error(op, "axis " + std::to_string(axis) + " out of range for rank " + std::to_string(rank));
  }
  return a;
}

// C[m,n] (+)= op(A)[m,k] * op(B)[k,n], all row-major.
void gemm(const double* a, bool trans_a, const double* b, bool trans_b, double* c, std::size_t m,
          std::size_t n, std::size_t k, bool accumulate) {
  const auto M = static_cast<Eigen::Index>(m);
  const auto N = static_cast<Eigen::Index>(n);
  const auto K = static_cast<Eigen::Index>(k);
  MutMap C(c, M, N);
  if (!accumulate) C.setZero();
  if (!trans_a && !trans_b) {
    C.noalias() += ConstMap(a, M, K) * ConstMap(b, K, N);
  } else if (trans_a && !trans_b) {
    C.noalias() += ConstMap(a, K, M).transpose() * ConstMap(b, K, N);
  } else if (!trans_a && trans_b) {
    C.noalias() += ConstMap(a, M, K) * ConstMap(b, N, K).transpose();
  } else {
    C.noalias() += ConstMap(a, K, M).transpose() * ConstMap(b, N, K).transpose();
  }
}

// ---------------------------------------------------------------------------
// Broadcasting

struct Broadcast {
  Shape out;
  std::vector<std::size_t> stride_a;  // per output axis, 0 where broadcast
  std::vector<std::size_t> stride_b;
  bool same = false;
  bool b_scalar = false;
};

std::vector<std::size_t> aligned_strides(const Shape& in, const Shape& out) {
  std::vector<std::size_t> strides(out.size(), 0);
  std::size_t s = 1;
  for (std::size_t i = 0; i < in.size(); ++i) {
    const std::size_t axis_in = in.size() - 1 - i;
    const std::size_t axis_out = out.size() - 1 - i;
    strides[axis_out] = in[axis_in] == 1 ? 0 : s;
    s *= in[axis_in];
  }
  return strides;
}

Broadcast broadcast(std::string_view op, const Shape& a, const Shape& b) {
  Broadcast bc;
  if (a == b) {
    bc.out = a;
    bc.same = true;
    return bc;
  }
  const std::size_t rank = std::max(a.size(), b.size());
  bc.out.assign(rank, 1);
  for (std::size_t i = 0; i < rank; ++i) {
    const std::size_t da = i < a.size() ? a[a.size() - 1 - i] : 1;
    const std::size_t db = i < b.size() ? b[b.size() - 1 - i] : 1;
    if (da != db && da != 1 && db != 1) {
      shape_error(op, "cannot broadcast " + shape_string(a) + " with " + shape_string(b) +
                          " (dim " + std::to_string(da) + " vs " + std::to_string(db) + ")");
    }
    bc.out[rank - 1 - i] = std::max(da, db);
  }
  bc.b_scalar = shape_size(b) == 1 && shape_size(bc.out) == shape_size(a);
  bc.stride_a = aligned_strides(a, bc.out);
  bc.stride_b = aligned_strides(b, bc.out);
  return bc;
}

// Calls f(out_index, a_index, b_index) over the broadcast output.
template <typename F>
void for_each_broadcast(const Broadcast& bc, F&& f) {
  const std::size_t n = shape_size(bc.out);
  if (bc.same) {
    for (std::size_t i = 0; i < n; ++i) f(i, i, i);
    return;
  }
  if (bc.b_scalar) {
    for (std::size_t i = 0; i < n; ++i) f(i, i, 0);
    return;
  }
  const std::size_t rank = bc.out.size();
  std::vector<std::size_t> idx(rank, 0);
  std::size_t ia = 0, ib = 0;
  for (std::size_t o = 0; o < n; ++o) {
    f(o, ia, ib);
    for (std::size_t ax = rank; ax-- > 0;) {
      ++idx[ax];
      ia += bc.stride_a[ax];
      ib += bc.stride_b[ax];
      if (idx[ax] < bc.out[ax]) break;
      ia -= bc.stride_a[ax] * idx[ax];
      ib -= bc.stride_b[ax] * idx[ax];
      idx[ax] = 0;
    }
  }
}

enum class Binary { kAdd, kSub, kMul, kDiv };

Var binary(Binary kind, Var a, Var b) {
  static constexpr std::string_view kNames[] = {"add", "sub", "mul", "div"};
  const std::string_view name = kNames[static_cast<int>(kind)];
  Graph& g = graph_of(name, {a, b});
  const Tensor& va = a.value();
  const Tensor& vb = b.value();
  const Broadcast bc = broadcast(name, va.shape(), vb.shape());
  Tensor out(bc.out);
  double* o = out.data();
  const double* pa = va.data();
  const double* pb = vb.data();
  switch (kind) {
    case Binary::kAdd: for_each_broadcast(bc, [&](auto i, auto x, auto y) { o[i] = pa[x] + pb[y]; }); break;
    case Binary::kSub: for_each_broadcast(bc, [&](auto i, auto x, auto y) { o[i] = pa[x] - pb[y]; }); break;
    case Binary::kMul: for_each_broadcast(bc, [&](auto i, auto x, auto y) { o[i] = pa[x] * pb[y]; }); break;
    case Binary::kDiv: for_each_broadcast(bc, [&](auto i, auto x, auto y) { o[i] = pa[x] / pb[y]; }); break;
  }
  static constexpr OpKind kKinds[] = {OpKind::kAdd, OpKind::kSub, OpKind::kMul, OpKind::kDiv};
  const int ia = a.id(), ib = b.id();
  return g.record(kKinds[static_cast<int>(kind)], {ia, ib}, std::move(out),
                  [kind, bc, ia, ib](const Graph& gr, const Tensor& go, std::span<Tensor* const> gi) {
                    const double* gp = go.data();
                    const double* pa = gr.value(ia).data();
                    const double* pb = gr.value(ib).data();
                    if (gi[0]) {
                      double* da = gi[0]->data();
                      switch (kind) {
                        case Binary::kAdd:
                        case Binary::kSub:
                          for_each_broadcast(bc, [&](auto i, auto x, auto) { da[x] += gp[i]; });
                          break;
                        case Binary::kMul:
                          for_each_broadcast(bc, [&](auto i, auto x, auto y) { da[x] += gp[i] * pb[y]; });
                          break;
                        case Binary::kDiv:
                          for_each_broadcast(bc, [&](auto i, auto x, auto y) { da[x] += gp[i] / pb[y]; });
                          break;
                      }
                    }
                    if (gi[1]) {
                      double* db = gi[1]->data();
                      switch (kind) {
                        case Binary::kAdd:
                          for_each_broadcast(bc, [&](auto i, auto, auto y) { db[y] += gp[i]; });
                          break;
                        case Binary::kSub:
                          for_each_broadcast(bc, [&](auto i, auto, auto y) { db[y] -= gp[i]; });
                          break;
                        case Binary::kMul:
                          for_each_broadcast(bc, [&](auto i, auto x, auto y) { db[y] += gp[i] * pa[x]; });
                          break;
                        case Binary::kDiv:
                          for_each_broadcast(bc, [&](auto i, auto x, auto y) {
                            db[y] -= gp[i] * pa[x] / (pb[y] * pb[y]);
                          });
                          break;
                      }
                    }
                  });
}

// Elementwise unary op with derivative expressed through input x and output y.
template <typename Fwd, typename Deriv>
Var unary(OpKind kind, Var a, Fwd fwd, Deriv deriv) {
  Graph& g = *a.graph();
  const Tensor& va = a.value();
  Tensor out(va.shape());
  for (std::size_t i = 0; i < va.size(); ++i) out[i] = fwd(va[i]);
  const int ia = a.id();
  const int self = static_cast<int>(g.size());
  return g.record(kind, {ia}, std::move(out),
                  [deriv, ia, self](const Graph& gr, const Tensor& go, std::span<Tensor* const> gi) {
                    const Tensor& x = gr.value(ia);
                    const Tensor& y = gr.value(self);
                    double* d = gi[0]->data();
                    for (std::size_t i = 0; i < x.size(); ++i) d[i] += go[i] * deriv(x[i], y[i]);
                  });
}

struct AxisSplit {
  std::size_t outer = 1, len = 1, inner = 1;
};

AxisSplit split_at(const Shape& s, std::size_t axis) {
  AxisSplit r;
  for (std::size_t i = 0; i < axis; ++i) r.outer *= s[i];
  r.len = s[axis];
  for (std::size_t i = axis + 1; i < s.size(); ++i) r.inner *= s[i];
  return r;
}

Var reduce_axis(OpKind kind, Var a, int axis_in) {
  const std::string_view name = kind == OpKind::kSum ? "sum" : "mean";
  Graph& g = *a.graph();
  const Tensor& va = a.value();
  const auto axis = static_cast<std::size_t>(normalize_axis(name, axis_in, va.rank()));
  const AxisSplit sp = split_at(va.shape(), axis);
  Shape out_shape = va.shape();
  out_shape.erase(out_shape.begin() + static_cast<std::ptrdiff_t>(axis));
  Tensor out(out_shape, 0.0);
  const double w = kind == OpKind::kMean ? 1.0 / static_cast<double>(sp.len) : 1.0;
  for (std::size_t o = 0; o < sp.outer; ++o) {
    for (std::size_t l = 0; l < sp.len; ++l) {
      const double* src = va.data() + (o * sp.len + l) * sp.inner;
      double* dst = out.data() + o * sp.inner;
      for (std::size_t i = 0; i < sp.inner; ++i) dst[i] += src[i];
    }
  }
  if (w != 1.0) {
    for (double& v : out.values()) v *= w;
  }
  return g.record(kind, {a.id()}, std::move(out),
                  [sp, w](const Graph&, const Tensor& go, std::span<Tensor* const> gi) {
                    double* d = gi[0]->data();
                    for (std::size_t o = 0; o < sp.outer; ++o) {
                      for (std::size_t l = 0; l < sp.len; ++l) {
                        double* dst = d + (o * sp.len + l) * sp.inner;
                        const double* src = go.data() + o * sp.inner;
                        for (std::size_t i = 0; i < sp.inner; ++i) dst[i] += w * src[i];
                      }
                    }
                  });
}

Var reduce_all(OpKind kind, Var a) {
  Graph& g = *a.graph();
  const Tensor& va = a.value();
  double s = 0.0;
  for (double v : va.values()) s += v;
  const double w = kind == OpKind::kMean ? 1.0 / static_cast<double>(std::max<std::size_t>(va.size(), 1)) : 1.0;
  return g.record(kind, {a.id()}, Tensor::scalar(s * w),
                  [w](const Graph&, const Tensor& go, std::span<Tensor* const> gi) {
                    const double d = go[0] * w;
                    for (double& v : gi[0]->values()) v += d;
                  });
}

void im2col(const double* x, std::size_t c_in, std::size_t h, std::size_t w, std::size_t k,
            std::size_t stride, std::size_t pad, std::size_t ho, std::size_t wo, double* cols) {
  for (std::size_t c = 0; c < c_in; ++c) {
    for (std::size_t ki = 0; ki < k; ++ki) {
      for (std::size_t kj = 0; kj < k; ++kj) {
        double* row = cols + ((c * k + ki) * k + kj) * ho * wo;
        for (std::size_t oh = 0; oh < ho; ++oh) {
          const std::ptrdiff_t ih = static_cast<std::ptrdiff_t>(oh * stride + ki) - static_cast<std::ptrdiff_t>(pad);
          double* dst = row + oh * wo;
          if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(h)) {
            std::fill(dst, dst + wo, 0.0);
            continue;
          }
          const double* src = x + (c * h + static_cast<std::size_t>(ih)) * w;
          for (std::size_t ow = 0; ow < wo; ++ow) {
            const std::ptrdiff_t iw = static_cast<std::ptrdiff_t>(ow * stride + kj) - static_cast<std::ptrdiff_t>(pad);
            dst[ow] = (iw < 0 || iw >= static_cast<std::ptrdiff_t>(w)) ? 0.0 : src[iw];
          }
        }
      }
    }
  }
}

void col2im(const double* cols, std::size_t c_in, std::size_t h, std::size_t w, std::size_t k,
            std::size_t stride, std::size_t pad, std::size_t ho, std::size_t wo, double* x) {
  for (std::size_t c = 0; c < c_in; ++c) {
    for (std::size_t ki = 0; ki < k; ++ki) {
      for (std::size_t kj = 0; kj < k; ++kj) {
        const double* row = cols + ((c * k + ki) * k + kj) * ho * wo;
        for (std::size_t oh = 0; oh < ho; ++oh) {
          const std::ptrdiff_t ih = static_cast<std::ptrdiff_t>(oh * stride + ki) - static_cast<std::ptrdiff_t>(pad);
          if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(h)) continue;
          double* dst = x + (c * h + static_cast<std::size_t>(ih)) * w;
          const double* src = row + oh * wo;
          for (std::size_t ow = 0; ow < wo; ++ow) {
            const std::ptrdiff_t iw = static_cast<std::ptrdiff_t>(ow * stride + kj) - static_cast<std::ptrdiff_t>(pad);
            if (iw >= 0 && iw < static_cast<std::ptrdiff_t>(w)) dst[iw] += src[ow];
          }
        }
      }
    }
  }
}

}  // namespace

// ---------------------------------------------------------------------------

OpKind op_kind_from_name(std::string_view name) {
  static constexpr std::pair<std::string_view, OpKind> kTable[] = {
      {"add", OpKind::kAdd},           {"sub", OpKind::kSub},
      {"mul", OpKind::kMul},           {"div", OpKind::kDiv},
      {"scale", OpKind::kScale},       {"scalar-mul", OpKind::kScale},
      {"matmul", OpKind::kMatmul},     {"transpose", OpKind::kTranspose},
      {"conv2d", OpKind::kConv2d},     {"relu", OpKind::kRelu},
      {"exp", OpKind::kExp},           {"log", OpKind::kLog},
      {"square", OpKind::kSquare},     {"tanh", OpKind::kTanh},
      {"sum", OpKind::kSum},           {"mean", OpKind::kMean},
      {"l2-norm", OpKind::kL2Norm},    {"normalize", OpKind::kNormalize},
      {"reshape", OpKind::kReshape},   {"concat", OpKind::kConcat},
      {"upsample-nearest-2x", OpKind::kUpsample2x},
      {"batchnorm", OpKind::kBatchNorm}, {"softmax", OpKind::kSoftmax},
      {"log-softmax", OpKind::kLogSoftmax}, {"pick", OpKind::kPick},
  };
  for (const auto& [n, k] : kTable) {
    if (n == name) return k;
  }
  throw Error(ErrorCode::kUnknownOp, "apply: unknown op kind '" + std::string(name) + "'");
}

std::string_view op_kind_name(OpKind kind) {
  switch (kind) {
    case OpKind::kLeaf: return "leaf";
    case OpKind::kAdd: return "add";
    case OpKind::kSub: return "sub";
    case OpKind::kMul: return "mul";
    case OpKind::kDiv: return "div";
    case OpKind::kScale: return "scalar-mul";
    case OpKind::kMatmul: return "matmul";
    case OpKind::kTranspose: return "transpose";
    case OpKind::kConv2d: return "conv2d";
    case OpKind::kRelu: return "relu";
    case OpKind::kExp: return "exp";
    case OpKind::kLog: return "log";
    case OpKind::kSquare: return "square";
    case OpKind::kTanh: return "tanh";
    case OpKind::kSum: return "sum";
    case OpKind::kMean: return "mean";
    case OpKind::kL2Norm: return "l2-norm";
    case OpKind::kNormalize: return "normalize";
    case OpKind::kReshape: return "reshape";
    case OpKind::kConcat: return "concat";
    case OpKind::kUpsample2x: return "upsample-nearest-2x";
    case OpKind::kBatchNorm: return "batchnorm";
    case OpKind::kSoftmax: return "softmax";
    case OpKind::kLogSoftmax: return "log-softmax";
    case OpKind::kPick: return "pick";
  }
  return "unknown";
}

Var apply(std::string_view kind, std::span<const Var> inputs, const OpAttrs& attrs) {
  return apply(op_kind_from_name(kind), inputs, attrs);
}

Var apply(OpKind kind, std::span<const Var> inputs, const OpAttrs& attrs) {
  auto need = [&](std::size_t lo, std::size_t hi) {
    if (inputs.size() < lo || inputs.size() > hi) {
      throw Error(ErrorCode::kInvalidArgument,
                  std::string(op_kind_name(kind)) + ": expected " + std::to_string(lo) +
                      (lo == hi ? "" : "-" + std::to_string(hi)) + " inputs, got " +
                      std::to_string(inputs.size()));
    }
  };
  switch (kind) {
    case OpKind::kAdd: need(2, 2); return add(inputs[0], inputs[1]);
    case OpKind::kSub: need(2, 2); return sub(inputs[0], inputs[1]);
    case OpKind::kMul: need(2, 2); return mul(inputs[0], inputs[1]);
    case OpKind::kDiv: need(2, 2); return div(inputs[0], inputs[1]);
    case OpKind::kScale: need(1, 1); return scale(inputs[0], attrs.scalar);
    case OpKind::kMatmul: need(2, 2); return matmul(inputs[0], inputs[1]);
    case OpKind::kTranspose: need(1, 1); return transpose(inputs[0]);
    case OpKind::kConv2d:
      need(2, 3);
      return conv2d(inputs[0], inputs[1], inputs.size() == 3 ? inputs[2] : Var(), attrs.stride, attrs.pad);
    case OpKind::kRelu: need(1, 1); return relu(inputs[0]);
    case OpKind::kExp: need(1, 1); return exp(inputs[0]);
    case OpKind::kLog: need(1, 1); return log(inputs[0], attrs.clamp_min);
    case OpKind::kSquare: need(1, 1); return square(inputs[0]);
    case OpKind::kTanh: need(1, 1); return tanh(inputs[0]);
    case OpKind::kSum:
      need(1, 1);
      return attrs.axis == -1 && inputs[0].value().rank() != 1 ? sum(inputs[0]) : sum(inputs[0], attrs.axis);
    case OpKind::kMean:
      need(1, 1);
      return attrs.axis == -1 && inputs[0].value().rank() != 1 ? mean(inputs[0]) : mean(inputs[0], attrs.axis);
    case OpKind::kL2Norm: need(1, 1); return l2_norm(inputs[0], static_cast<std::size_t>(std::max(attrs.axis, 0)));
    case OpKind::kNormalize: need(1, 1); return normalize(inputs[0], static_cast<std::size_t>(std::max(attrs.axis, 0)));
    case OpKind::kReshape: need(1, 1); return reshape(inputs[0], attrs.shape);
    case OpKind::kConcat:
      if (inputs.empty()) need(1, 1);
      return concat(inputs, attrs.axis);
    case OpKind::kUpsample2x: need(1, 1); return upsample_nearest2x(inputs[0]);
    case OpKind::kBatchNorm: need(3, 3); return batchnorm(inputs[0], inputs[1], inputs[2], attrs.batchnorm);
    case OpKind::kSoftmax: need(1, 1); return softmax(inputs[0], attrs.axis);
    case OpKind::kLogSoftmax: need(1, 1); return log_softmax(inputs[0], attrs.axis);
    case OpKind::kPick: need(1, 1); return pick(inputs[0], attrs.indices);
    case OpKind::kLeaf: break;
  }
  throw Error(ErrorCode::kUnknownOp, "apply: op kind '" + std::string(op_kind_name(kind)) + "' is not applicable");
}

Var add(Var a, Var b) { return binary(Binary::kAdd, a, b); }
Var sub(Var a, Var b) { return binary(Binary::kSub, a, b); }
Var mul(Var a, Var b) { return binary(Binary::kMul, a, b); }
Var div(Var a, Var b) { return binary(Binary::kDiv, a, b); }

Var scale(Var a, double s) {
  return unary(OpKind::kScale, a, [s](double x) { return s * x; },
               [s](double, double) { return s; });
}

Var matmul(Var a, Var b) {
  Graph& g = graph_of("matmul", {a, b});
  const Tensor& va = a.value();
  const Tensor& vb = b.value();
  if (va.rank() != 2 || vb.rank() != 2 || va.dim(1) != vb.dim(0)) {
    shape_error("matmul", "cannot multiply " + shape_string(va.shape()) + " by " + shape_string(vb.shape()));
  }
  const std::size_t m = va.dim(0), k = va.dim(1), n = vb.dim(1);
  Tensor out(Shape{m, n});
  gemm(va.data(), false, vb.data(), false, out.data(), m, n, k, false);
  const int ia = a.id(), ib = b.id();
  return g.record(OpKind::kMatmul, {ia, ib}, std::move(out),
                  [ia, ib, m, n, k](const Graph& gr, const Tensor& go, std::span<Tensor* const> gi) {
                    if (gi[0]) gemm(go.data(), false, gr.value(ib).data(), true, gi[0]->data(), m, k, n, true);
                    if (gi[1]) gemm(gr.value(ia).data(), true, go.data(), false, gi[1]->data(), k, n, m, true);
                  });
}

Var transpose(Var a) {
  Graph& g = *a.graph();
  const Tensor& va = a.value();
  if (va.rank() != 2) shape_error("transpose", "expected rank 2, got " + shape_string(va.shape()));
  const std::size_t r = va.dim(0), c = va.dim(1);
  Tensor out(Shape{c, r});
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = va[i * c + j];
  }
  return g.record(OpKind::kTranspose, {a.id()}, std::move(out),
                  [r, c](const Graph&, const Tensor& go, std::span<Tensor* const> gi) {
                    double* d = gi[0]->data();
                    for (std::size_t i = 0; i < r; ++i) {
                      for (std::size_t j = 0; j < c; ++j) d[i * c + j] += go[j * r + i];
                    }
                  });
}

Var conv2d(Var x, Var w, Var bias, std::size_t stride, std::size_t pad) {
  Graph& g = graph_of("conv2d", {x, w, bias});
  const Tensor& vx = x.value();
  const Tensor& vw = w.value();
  if (vx.rank() != 4 || vw.rank() != 4 || vw.dim(1) != vx.dim(1) || vw.dim(2) != vw.dim(3)) {
    shape_error("conv2d", "input " + shape_string(vx.shape()) + " incompatible with kernel " +
                              shape_string(vw.shape()));
  }
  if (stride == 0) shape_error("conv2d", "stride must be positive");
  const std::size_t batch = vx.dim(0), c_in = vx.dim(1), h = vx.dim(2), wd = vx.dim(3);
  const std::size_t c_out = vw.dim(0), k = vw.dim(2);
  if (h + 2 * pad < k || wd + 2 * pad < k) {
    shape_error("conv2d", "kernel " + std::to_string(k) + " larger than padded input " + shape_string(vx.shape()));
  }
  const std::size_t ho = (h + 2 * pad - k) / stride + 1;
  const std::size_t wo = (wd + 2 * pad - k) / stride + 1;
  if (bias.valid() && (bias.value().rank() != 1 || bias.value().dim(0) != c_out)) {
    shape_error("conv2d", "bias " + shape_string(bias.value().shape()) + " for " + std::to_string(c_out) + " output channels");
  }
  const bool direct = k == 1 && stride == 1 && pad == 0;
  const std::size_t patch = c_in * k * k, npix = ho * wo;
  Tensor out(Shape{batch, c_out, ho, wo});
  std::vector<double> cols(direct ? 0 : patch * npix);
  for (std::size_t b = 0; b < batch; ++b) {
    const double* xb = vx.data() + b * c_in * h * wd;
    const double* src = xb;
    if (!direct) {
      im2col(xb, c_in, h, wd, k, stride, pad, ho, wo, cols.data());
      src = cols.data();
    }
    gemm(vw.data(), false, src, false, out.data() + b * c_out * npix, c_out, npix, patch, false);
  }
  if (bias.valid()) {
    const Tensor& vb = bias.value();
    for (std::size_t b = 0; b < batch; ++b) {
      for (std::size_t c = 0; c < c_out; ++c) {
        double* o = out.data() + (b * c_out + c) * npix;
        for (std::size_t i = 0; i < npix; ++i) o[i] += vb[c];
      }
    }
  }
  std::vector<int> ins{x.id(), w.id()};
  if (bias.valid()) ins.push_back(bias.id());
  const int ix = x.id(), iw = w.id();
  return g.record(OpKind::kConv2d, std::move(ins), std::move(out),
                  [=](const Graph& gr, const Tensor& go, std::span<Tensor* const> gi) {
                    const Tensor& vx = gr.value(ix);
                    const Tensor& vw = gr.value(iw);
                    std::vector<double> cols(direct ? 0 : patch * npix);
                    std::vector<double> dcols(gi[0] && !direct ? patch * npix : 0);
                    for (std::size_t b = 0; b < batch; ++b) {
                      const double* gob = go.data() + b * c_out * npix;
                      const double* xb = vx.data() + b * c_in * h * wd;
                      if (gi[1]) {
                        const double* src = xb;
                        if (!direct) {
                          im2col(xb, c_in, h, wd, k, stride, pad, ho, wo, cols.data());
                          src = cols.data();
                        }
                        gemm(gob, false, src, true, gi[1]->data(), c_out, patch, npix, true);
                      }
                      if (gi[0]) {
                        double* dxb = gi[0]->data() + b * c_in * h * wd;
                        if (direct) {
                          gemm(vw.data(), true, gob, false, dxb, patch, npix, c_out, true);
                        } else {
                          gemm(vw.data(), true, gob, false, dcols.data(), patch, npix, c_out, false);
                          col2im(dcols.data(), c_in, h, wd, k, stride, pad, ho, wo, dxb);
                        }
                      }
                    }
                    if (gi.size() > 2 && gi[2]) {
                      double* db = gi[2]->data();
                      for (std::size_t b = 0; b < batch; ++b) {
                        for (std::size_t c = 0; c < c_out; ++c) {
                          const double* o = go.data() + (b * c_out + c) * npix;
                          double s = 0.0;
                          for (std::size_t i = 0; i < npix; ++i) s += o[i];
                          db[c] += s;
                        }
                      }
                    }
                  });
}

Var relu(Var a) {
  return unary(OpKind::kRelu, a, [](double x) { return x > 0.0 ? x : 0.0; },
               [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Var exp(Var a) {
  return unary(OpKind::kExp, a, [](double x) { return std::exp(x); },
               [](double, double y) { return y; });
}

Var log(Var a, double clamp_min) {
  return unary(OpKind::kLog, a, [clamp_min](double x) { return std::log(std::max(x, clamp_min)); },
               [clamp_min](double x, double) { return x > clamp_min ? 1.0 / x : 0.0; });
}

Var square(Var a) {
  return unary(OpKind::kSquare, a, [](double x) { return x * x; },
               [](double x, double) { return 2.0 * x; });
}

Var tanh(Var a) {
  return unary(OpKind::kTanh, a, [](double x) { return std::tanh(x); },
               [](double, double y) { return 1.0 - y * y; });
}

Var sum(Var a) { return reduce_all(OpKind::kSum, a); }
Var sum(Var a, int axis) { return reduce_axis(OpKind::kSum, a, axis); }
Var mean(Var a) { return reduce_all(OpKind::kMean, a); }
Var mean(Var a, int axis) { return reduce_axis(OpKind::kMean, a, axis); }

Var l2_norm(Var a, std::size_t start_axis) {
  Graph& g = *a.graph();
  const Tensor& va = a.value();
  if (start_axis > va.rank()) shape_error("l2-norm", "start axis beyond rank of " + shape_string(va.shape()));
  Shape out_shape(va.shape().begin(), va.shape().begin() + static_cast<std::ptrdiff_t>(start_axis));
  const std::size_t groups = shape_size(out_shape);
  const std::size_t len = groups ? va.size() / groups : 0;
  Tensor out(out_shape);
  for (std::size_t gi = 0; gi < groups; ++gi) {
    double s = 0.0;
    for (std::size_t i = 0; i < len; ++i) s += va[gi * len + i] * va[gi * len + i];
    out[gi] = std::sqrt(s);
  }
  const int ia = a.id();
  const int self = static_cast<int>(g.size());
  return g.record(OpKind::kL2Norm, {ia}, std::move(out),
                  [ia, self, groups, len](const Graph& gr, const Tensor& go, std::span<Tensor* const> gi) {
                    const Tensor& x = gr.value(ia);
                    const Tensor& n = gr.value(self);
                    double* d = gi[0]->data();
                    for (std::size_t k = 0; k < groups; ++k) {
                      if (n[k] == 0.0) continue;
                      const double c = go[k] / n[k];
                      for (std::size_t i = 0; i < len; ++i) d[k * len + i] += c * x[k * len + i];
                    }
                  });
}

Var normalize(Var a, std::size_t start_axis) {
  Graph& g = *a.graph();
  const Tensor& va = a.value();
  if (start_axis > va.rank()) shape_error("normalize", "start axis beyond rank of " + shape_string(va.shape()));
  Shape lead(va.shape().begin(), va.shape().begin() + static_cast<std::ptrdiff_t>(start_axis));
  const std::size_t groups = shape_size(lead);
  const std::size_t len = groups ? va.size() / groups : 0;
  Tensor out(va.shape(), 0.0);
  std::vector<double> norms(groups, 0.0);
  for (std::size_t k = 0; k < groups; ++k) {
    double s = 0.0;
    for (std::size_t i = 0; i < len; ++i) s += va[k * len + i] * va[k * len + i];
    norms[k] = std::sqrt(s);
    if (norms[k] == 0.0) continue;
    for (std::size_t i = 0; i < len; ++i) out[k * len + i] = va[k * len + i] / norms[k];
  }
  const int self = static_cast<int>(g.size());
  return g.record(OpKind::kNormalize, {a.id()}, std::move(out),
                  [self, groups, len, norms = std::move(norms)](const Graph& gr, const Tensor& go,
                                                               std::span<Tensor* const> gi) {
                    const Tensor& y = gr.value(self);
                    double* d = gi[0]->data();
                    for (std::size_t k = 0; k < groups; ++k) {
                      if (norms[k] == 0.0) continue;
                      double dot = 0.0;
                      for (std::size_t i = 0; i < len; ++i) dot += y[k * len + i] * go[k * len + i];
                      for (std::size_t i = 0; i < len; ++i) {
                        d[k * len + i] += (go[k * len + i] - y[k * len + i] * dot) / norms[k];
                      }
                    }
                  });
}

Var reshape(Var a, Shape shape) {
  Graph& g = *a.graph();
  const Tensor& va = a.value();
  if (shape_size(shape) != va.size()) {
    shape_error("reshape", "cannot view " + shape_string(va.shape()) + " as " + shape_string(shape));
  }
  return g.record(OpKind::kReshape, {a.id()}, va.reshaped(std::move(shape)),
                  [](const Graph&, const Tensor& go, std::span<Tensor* const> gi) {
                    double* d = gi[0]->data();
                    for (std::size_t i = 0; i < go.size(); ++i) d[i] += go[i];
                  });
}

Var concat(std::span<const Var> parts, int axis_in) {
  if (parts.empty()) throw Error(ErrorCode::kInvalidArgument, "concat: no inputs");
  Graph& g = *parts[0].graph();
  const Shape& s0 = parts[0].value().shape();
  const auto axis = static_cast<std::size_t>(normalize_axis("concat", axis_in, s0.size()));
  Shape out_shape = s0;
  out_shape[axis] = 0;
  std::vector<int> ids;
  std::vector<std::size_t> lens;
  for (const Var& p : parts) {
    if (p.graph() != &g) shape_error("concat", "inputs belong to different graphs");
    const Shape& s = p.value().shape();
    bool ok = s.size() == s0.size();
    for (std::size_t i = 0; ok && i < s.size(); ++i) ok = i == axis || s[i] == s0[i];
    if (!ok) shape_error("concat", shape_string(s) + " vs " + shape_string(s0) + " along axis " + std::to_string(axis));
    out_shape[axis] += s[axis];
    ids.push_back(p.id());
    lens.push_back(s[axis]);
  }
  const AxisSplit sp = split_at(out_shape, axis);
  Tensor out(out_shape);
  std::size_t offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const Tensor& v = parts[k].value();
    for (std::size_t o = 0; o < sp.outer; ++o) {
      const double* src = v.data() + o * lens[k] * sp.inner;
      std::copy(src, src + lens[k] * sp.inner, out.data() + (o * sp.len + offset) * sp.inner);
    }
    offset += lens[k];
  }
  return g.record(OpKind::kConcat, ids, std::move(out),
                  [sp, lens](const Graph&, const Tensor& go, std::span<Tensor* const> gi) {
                    std::size_t offset = 0;
                    for (std::size_t k = 0; k < lens.size(); ++k) {
                      if (gi[k]) {
                        for (std::size_t o = 0; o < sp.outer; ++o) {
                          const double* src = go.data() + (o * sp.len + offset) * sp.inner;
                          double* dst = gi[k]->data() + o * lens[k] * sp.inner;
                          for (std::size_t i = 0; i < lens[k] * sp.inner; ++i) dst[i] += src[i];
                        }
                      }
                      offset += lens[k];
                    }
                  });
}

Var upsample_nearest2x(Var a) {
  Graph& g = *a.graph();
  const Tensor& va = a.value();
  if (va.rank() != 4) shape_error("upsample-nearest-2x", "expected rank 4, got " + shape_string(va.shape()));
  const std::size_t planes = va.dim(0) * va.dim(1), h = va.dim(2), w = va.dim(3);
  Tensor out(Shape{va.dim(0), va.dim(1), 2 * h, 2 * w});
  for (std::size_t p = 0; p < planes; ++p) {
    const double* src = va.data() + p * h * w;
    double* dst = out.data() + p * 4 * h * w;
    for (std::size_t i = 0; i < 2 * h; ++i) {
      for (std::size_t j = 0; j < 2 * w; ++j) dst[i * 2 * w + j] = src[(i / 2) * w + j / 2];
    }
  }
  return g.record(OpKind::kUpsample2x, {a.id()}, std::move(out),
                  [planes, h, w](const Graph&, const Tensor& go, std::span<Tensor* const> gi) {
                    for (std::size_t p = 0; p < planes; ++p) {
                      const double* src = go.data() + p * 4 * h * w;
                      double* dst = gi[0]->data() + p * h * w;
                      for (std::size_t i = 0; i < 2 * h; ++i) {
                        for (std::size_t j = 0; j < 2 * w; ++j) dst[(i / 2) * w + j / 2] += src[i * 2 * w + j];
                      }
                    }
                  });
}

Var batchnorm(Var x, Var gamma, Var beta, const BatchNormAttrs& attrs) {
  Graph& g = graph_of("batchnorm", {x, gamma, beta});
  const Tensor& vx = x.value();
  if (vx.rank() != 2 && vx.rank() != 4) {
    shape_error("batchnorm", "expected rank 2 or 4, got " + shape_string(vx.shape()));
  }
  const std::size_t batch = vx.dim(0), ch = vx.dim(1);
  const std::size_t inner = vx.rank() == 4 ? vx.dim(2) * vx.dim(3) : 1;
  const Tensor& vg = gamma.value();
  const Tensor& vb = beta.value();
  if (vg.shape() != Shape{ch} || vb.shape() != Shape{ch}) {
    shape_error("batchnorm", "affine parameters " + shape_string(vg.shape()) + "/" + shape_string(vb.shape()) +
                                 " for " + std::to_string(ch) + " channels");
  }
  const std::size_t count = batch * inner;
  std::vector<double> mu(ch), invstd(ch);
  if (attrs.train) {
    if (count < 2) shape_error("batchnorm", "train mode needs more than one value per channel");
    for (std::size_t c = 0; c < ch; ++c) {
      double s = 0.0;
      for (std::size_t b = 0; b < batch; ++b) {
        const double* p = vx.data() + (b * ch + c) * inner;
        for (std::size_t i = 0; i < inner; ++i) s += p[i];
      }
      const double m = s / static_cast<double>(count);
      double v = 0.0;
      for (std::size_t b = 0; b < batch; ++b) {
        const double* p = vx.data() + (b * ch + c) * inner;
        for (std::size_t i = 0; i < inner; ++i) v += (p[i] - m) * (p[i] - m);
      }
      const double var = v / static_cast<double>(count);
      mu[c] = m;
      invstd[c] = 1.0 / std::sqrt(var + attrs.eps);
      if (attrs.update_running && attrs.running_mean && attrs.running_var) {
        const double unbiased = v / static_cast<double>(count - 1);
        (*attrs.running_mean)[c] = attrs.momentum * (*attrs.running_mean)[c] + (1.0 - attrs.momentum) * m;
        (*attrs.running_var)[c] = attrs.momentum * (*attrs.running_var)[c] + (1.0 - attrs.momentum) * unbiased;
      }
    }
  } else {
    if (!attrs.running_mean || !attrs.running_var) {
      throw Error(ErrorCode::kInvalidArgument, "batchnorm: eval mode requires running statistics");
    }
    for (std::size_t c = 0; c < ch; ++c) {
      mu[c] = (*attrs.running_mean)[c];
      invstd[c] = 1.0 / std::sqrt((*attrs.running_var)[c] + attrs.eps);
    }
  }
  Tensor out(vx.shape());
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t c = 0; c < ch; ++c) {
      const double* p = vx.data() + (b * ch + c) * inner;
      double* o = out.data() + (b * ch + c) * inner;
      const double a = vg[c] * invstd[c];
      const double shift = vb[c] - a * mu[c];
      for (std::size_t i = 0; i < inner; ++i) o[i] = a * p[i] + shift;
    }
  }
  const int ix = x.id(), ig = gamma.id();
  const bool train = attrs.train;
  return g.record(
      OpKind::kBatchNorm, {x.id(), gamma.id(), beta.id()}, std::move(out),
      [=](const Graph& gr, const Tensor& go, std::span<Tensor* const> gi) {
        const Tensor& vx = gr.value(ix);
        const Tensor& vg = gr.value(ig);
        const double n = static_cast<double>(count);
        for (std::size_t c = 0; c < ch; ++c) {
          double sum_g = 0.0, sum_gx = 0.0;
          for (std::size_t b = 0; b < batch; ++b) {
            const double* p = vx.data() + (b * ch + c) * inner;
            const double* q = go.data() + (b * ch + c) * inner;
            for (std::size_t i = 0; i < inner; ++i) {
              sum_g += q[i];
              sum_gx += q[i] * (p[i] - mu[c]) * invstd[c];
            }
          }
          if (gi[1]) (*gi[1])[c] += sum_gx;
          if (gi[2]) (*gi[2])[c] += sum_g;
          if (!gi[0]) continue;
          const double a = vg[c] * invstd[c];
          for (std::size_t b = 0; b < batch; ++b) {
            const double* p = vx.data() + (b * ch + c) * inner;
            const double* q = go.data() + (b * ch + c) * inner;
            double* d = gi[0]->data() + (b * ch + c) * inner;
            for (std::size_t i = 0; i < inner; ++i) {
              if (train) {
                const double xhat = (p[i] - mu[c]) * invstd[c];
                d[i] += a * (q[i] - sum_g / n - xhat * sum_gx / n);
              } else {
                d[i] += a * q[i];
              }
            }
          }
        }
      });
}

Var softmax(Var a, int axis_in) {
  Graph& g = *a.graph();
  const Tensor& va = a.value();
  const auto axis = static_cast<std::size_t>(normalize_axis("softmax", axis_in, va.rank()));
  const AxisSplit sp = split_at(va.shape(), axis);
  Tensor out(va.shape());
  for (std::size_t o = 0; o < sp.outer; ++o) {
    for (std::size_t i = 0; i < sp.inner; ++i) {
      const std::size_t base = o * sp.len * sp.inner + i;
      double mx = va[base];
      for (std::size_t l = 1; l < sp.len; ++l) mx = std::max(mx, va[base + l * sp.inner]);
      double s = 0.0;
      for (std::size_t l = 0; l < sp.len; ++l) {
        const double e = std::exp(va[base + l * sp.inner] - mx);
        out[base + l * sp.inner] = e;
        s += e;
      }
      for (std::size_t l = 0; l < sp.len; ++l) out[base + l * sp.inner] /= s;
    }
  }
  const int self = static_cast<int>(g.size());
  return g.record(OpKind::kSoftmax, {a.id()}, std::move(out),
                  [sp, self](const Graph& gr, const Tensor& go, std::span<Tensor* const> gi) {
                    const Tensor& y = gr.value(self);
                    double* d = gi[0]->data();
                    for (std::size_t o = 0; o < sp.outer; ++o) {
                      for (std::size_t i = 0; i < sp.inner; ++i) {
                        const std::size_t base = o * sp.len * sp.inner + i;
                        double dot = 0.0;
                        for (std::size_t l = 0; l < sp.len; ++l) dot += go[base + l * sp.inner] * y[base + l * sp.inner];
                        for (std::size_t l = 0; l < sp.len; ++l) {
                          const std::size_t k = base + l * sp.inner;
                          d[k] += y[k] * (go[k] - dot);
                        }
                      }
                    }
                  });
}

Var log_softmax(Var a, int axis_in) {
  Graph& g = *a.graph();
  const Tensor& va = a.value();
  const auto axis = static_cast<std::size_t>(normalize_axis("log-softmax", axis_in, va.rank()));
  const AxisSplit sp = split_at(va.shape(), axis);
  Tensor out(va.shape());
  for (std::size_t o = 0; o < sp.outer; ++o) {
    for (std::size_t i = 0; i < sp.inner; ++i) {
      const std::size_t base = o * sp.len * sp.inner + i;
      double mx = va[base];
      for (std::size_t l = 1; l < sp.len; ++l) mx = std::max(mx, va[base + l * sp.inner]);
      double s = 0.0;
      for (std::size_t l = 0; l < sp.len; ++l) s += std::exp(va[base + l * sp.inner] - mx);
      const double lse = mx + std::log(s);
      for (std::size_t l = 0; l < sp.len; ++l) out[base + l * sp.inner] = va[base + l * sp.inner] - lse;
    }
  }
  const int self = static_cast<int>(g.size());
  return g.record(OpKind::kLogSoftmax, {a.id()}, std::move(out),
                  [sp, self](const Graph& gr, const Tensor& go, std::span<Tensor* const> gi) {
                    const Tensor& y = gr.value(self);
                    double* d = gi[0]->data();
                    for (std::size_t o = 0; o < sp.outer; ++o) {
                      for (std::size_t i = 0; i < sp.inner; ++i) {
                        const std::size_t base = o * sp.len * sp.inner + i;
                        double s = 0.0;
                        for (std::size_t l = 0; l < sp.len; ++l) s += go[base + l * sp.inner];
                        for (std::size_t l = 0; l < sp.len; ++l) {
                          const std::size_t k = base + l * sp.inner;
                          d[k] += go[k] - std::exp(y[k]) * s;
                        }
                      }
                    }
                  });
}

Var pick(Var a, std::span<const std::size_t> indices) {
  Graph& g = *a.graph();
  const Tensor& va = a.value();
  if (va.rank() != 2 || indices.size() != va.dim(0)) {
    shape_error("pick", std::to_string(indices.size()) + " indices for " + shape_string(va.shape()));
  }
  const std::size_t rows = va.dim(0), cols = va.dim(1);
  std::vector<std::size_t> idx(indices.begin(), indices.end());
  Tensor out(Shape{rows});
  for (std::size_t r = 0; r < rows; ++r) {
    if (idx[r] >= cols) {
      shape_error("pick", "index " + std::to_string(idx[r]) + " out of range for " + std::to_string(cols) + " columns");
    }
    out[r] = va[r * cols + idx[r]];
  }
  return g.record(OpKind::kPick, {a.id()}, std::move(out),
                  [idx = std::move(idx), cols](const Graph&, const Tensor& go, std::span<Tensor* const> gi) {
                    double* d = gi[0]->data();
                    for (std::size_t r = 0; r < idx.size(); ++r) d[r * cols + idx[r]] += go[r];
                  });
}

}  // namespace zskt
