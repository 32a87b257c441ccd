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

#include "zskt/nn.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <map>

#include "zskt/error.hpp"
#include "zskt/ops.hpp"
#include "zskt/random.hpp"

namespace zskt {
namespace {

[[noreturn]] void invalid(const std::string& msg) { throw Error(ErrorCode::kInvalidSpec, msg); }

std::string join_sizes(const std::vector<std::size_t>& v, char sep) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += sep;
    s += std::to_string(v[i]);
  }
  return s;
}

std::vector<std::size_t> parse_sizes(std::string_view text, char sep, std::string_view key) {
  std::vector<std::size_t> out;
  if (text.empty()) return out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t end = std::min(text.find(sep, start), text.size());
    const std::string_view item = text.substr(start, end - start);
    std::size_t v = 0;
    const auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
    if (ec != std::errc() || ptr != item.data() + item.size() || item.empty()) {
      invalid("net spec: bad integer list for '" + std::string(key) + "': '" + std::string(text) + "'");
    }
    out.push_back(v);
    start = end + 1;
  }
  return out;
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_double(std::string_view text, std::string_view key) {
  const std::string s(text);
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size()) {
    invalid("net spec: bad number for '" + std::string(key) + "': '" + s + "'");
  }
  return v;
}

Layer make(LayerType type, std::string name) {
  Layer l;
  l.type = type;
  l.name = std::move(name);
  return l;
}

Layer dense(std::string name, std::size_t in, std::size_t out) {
  Layer l = make(LayerType::kDense, std::move(name));
  l.in = in;
  l.out = out;
  l.bias = true;
  return l;
}

Layer conv(std::string name, std::size_t in, std::size_t out, std::size_t k, std::size_t stride,
           std::size_t pad, bool bias) {
  Layer l = make(LayerType::kConv, std::move(name));
  l.in = in;
  l.out = out;
  l.kernel = k;
  l.stride = stride;
  l.pad = pad;
  l.bias = bias;
  return l;
}

Layer batchnorm_layer(std::string name, std::size_t channels) {
  Layer l = make(LayerType::kBatchNorm, std::move(name));
  l.in = channels;
  return l;
}

Layer tap(std::string name, bool penultimate) {
  Layer l = make(LayerType::kTap, std::move(name));
  l.penultimate = penultimate;
  return l;
}

std::vector<Layer> mlp_layers(const NetSpec& spec) {
  std::vector<Layer> layers;
  layers.push_back(make(LayerType::kFlatten, "flatten"));
  std::size_t in = shape_size(spec.input_shape);
  for (std::size_t i = 0; i < spec.widths.size(); ++i) {
    layers.push_back(dense("fc" + std::to_string(i), in, spec.widths[i]));
    layers.push_back(make(LayerType::kRelu, "relu" + std::to_string(i)));
    layers.push_back(tap("block" + std::to_string(i), false));
    in = spec.widths[i];
  }
  layers.push_back(tap("penultimate", true));
  layers.push_back(dense("logits", in, spec.classes));
  return layers;
}

std::vector<Layer> convnet_layers(const NetSpec& spec) {
  std::vector<Layer> layers;
  std::size_t in = spec.input_shape[0];
  layers.push_back(conv("stem", in, spec.base_channels, 3, 1, 1, false));
  in = spec.base_channels;
  for (std::size_t g = 0; g < 3; ++g) {
    const std::size_t ch = spec.base_channels * spec.width_multiplier << g;
    for (std::size_t b = 0; b < spec.depth_multiplier; ++b) {
      const std::string p = "g" + std::to_string(g) + "b" + std::to_string(b);
      const std::size_t stride = (b == 0 && g > 0) ? 2 : 1;
      Layer begin = make(LayerType::kBlockBegin, p + ".begin");
      layers.push_back(begin);
      layers.push_back(batchnorm_layer(p + ".bn0", in));
      layers.push_back(make(LayerType::kRelu, p + ".relu0"));
      layers.push_back(conv(p + ".conv0", in, ch, 3, stride, 1, false));
      layers.push_back(batchnorm_layer(p + ".bn1", ch));
      layers.push_back(make(LayerType::kRelu, p + ".relu1"));
      layers.push_back(conv(p + ".conv1", ch, ch, 3, 1, 1, false));
      Layer end = make(LayerType::kBlockEnd, p + ".end");
      end.in = in;
      end.out = ch;
      end.stride = stride;
      end.projection = in != ch || stride != 1;
      layers.push_back(end);
      if (!spec.group_taps || b + 1 == spec.depth_multiplier) layers.push_back(tap(p, false));
      in = ch;
    }
  }
  layers.push_back(batchnorm_layer("head.bn", in));
  layers.push_back(make(LayerType::kRelu, "head.relu"));
  layers.push_back(make(LayerType::kGlobalAvgPool, "head.pool"));
  layers.push_back(tap("penultimate", true));
  layers.push_back(dense("logits", in, spec.classes));
  return layers;
}

std::vector<Layer> generator_layers(const NetSpec& spec) {
  const std::size_t c = spec.output_shape[0], h = spec.output_shape[1], w = spec.output_shape[2];
  const std::size_t gc = spec.gen_channels;
  std::vector<Layer> layers;
  layers.push_back(dense("proj", spec.z_dim, gc * (h / 4) * (w / 4)));
  Layer r = make(LayerType::kReshape, "reshape");
  r.shape = {gc, h / 4, w / 4};
  layers.push_back(r);
  layers.push_back(make(LayerType::kUpsample2x, "up0"));
  layers.push_back(conv("conv0", gc, gc, 3, 1, 1, true));
  layers.push_back(batchnorm_layer("bn0", gc));
  layers.push_back(make(LayerType::kRelu, "relu0"));
  layers.push_back(make(LayerType::kUpsample2x, "up1"));
  layers.push_back(conv("conv1", gc, gc, 3, 1, 1, true));
  layers.push_back(batchnorm_layer("bn1", gc));
  layers.push_back(make(LayerType::kRelu, "relu1"));
  layers.push_back(conv("conv2", gc, c, 3, 1, 1, true));
  if (spec.bounded) {
    Layer t = make(LayerType::kTanh, "out");
    t.lo = spec.out_lo;
    t.hi = spec.out_hi;
    layers.push_back(t);
  }
  return layers;
}

}  // namespace

std::string_view net_kind_name(NetKind kind) {
  switch (kind) {
    case NetKind::kMlp: return "mlp";
    case NetKind::kConvnet: return "convnet";
    case NetKind::kGenerator: return "generator";
  }
  return "unknown";
}

NetKind net_kind_from_name(std::string_view name) {
  if (name == "mlp") return NetKind::kMlp;
  if (name == "convnet") return NetKind::kConvnet;
  if (name == "generator") return NetKind::kGenerator;
  invalid("unknown network kind '" + std::string(name) + "'");
}

std::string spec_to_string(const NetSpec& s) {
  std::string out;
  out += "kind=" + std::string(net_kind_name(s.kind));
  out += ";input=" + join_sizes(s.input_shape, 'x');
  out += ";classes=" + std::to_string(s.classes);
  out += ";widths=" + join_sizes(s.widths, ',');
  out += ";base=" + std::to_string(s.base_channels);
  out += ";width_multiplier=" + std::to_string(s.width_multiplier);
  out += ";depth_multiplier=" + std::to_string(s.depth_multiplier);
  out += ";group_taps=" + std::to_string(s.group_taps ? 1 : 0);
  out += ";z_dim=" + std::to_string(s.z_dim);
  out += ";output=" + join_sizes(s.output_shape, 'x');
  out += ";gen_channels=" + std::to_string(s.gen_channels);
  out += ";bounded=" + std::to_string(s.bounded ? 1 : 0);
  out += ";lo=" + format_double(s.out_lo);
  out += ";hi=" + format_double(s.out_hi);
  return out;
}

NetSpec spec_from_string(std::string_view text) {
  NetSpec s;
  std::size_t start = 0;
  while (start < text.size()) {
    const std::size_t end = std::min(text.find(';', start), text.size());
    const std::string_view item = text.substr(start, end - start);
    start = end + 1;
    const std::size_t eq = item.find('=');
    if (eq == std::string_view::npos) invalid("net spec: missing '=' in '" + std::string(item) + "'");
    const std::string_view key = item.substr(0, eq);
    const std::string_view val = item.substr(eq + 1);
    auto one = [&] {
      const auto v = parse_sizes(val, ',', key);
      if (v.size() != 1) invalid("net spec: expected one integer for '" + std::string(key) + "'");
      return v[0];
    };
    if (key == "kind") s.kind = net_kind_from_name(val);
    else if (key == "input") s.input_shape = parse_sizes(val, 'x', key);
    else if (key == "classes") s.classes = one();
    else if (key == "widths") s.widths = parse_sizes(val, ',', key);
    else if (key == "base") s.base_channels = one();
    else if (key == "width_multiplier") s.width_multiplier = one();
    else if (key == "depth_multiplier") s.depth_multiplier = one();
    else if (key == "group_taps") s.group_taps = one() != 0;
    else if (key == "z_dim") s.z_dim = one();
    else if (key == "output") s.output_shape = parse_sizes(val, 'x', key);
    else if (key == "gen_channels") s.gen_channels = one();
    else if (key == "bounded") s.bounded = one() != 0;
    else if (key == "lo") s.out_lo = parse_double(val, key);
    else if (key == "hi") s.out_hi = parse_double(val, key);
    else invalid("net spec: unknown key '" + std::string(key) + "'");
  }
  return s;
}

std::uint64_t spec_digest(const NetSpec& spec) {
  std::uint64_t h = 1469598103934665603ULL;
  for (char c : spec_to_string(spec)) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ULL;
  }
  return h;
}

void validate_spec(const NetSpec& s) {
  auto positive = [](const Shape& v) {
    for (std::size_t d : v) {
      if (d == 0) return false;
    }
    return true;
  };
  switch (s.kind) {
    case NetKind::kMlp:
      if (s.input_shape.empty() || !positive(s.input_shape)) invalid("mlp: input shape must be non-empty and positive");
      if (s.classes == 0) invalid("mlp: class count must be positive");
      if (!positive(s.widths)) invalid("mlp: hidden widths must be positive");
      return;
    case NetKind::kConvnet:
      if (s.input_shape.size() != 3 || !positive(s.input_shape)) {
        invalid("convnet: input shape must be {channels, h, w}, got " + shape_string(s.input_shape));
      }
      if (s.classes == 0) invalid("convnet: class count must be positive");
      if (s.base_channels == 0 || s.width_multiplier == 0 || s.depth_multiplier == 0) {
        invalid("convnet: base channels and multipliers must be positive");
      }
      return;
    case NetKind::kGenerator:
      if (s.z_dim == 0) invalid("generator: z_dim must be positive");
      if (s.gen_channels == 0) invalid("generator: channel count must be positive");
      if (s.output_shape.size() != 3 || !positive(s.output_shape)) {
        invalid("generator: output shape must be {channels, h, w}, got " + shape_string(s.output_shape));
      }
      if (s.output_shape[1] % 4 != 0 || s.output_shape[2] % 4 != 0) {
        invalid("generator: output h and w must be multiples of 4 (two 2x upsamplings), got " +
                shape_string(s.output_shape));
      }
      if (s.bounded && !(s.out_lo < s.out_hi)) invalid("generator: bounded output needs lo < hi");
      return;
  }
  invalid("unknown network kind");
}

std::size_t Layer::parameter_count() const {
  switch (type) {
    case LayerType::kDense: return in * out + out;
    case LayerType::kConv: return out * in * kernel * kernel + (bias ? out : 0);
    case LayerType::kBatchNorm: return 2 * in;
    case LayerType::kBlockEnd: return projection ? out * in : 0;
    default: return 0;
  }
}

Network::Network(NetSpec spec, std::vector<Layer> layers)
    : spec_(std::move(spec)), layers_(std::move(layers)) {
  for (const Layer& l : layers_) {
    param_index_.push_back(params_.size());
    buffer_index_.push_back(buffers_.size());
    switch (l.type) {
      case LayerType::kDense:
        params_.push_back({l.name + ".weight", Tensor(Shape{l.in, l.out})});
        params_.push_back({l.name + ".bias", Tensor(Shape{l.out})});
        break;
      case LayerType::kConv:
        params_.push_back({l.name + ".weight", Tensor(Shape{l.out, l.in, l.kernel, l.kernel})});
        if (l.bias) params_.push_back({l.name + ".bias", Tensor(Shape{l.out})});
        break;
      case LayerType::kBatchNorm:
        params_.push_back({l.name + ".gamma", Tensor(Shape{l.in}, 1.0)});
        params_.push_back({l.name + ".beta", Tensor(Shape{l.in}, 0.0)});
        buffers_.push_back({l.name + ".running_mean", Tensor(Shape{l.in}, 0.0)});
        buffers_.push_back({l.name + ".running_var", Tensor(Shape{l.in}, 1.0)});
        break;
      case LayerType::kBlockEnd:
        if (l.projection) params_.push_back({l.name + ".shortcut", Tensor(Shape{l.out, l.in, 1, 1})});
        break;
      default:
        break;
    }
  }
  std::map<std::string, int> seen;
  for (const Parameter& p : params_) {
    if (seen[p.name]++) invalid("duplicate parameter name '" + p.name + "'");
  }
}

Network initialize(Network net, std::uint64_t seed) {
  Rng rng(seed);
  for (std::size_t i = 0; i < net.layers_.size(); ++i) {
    const Layer& l = net.layers_[i];
    const std::size_t p = net.param_index_[i];
    auto he = [&](Tensor& t, std::size_t fan_in) {
      const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
      t = uniform_tensor(t.shape(), rng, -bound, bound);
    };
    switch (l.type) {
      case LayerType::kDense: he(net.params_[p].value, l.in); break;
      case LayerType::kConv: he(net.params_[p].value, l.in * l.kernel * l.kernel); break;
      case LayerType::kBlockEnd:
        if (l.projection) he(net.params_[p].value, l.in);
        break;
      default: break;
    }
  }
  return net;
}

Parameter* Network::find_parameter(std::string_view name) {
  for (Parameter& p : params_) {
    if (p.name == name) return &p;
  }
  return nullptr;
}

Parameter* Network::find_buffer(std::string_view name) {
  for (Parameter& p : buffers_) {
    if (p.name == name) return &p;
  }
  return nullptr;
}

std::size_t Network::parameter_count() const {
  std::size_t n = 0;
  for (const Parameter& p : params_) n += p.value.size();
  return n;
}

std::size_t Network::tap_count() const { return tap_names().size(); }

std::size_t Network::conv_count() const {
  std::size_t n = 0;
  for (const Layer& l : layers_) n += l.type == LayerType::kConv;
  return n;
}

std::vector<std::string> Network::tap_names() const {
  std::vector<std::string> names;
  for (const Layer& l : layers_) {
    if (l.type == LayerType::kTap && !l.penultimate) names.push_back(l.name);
  }
  return names;
}

std::uint64_t Network::state_digest() const {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](std::uint64_t v) {
    h ^= v;
    h *= 1099511628211ULL;
  };
  for (const Parameter& p : params_) mix(tensor_digest(p.value));
  for (const Parameter& p : buffers_) mix(tensor_digest(p.value));
  return h;
}

std::vector<Var> Network::bind(Graph& graph, bool requires_grad) const {
  std::vector<Var> vars;
  vars.reserve(params_.size());
  for (const Parameter& p : params_) vars.push_back(graph.external(p.value, requires_grad));
  return vars;
}

ForwardVars Network::forward(Graph& g, Var x, std::span<const Var> params, const ForwardOptions& options) {
  if (params.size() != params_.size()) {
    throw Error(ErrorCode::kInvalidArgument, "forward: " + std::to_string(params.size()) +
                                                 " parameter handles for " + std::to_string(params_.size()) +
                                                 " parameters");
  }
  const Shape& in_shape = spec_.kind == NetKind::kGenerator ? Shape{spec_.z_dim} : spec_.input_shape;
  const Shape& xs = x.value().shape();
  if (xs.size() != in_shape.size() + 1 || !std::equal(in_shape.begin(), in_shape.end(), xs.begin() + 1)) {
    throw Error(ErrorCode::kShapeMismatch, "forward: " + std::string(net_kind_name(spec_.kind)) + " expects [B" +
                                               (in_shape.empty() ? "" : "x") + join_sizes(in_shape, 'x') +
                                               "], got " + shape_string(xs));
  }
  const std::size_t batch = xs[0];
  ForwardVars out;
  std::vector<Var> residual;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const Layer& l = layers_[i];
    const std::size_t p = param_index_[i];
    switch (l.type) {
      case LayerType::kDense:
        x = add(matmul(x, params[p]), params[p + 1]);
        break;
      case LayerType::kConv:
        x = conv2d(x, params[p], l.bias ? params[p + 1] : Var(), l.stride, l.pad);
        break;
      case LayerType::kBatchNorm: {
        BatchNormAttrs a;
        a.train = options.train;
        a.update_running = options.train && options.update_running;
        a.running_mean = &buffers_[buffer_index_[i]].value;
        a.running_var = &buffers_[buffer_index_[i] + 1].value;
        x = batchnorm(x, params[p], params[p + 1], a);
        break;
      }
      case LayerType::kRelu:
        x = relu(x);
        break;
      case LayerType::kTanh:
        x = add(scale(tanh(x), 0.5 * (l.hi - l.lo)), g.constant(Tensor::scalar(0.5 * (l.hi + l.lo))));
        break;
      case LayerType::kUpsample2x:
        x = upsample_nearest2x(x);
        break;
      case LayerType::kReshape: {
        Shape s{batch};
        s.insert(s.end(), l.shape.begin(), l.shape.end());
        x = reshape(x, s);
        break;
      }
      case LayerType::kFlatten:
        x = reshape(x, Shape{batch, x.value().size() / std::max<std::size_t>(batch, 1)});
        break;
      case LayerType::kGlobalAvgPool: {
        const Shape& s = x.value().shape();
        x = mean(reshape(x, Shape{s[0], s[1], s[2] * s[3]}), 2);
        break;
      }
      case LayerType::kBlockBegin:
        residual.push_back(x);
        break;
      case LayerType::kBlockEnd: {
        Var shortcut = residual.back();
        residual.pop_back();
        if (l.projection) shortcut = conv2d(shortcut, params[p], Var(), l.stride, 0);
        x = add(x, shortcut);
        break;
      }
      case LayerType::kTap:
        if (l.penultimate) {
          out.penultimate = x;
        } else if (x.value().rank() == 2) {
          out.blocks.push_back(reshape(x, Shape{batch, x.value().dim(1), 1, 1}));
        } else {
          out.blocks.push_back(x);
        }
        break;
    }
  }
  out.output = x;
  return out;
}

Tensor Network::predict(const Tensor& batch, std::size_t chunk) {
  const std::size_t n = batch.rank() ? batch.dim(0) : 0;
  std::vector<Tensor> parts;
  for (std::size_t start = 0; start < n; start += chunk) {
    Graph g(/*recording=*/false);
    const std::vector<Var> params = bind(g, false);
    const Var x = g.constant(batch.slice_rows(start, std::min(n, start + chunk)));
    parts.push_back(forward(g, x, params, ForwardOptions{}).output.value());
  }
  if (parts.size() == 1) return parts[0];
  if (parts.empty()) {
    Shape s{0};
    if (spec_.kind == NetKind::kGenerator) s.insert(s.end(), spec_.output_shape.begin(), spec_.output_shape.end());
    else s.push_back(spec_.classes);
    return Tensor(s);
  }
  Shape s = parts[0].shape();
  s[0] = n;
  std::vector<double> values;
  values.reserve(shape_size(s));
  for (const Tensor& t : parts) values.insert(values.end(), t.values().begin(), t.values().end());
  return Tensor(s, std::move(values));
}

Network build_classifier(const NetSpec& spec, std::uint64_t seed) {
  if (spec.kind == NetKind::kGenerator) invalid("build_classifier: spec kind must be mlp or convnet");
  validate_spec(spec);
  return initialize(Network(spec, spec.kind == NetKind::kMlp ? mlp_layers(spec) : convnet_layers(spec)), seed);
}

Network build_generator(const NetSpec& spec, std::uint64_t seed) {
  if (spec.kind != NetKind::kGenerator) invalid("build_generator: spec kind must be generator");
  validate_spec(spec);
  return initialize(Network(spec, generator_layers(spec)), seed);
}

Network build_network(const NetSpec& spec, std::uint64_t seed) {
  return spec.kind == NetKind::kGenerator ? build_generator(spec, seed) : build_classifier(spec, seed);
}

NetSpec generator_spec(std::size_t z_dim, const Shape& output_shape, std::size_t channels, bool bounded,
                       double lo, double hi) {
  NetSpec s;
  s.kind = NetKind::kGenerator;
  s.z_dim = z_dim;
  s.output_shape = output_shape;
  s.gen_channels = channels;
  s.bounded = bounded;
  s.out_lo = lo;
  s.out_hi = hi;
  return s;
}

std::pair<Tensor, ActivationSet> forward_with_activations(Network& net, const Tensor& batch) {
  Graph g(/*recording=*/false);
  const std::vector<Var> params = net.bind(g, false);
  const ForwardVars f = net.forward(g, g.constant(batch), params, ForwardOptions{});
  ActivationSet acts;
  const std::vector<std::string> names = net.tap_names();
  for (std::size_t i = 0; i < f.blocks.size(); ++i) acts.blocks.emplace_back(names[i], f.blocks[i].value());
  if (f.penultimate.valid()) acts.penultimate = f.penultimate.value();
  return {f.output.value(), std::move(acts)};
}

std::vector<std::size_t> argmax_rows(const Tensor& logits) {
  if (logits.rank() != 2) {
    throw Error(ErrorCode::kShapeMismatch, "argmax_rows: expected rank 2, got " + shape_string(logits.shape()));
  }
  const std::size_t rows = logits.dim(0), cols = logits.dim(1);
  std::vector<std::size_t> out(rows, 0);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 1; c < cols; ++c) {
      if (logits[r * cols + c] > logits[r * cols + out[r]]) out[r] = c;
    }
  }
  return out;
}

double accuracy(const Tensor& logits, std::span<const std::size_t> labels) {
  const std::vector<std::size_t> pred = argmax_rows(logits);
  if (pred.size() != labels.size()) {
    throw Error(ErrorCode::kShapeMismatch, "accuracy: " + std::to_string(pred.size()) + " predictions for " +
                                               std::to_string(labels.size()) + " labels");
  }
  if (pred.empty()) return 0.0;
  std::size_t hit = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) hit += pred[i] == labels[i];
  return static_cast<double>(hit) / static_cast<double>(pred.size());
}

}  // namespace zskt
