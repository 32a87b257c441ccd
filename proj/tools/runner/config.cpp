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

#include "runner/config.hpp"

#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <set>
#include <string_view>

#include "zskt/error.hpp"

namespace zskt::runner {
namespace {

using nlohmann::json;

[[noreturn]] void bad(const std::string& msg) { throw Error(ErrorCode::kInvalidConfig, msg); }

// Rejects keys outside `allowed`; returns the object for chaining.
const json& object_at(const json& j, const std::string& where, std::initializer_list<std::string_view> allowed) {
  if (!j.is_object()) bad(where + ": expected an object");
  const std::set<std::string_view> keys(allowed);
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!keys.count(it.key())) bad(where + ": unknown key '" + it.key() + "'");
  }
  return j;
}

template <typename T>
void read(const json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    bad(where + "." + key + ": wrong type");
  }
}

void read_count(const json& j, const char* key, std::size_t& out, const std::string& where) {
  if (!j.contains(key)) return;
  const json& v = j.at(key);
  if (!v.is_number_integer() || v.get<long long>() < 0) bad(where + "." + key + ": expected a non-negative integer");
  out = v.get<std::size_t>();
}

void read_training(const json& j, const std::string& where, BaselineConfig& c,
                   std::initializer_list<std::string_view> extra) {
  std::vector<std::string_view> allowed{"iterations", "batch",        "lr",    "schedule", "optimizer",
                                        "momentum",   "weight_decay", "shift", "log_every"};
  allowed.insert(allowed.end(), extra.begin(), extra.end());
  if (!j.is_object()) bad(where + ": expected an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (std::find(allowed.begin(), allowed.end(), it.key()) == allowed.end()) {
      bad(where + ": unknown key '" + it.key() + "'");
    }
  }
  read_count(j, "iterations", c.iterations, where);
  read_count(j, "batch", c.batch, where);
  read(j, "lr", c.lr, where);
  read_count(j, "shift", c.shift, where);
  read_count(j, "log_every", c.log_every, where);
  read(j, "momentum", c.sgd.momentum, where);
  read(j, "weight_decay", c.sgd.weight_decay, where);
  if (j.contains("schedule")) {
    const std::string s = j.at("schedule").get<std::string>();
    if (s == "cosine") c.schedule = Schedule::kCosine;
    else if (s == "step") c.schedule = Schedule::kStep;
    else if (s == "constant") c.schedule = Schedule::kConstant;
    else bad(where + ".schedule: expected cosine, step or constant");
  }
  if (j.contains("optimizer")) {
    const std::string s = j.at("optimizer").get<std::string>();
    if (s != "sgd" && s != "adam") bad(where + ".optimizer: expected sgd or adam");
    c.use_adam = s == "adam";
  }
  if (c.batch < 1) bad(where + ".batch must be >= 1");
  if (!(c.lr >= 0.0)) bad(where + ".lr must be >= 0");
}

void read_kd(const json& j, const std::string& where, FewShotConfig& few, KdConfig& kd) {
  read_count(j, "m", few.m, where);
  read(j, "tau", kd.tau, where);
  read(j, "alpha", kd.alpha, where);
  read(j, "beta", kd.beta, where);
  if (!(kd.tau > 0.0)) bad(where + ".tau must be > 0");
  if (!(kd.alpha >= 0.0 && kd.alpha <= 1.0)) bad(where + ".alpha must be in [0,1]");
  if (!(kd.beta >= 0.0)) bad(where + ".beta must be >= 0");
}

std::vector<ExtraLossConfig> read_extras(const json& j, const std::string& where) {
  if (!j.is_array()) bad(where + ": expected an array");
  std::vector<ExtraLossConfig> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const std::string w = where + "[" + std::to_string(i) + "]";
    const json& e = object_at(j[i], w, {"kind", "gamma", "sign", "augmentation", "noise_sigma", "blur_kernel"});
    ExtraLossConfig x;
    if (!e.contains("kind")) bad(w + ": missing kind");
    x.kind = extra_kind_from_name(e.at("kind").get<std::string>());
    read(e, "gamma", x.gamma, w);
    read(e, "sign", x.sign, w);
    if (e.contains("augmentation")) x.augmentation = augmentation_from_name(e.at("augmentation").get<std::string>());
    read(e, "noise_sigma", x.noise_sigma, w);
    read_count(e, "blur_kernel", x.blur_kernel, w);
    validate_extra(x);
    out.push_back(x);
  }
  return out;
}

ScheduleUnit schedule_unit_from(const std::string& s, const std::string& where) {
  if (s == "outer-iteration") return ScheduleUnit::kOuterIteration;
  if (s == "gradient-step") return ScheduleUnit::kGradientStep;
  bad(where + ": expected outer-iteration or gradient-step");
}

}  // namespace

NetSpec parse_net_spec(const json& j, const std::string& where) {
  object_at(j, where, {"kind", "input", "classes", "widths", "base_channels", "width_multiplier",
                       "depth_multiplier", "group_taps"});
  NetSpec s;
  if (!j.contains("kind")) bad(where + ": missing kind");
  try {
    s.kind = net_kind_from_name(j.at("kind").get<std::string>());
  } catch (const Error& e) {
    bad(where + ".kind: " + e.what());
  }
  if (s.kind == NetKind::kGenerator) bad(where + ": generator specs are derived, not configured");
  read(j, "input", s.input_shape, where);
  read_count(j, "classes", s.classes, where);
  read(j, "widths", s.widths, where);
  read_count(j, "base_channels", s.base_channels, where);
  read_count(j, "width_multiplier", s.width_multiplier, where);
  read_count(j, "depth_multiplier", s.depth_multiplier, where);
  read(j, "group_taps", s.group_taps, where);
  try {
    validate_spec(s);
  } catch (const Error& e) {
    bad(where + ": " + e.what());
  }
  return s;
}

json net_spec_json(const NetSpec& s) {
  json j{{"kind", std::string(net_kind_name(s.kind))}, {"input", s.input_shape}, {"classes", s.classes}};
  if (s.kind == NetKind::kMlp) {
    j["widths"] = s.widths;
  } else {
    j["base_channels"] = s.base_channels;
    j["width_multiplier"] = s.width_multiplier;
    j["depth_multiplier"] = s.depth_multiplier;
    j["group_taps"] = s.group_taps;
  }
  return j;
}

ExperimentConfig parse_config(const json& j, const std::string& base_dir) {
  object_at(j, "config", {"seeds", "parallel", "data", "teacher", "student", "generator", "train", "zeroshot", "toy", "noise",
                          "distill", "finetune", "probe", "audit", "report"});
  ExperimentConfig c;
  c.raw = j;
  c.base_dir = base_dir;
  if (j.contains("seeds")) {
    read(j, "seeds", c.seeds, "config");
    if (c.seeds.empty()) bad("config.seeds: need at least one seed");
  }
  read_count(j, "parallel", c.parallel, "config");
  if (c.parallel < 1) bad("config.parallel must be >= 1");
  if (j.contains("data")) {
    const json& d = object_at(j.at("data"), "data",
                              {"kind", "dir", "classes", "per_class", "spread", "seed", "train_limit", "test_limit"});
    read(d, "kind", c.data.kind, "data");
    if (c.data.kind != "mnist" && c.data.kind != "toy") bad("data.kind: expected mnist or toy");
    read(d, "dir", c.data.dir, "data");
    read_count(d, "classes", c.data.classes, "data");
    read_count(d, "per_class", c.data.per_class, "data");
    read(d, "spread", c.data.spread, "data");
    read(d, "seed", c.data.seed, "data");
    read_count(d, "train_limit", c.data.train_limit, "data");
    read_count(d, "test_limit", c.data.test_limit, "data");
    if (!c.data.dir.empty()) {
      std::filesystem::path p(c.data.dir);
      if (p.is_relative()) p = std::filesystem::path(base_dir) / p;
      if (!std::filesystem::is_directory(p)) bad("data.dir: '" + p.string() + "' is not a directory");
      c.data.dir = p.string();
    }
  }
  if (j.contains("teacher")) {
    c.teacher = parse_net_spec(j.at("teacher"), "teacher");
    c.has_teacher = true;
  }
  if (j.contains("student")) {
    c.student = parse_net_spec(j.at("student"), "student");
    c.has_student = true;
  }
  if (j.contains("generator")) {
    const json& g = object_at(j.at("generator"), "generator", {"channels", "bounded"});
    read_count(g, "channels", c.gen_channels, "generator");
    read(g, "bounded", c.gen_bounded, "generator");
    if (c.gen_channels < 1) bad("generator.channels must be >= 1");
  }
  if (j.contains("train")) read_training(j.at("train"), "train", c.train, {});
  if (j.contains("zeroshot")) {
    const json& z = object_at(j.at("zeroshot"), "zeroshot",
                              {"iterations", "generator_steps", "student_steps", "lr", "beta", "z_dim", "batch",
                               "resample_z", "schedule_unit", "divergence", "extras", "dump_samples"});
    ZeroShotConfig& zs = c.zeroshot;
    read_count(z, "iterations", zs.iterations, "zeroshot");
    read_count(z, "generator_steps", zs.generator_steps, "zeroshot");
    read_count(z, "student_steps", zs.student_steps, "zeroshot");
    read(z, "lr", zs.lr, "zeroshot");
    read(z, "beta", zs.beta, "zeroshot");
    read_count(z, "z_dim", zs.z_dim, "zeroshot");
    read_count(z, "batch", zs.batch, "zeroshot");
    read(z, "resample_z", zs.resample_z, "zeroshot");
    if (z.contains("schedule_unit")) {
      zs.schedule_unit = schedule_unit_from(z.at("schedule_unit").get<std::string>(), "zeroshot.schedule_unit");
    }
    if (z.contains("divergence")) zs.divergence = divergence_from_name(z.at("divergence").get<std::string>());
    if (z.contains("extras")) zs.extras = read_extras(z.at("extras"), "zeroshot.extras");
    read_count(z, "dump_samples", c.dump_samples, "zeroshot");
    validate(zs);
  }
  if (j.contains("toy")) {
    const json& t = object_at(j.at("toy"), "toy",
                              {"iterations", "generator_steps", "student_steps", "lr", "beta", "point_lr", "points",
                               "ring_inner", "ring_outer", "snapshot_every", "grid", "divergence", "extras"});
    ToyConfig& tc = c.toy;
    read_count(t, "iterations", tc.zs.iterations, "toy");
    read_count(t, "generator_steps", tc.zs.generator_steps, "toy");
    read_count(t, "student_steps", tc.zs.student_steps, "toy");
    read(t, "lr", tc.zs.lr, "toy");
    read(t, "beta", tc.zs.beta, "toy");
    read(t, "point_lr", tc.point_lr, "toy");
    read_count(t, "points", tc.points, "toy");
    read(t, "ring_inner", tc.ring_inner, "toy");
    read(t, "ring_outer", tc.ring_outer, "toy");
    read_count(t, "snapshot_every", tc.snapshot_every, "toy");
    read_count(t, "grid", c.grid, "toy");
    if (t.contains("divergence")) tc.zs.divergence = divergence_from_name(t.at("divergence").get<std::string>());
    if (t.contains("extras")) tc.zs.extras = read_extras(t.at("extras"), "toy.extras");
    validate(tc.zs);
    if (tc.points < 1) bad("toy.points must be >= 1");
    if (c.grid < 2) bad("toy.grid must be >= 2");
  }
  if (j.contains("noise")) {
    const json& n = object_at(j.at("noise"), "noise", {"steps", "batch", "lr", "kind", "log_every"});
    read_count(n, "steps", c.noise.steps, "noise");
    read_count(n, "batch", c.noise.batch, "noise");
    read(n, "lr", c.noise.lr, "noise");
    read_count(n, "log_every", c.noise.log_every, "noise");
    if (n.contains("kind")) c.noise.noise = noise_kind_from_name(n.at("kind").get<std::string>());
  }
  if (j.contains("distill")) {
    read_training(j.at("distill"), "distill", c.distill, {"m", "tau", "alpha", "beta"});
    read_kd(j.at("distill"), "distill", c.distill_few, c.distill_kd);
  }
  if (j.contains("finetune")) {
    read_training(j.at("finetune"), "finetune", c.finetune, {"m", "tau", "alpha", "beta"});
    read_kd(j.at("finetune"), "finetune", c.finetune_few, c.finetune_kd);
    if (c.finetune_few.m < 1) bad("finetune.m must be >= 1");
  }
  if (j.contains("probe")) {
    const json& p = object_at(j.at("probe"), "probe", {"k", "xi", "max_images", "clamp", "clamp_lo", "clamp_hi"});
    read_count(p, "k", c.probe.k, "probe");
    read(p, "xi", c.probe.xi, "probe");
    read_count(p, "max_images", c.probe.max_images, "probe");
    read(p, "clamp", c.probe.clamp, "probe");
    read(p, "clamp_lo", c.probe.clamp_lo, "probe");
    read(p, "clamp_hi", c.probe.clamp_hi, "probe");
    if (c.probe.k < 1) bad("probe.k must be >= 1");
    if (!(c.probe.xi > 0.0)) bad("probe.xi must be > 0");
  }
  if (j.contains("audit")) {
    const json& a = object_at(j.at("audit"), "audit", {"images", "pixel_lo", "pixel_hi"});
    read_count(a, "images", c.audit.images, "audit");
    read(a, "pixel_lo", c.audit.pixel_lo, "audit");
    read(a, "pixel_hi", c.audit.pixel_hi, "audit");
    if (c.audit.pixel_hi <= c.audit.pixel_lo) bad("audit: pixel_hi must exceed pixel_lo");
  }
  if (j.contains("report")) {
    const json& r = object_at(j.at("report"), "report", {"runs"});
    read(r, "runs", c.report_runs, "report");
    for (std::string& run : c.report_runs) {
      std::filesystem::path p(run);
      if (p.is_relative()) p = std::filesystem::path(base_dir) / p;
      run = p.string();
    }
  }
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot read config '" + path + "'");
  json j;
  try {
    j = json::parse(in, nullptr, true, /*ignore_comments=*/true);
  } catch (const json::parse_error& e) {
    bad("'" + path + "' is not valid JSON: " + e.what());
  }
  const std::string base = std::filesystem::absolute(path).parent_path().string();
  return parse_config(j, base);
}

}  // namespace zskt::runner
