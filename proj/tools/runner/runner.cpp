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

#include "runner/runner.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <limits>
#include <mutex>
#include <thread>

#include "runner/artifacts.hpp"
#include "zskt/checkpoint.hpp"
#include "zskt/data.hpp"
#include "zskt/error.hpp"
#include "zskt/random.hpp"

namespace zskt::runner {
namespace fs = std::filesystem;

namespace {

using Metrics = std::vector<std::pair<std::string, std::string>>;

// Seed stream for generator sample dumps; 1..8 are taken by the engine.
constexpr std::uint64_t kDumpStream = 9;

struct Data {
  SplitData split;
  NormStats stats;
  bool images = false;
};

struct Context {
  const Invocation& inv;
  const ExperimentConfig& cfg;
  std::ostream& log;
  Data data;
};

[[noreturn]] void bad(const std::string& msg) { throw Error(ErrorCode::kInvalidConfig, msg); }

Data load_data(const ExperimentConfig& cfg, const Invocation& inv) {
  Data d;
  if (cfg.data.kind == "toy") {
    d.split = make_toy_blobs(cfg.data.classes, cfg.data.per_class, cfg.data.spread, cfg.data.seed);
    return d;
  }
  const std::string dir = !inv.data.empty() ? inv.data : cfg.data.dir;
  if (dir.empty()) bad("no MNIST directory: pass --data or set data.dir");
  SplitData raw = load_mnist_dir(dir);
  if (cfg.data.train_limit) raw.train = raw.train.head(std::min(cfg.data.train_limit, raw.train.size()));
  if (cfg.data.test_limit) raw.test = raw.test.head(std::min(cfg.data.test_limit, raw.test.size()));
  d.stats = compute_stats(raw.train);
  d.split.train = normalize(raw.train, d.stats);
  d.split.test = normalize(raw.test, d.stats);
  d.images = true;
  return d;
}

std::string with_seed(std::string path, std::uint64_t seed) {
  const std::string key = "{seed}";
  for (auto pos = path.find(key); pos != std::string::npos; pos = path.find(key)) {
    path.replace(pos, key.size(), std::to_string(seed));
  }
  return path;
}

Network load_net(const std::string& path, const char* flag, const std::string& command) {
  if (path.empty()) bad(command + " needs " + flag);
  return load_checkpoint(path);
}

const NetSpec& need_spec(bool present, const NetSpec& spec, const char* section, const std::string& command) {
  if (!present) bad(command + " needs a '" + section + "' section");
  return spec;
}

double test_accuracy(Network& net, const Dataset& ds) {
  if (ds.size() == 0) return std::numeric_limits<double>::quiet_NaN();
  return accuracy(net.predict(ds.inputs), ds.labels);
}

double agreement(Network& a, Network& b, const Dataset& ds) {
  if (ds.size() == 0) return std::numeric_limits<double>::quiet_NaN();
  const auto pa = argmax_rows(a.predict(ds.inputs));
  const auto pb = argmax_rows(b.predict(ds.inputs));
  std::size_t same = 0;
  for (std::size_t i = 0; i < pa.size(); ++i) same += pa[i] == pb[i];
  return static_cast<double>(same) / static_cast<double>(pa.size());
}

std::string path_in(const std::string& dir, const char* name) { return (fs::path(dir) / name).string(); }

void add(Metrics& m, const std::string& key, double v) { m.emplace_back(key, format_number(v)); }
void add(Metrics& m, const std::string& key, std::size_t v) { m.emplace_back(key, std::to_string(v)); }

void add_final_telemetry(Metrics& m, const Telemetry& t) {
  if (t.records.empty()) return;
  const TelemetryRecord& r = t.records.back();
  add(m, "final_loss_g", r.loss_g);
  add(m, "final_loss_s", r.loss_s);
  add(m, "final_t_maxprob", r.t_maxprob);
  add(m, "final_s_maxprob", r.s_maxprob);
}

void write_manifest(const Context& ctx, const std::string& dir, const std::string& seed, double wall) {
  const Invocation& inv = ctx.inv;
  write_text(path_in(dir, "config.json"), ctx.cfg.raw.dump(2) + "\n");
  Metrics m{{"command", inv.command},
            {"seed", seed},
            {"config_path", inv.config},
            {"config", ctx.cfg.raw.dump()},
            {"teacher", inv.teacher},
            {"student", inv.student},
            {"data", inv.data.empty() ? ctx.cfg.data.dir : inv.data},
            {"digest", git_tree_id(dir, {"manifest.txt"})},
            {"wall_seconds", format_number(wall)}};
  write_text(path_in(dir, "manifest.txt"), format_key_values(m));
}

// ---- seeded commands --------------------------------------------------------

void train_teacher(Context& ctx, std::uint64_t seed, const std::string& dir, Metrics& m) {
  const NetSpec& spec = need_spec(ctx.cfg.has_teacher, ctx.cfg.teacher, "teacher", ctx.inv.command);
  BaselineConfig bc = ctx.cfg.train;
  bc.seed = seed;
  TrainResult r = train_scratch(spec, ctx.data.split.train, &ctx.data.split.test, bc);
  save_checkpoint(r.net, path_in(dir, "teacher.ckpt"));
  r.telemetry.write_csv(path_in(dir, "telemetry.csv"));
  add(m, "train_accuracy", r.train_accuracy);
  add(m, "test_accuracy", r.test_accuracy);
  add(m, "steps", r.steps);
  add(m, "epochs", r.epochs);
}

NetSpec generator_for(const Context& ctx, const Shape& sample_shape) {
  double lo = 0.0, hi = 1.0;
  if (ctx.data.images) {
    lo = std::numeric_limits<double>::infinity();
    hi = -lo;
    for (std::size_t c = 0; c < ctx.data.stats.mean.size(); ++c) {
      lo = std::min(lo, normalized_value(ctx.data.stats, c, 0.0));
      hi = std::max(hi, normalized_value(ctx.data.stats, c, 1.0));
    }
  }
  return generator_spec(ctx.cfg.zeroshot.z_dim, sample_shape, ctx.cfg.gen_channels, ctx.cfg.gen_bounded, lo, hi);
}

void zeroshot(Context& ctx, std::uint64_t seed, const std::string& dir, Metrics& m) {
  if (!ctx.data.images) bad("zeroshot runs on image data; use the toy command for 2-d data");
  Network teacher = load_net(with_seed(ctx.inv.teacher, seed), "--teacher", ctx.inv.command);
  const NetSpec& sspec = need_spec(ctx.cfg.has_student, ctx.cfg.student, "student", ctx.inv.command);
  ZeroShotConfig zc = ctx.cfg.zeroshot;
  zc.seed = seed;
  ZeroShotResult r = run_zero_shot(teacher, sspec, generator_for(ctx, teacher.spec().input_shape), zc);
  save_checkpoint(r.student, path_in(dir, "student.ckpt"));
  save_checkpoint(r.generator, path_in(dir, "generator.ckpt"));
  r.telemetry.write_csv(path_in(dir, "telemetry.csv"));
  if (ctx.cfg.dump_samples > 0) {
    const Record samples{"samples", DType::kF32,
                         sample_generator(r.generator, ctx.cfg.dump_samples, derive_seed(seed, kDumpStream))};
    write_records(path_in(dir, "samples.bin"), std::span<const Record>(&samples, 1));
  }
  add(m, "test_accuracy", test_accuracy(r.student, ctx.data.split.test));
  add(m, "teacher_test_accuracy", test_accuracy(teacher, ctx.data.split.test));
  add(m, "test_agreement", agreement(r.student, teacher, ctx.data.split.test));
  add(m, "generator_updates", r.generator_updates);
  add(m, "student_updates", r.student_updates);
  add_final_telemetry(m, r.telemetry);
}

void toy(Context& ctx, std::uint64_t seed, const std::string& dir, Metrics& m) {
  if (ctx.data.images) bad("toy needs data.kind = toy");
  const Dataset& train = ctx.data.split.train;
  const Dataset& test = ctx.data.split.test;
  Network teacher;
  if (!ctx.inv.teacher.empty()) {
    teacher = load_checkpoint(with_seed(ctx.inv.teacher, seed));
  } else {
    const NetSpec& spec = need_spec(ctx.cfg.has_teacher, ctx.cfg.teacher, "teacher", ctx.inv.command);
    BaselineConfig bc = ctx.cfg.train;
    bc.seed = seed;
    teacher = train_scratch(spec, train, &test, bc).net;
  }
  const NetSpec sspec = ctx.cfg.has_student ? ctx.cfg.student : teacher.spec();
  ToyConfig tc = ctx.cfg.toy;
  tc.zs.seed = seed;
  const BoundingBox box = bounding_box(train);
  ToyResult r = run_toy_direct(teacher, sspec, box, tc);
  write_toy_csv(train, path_in(dir, "data.csv"));
  save_checkpoint(teacher, path_in(dir, "teacher.ckpt"));
  save_checkpoint(r.student, path_in(dir, "student.ckpt"));
  write_trajectory_csv(r.trajectory, path_in(dir, "trajectory.csv"));
  r.telemetry.write_csv(path_in(dir, "telemetry.csv"));
  add(m, "teacher_test_accuracy", test_accuracy(teacher, test));
  add(m, "grid_agreement", grid_agreement(teacher, r.student, box, ctx.cfg.grid));
  add(m, "test_accuracy", test_accuracy(r.student, test));
  add(m, "test_agreement", agreement(r.student, teacher, test));
  add_final_telemetry(m, r.telemetry);
}

void match_noise(Context& ctx, std::uint64_t seed, const std::string& dir, Metrics& m) {
  if (!ctx.data.images) bad("match-noise runs on image data");
  Network teacher = load_net(with_seed(ctx.inv.teacher, seed), "--teacher", ctx.inv.command);
  const NetSpec& sspec = need_spec(ctx.cfg.has_student, ctx.cfg.student, "student", ctx.inv.command);
  NoiseMatchConfig nc = ctx.cfg.noise;
  nc.seed = seed;
  NoiseMatchResult r = match_on_noise(teacher, sspec, ctx.data.stats, nc);
  save_checkpoint(r.student, path_in(dir, "student.ckpt"));
  r.telemetry.write_csv(path_in(dir, "telemetry.csv"));
  add(m, "test_accuracy", test_accuracy(r.student, ctx.data.split.test));
  add(m, "teacher_test_accuracy", test_accuracy(teacher, ctx.data.split.test));
  add(m, "test_agreement", agreement(r.student, teacher, ctx.data.split.test));
  add_final_telemetry(m, r.telemetry);
}

void add_train_result(Metrics& m, TrainResult& r) {
  add(m, "test_accuracy", r.test_accuracy);
  add(m, "train_accuracy", r.train_accuracy);
  add(m, "train_size", r.train_size);
  add(m, "steps", r.steps);
  add(m, "epochs", r.epochs);
  add(m, "agreement_before", r.agreement_before);
  add(m, "agreement_after", r.agreement_after);
}

void distill(Context& ctx, std::uint64_t seed, const std::string& dir, Metrics& m) {
  Network teacher = load_net(with_seed(ctx.inv.teacher, seed), "--teacher", ctx.inv.command);
  const NetSpec& sspec = need_spec(ctx.cfg.has_student, ctx.cfg.student, "student", ctx.inv.command);
  BaselineConfig bc = ctx.cfg.distill;
  bc.seed = seed;
  FewShotConfig few = ctx.cfg.distill_few;
  few.seed = seed;
  TrainResult r = distill_kd_at(teacher, sspec, ctx.data.split.train, &ctx.data.split.test, few, ctx.cfg.distill_kd, bc);
  save_checkpoint(r.net, path_in(dir, "student.ckpt"));
  r.telemetry.write_csv(path_in(dir, "telemetry.csv"));
  add_train_result(m, r);
  add(m, "teacher_test_accuracy", test_accuracy(teacher, ctx.data.split.test));
}

void finetune(Context& ctx, std::uint64_t seed, const std::string& dir, Metrics& m) {
  Network teacher = load_net(with_seed(ctx.inv.teacher, seed), "--teacher", ctx.inv.command);
  Network student = load_net(with_seed(ctx.inv.student, seed), "--student", ctx.inv.command);
  BaselineConfig bc = ctx.cfg.finetune;
  bc.seed = seed;
  FewShotConfig few = ctx.cfg.finetune_few;
  few.seed = seed;
  add(m, "test_accuracy_before", test_accuracy(student, ctx.data.split.test));
  TrainResult r =
      finetune_few_shot(student, teacher, ctx.data.split.train, &ctx.data.split.test, few, ctx.cfg.finetune_kd, bc);
  save_checkpoint(r.net, path_in(dir, "student.ckpt"));
  r.telemetry.write_csv(path_in(dir, "telemetry.csv"));
  add_train_result(m, r);
}

void probe(Context& ctx, std::uint64_t seed, const std::string& dir, Metrics& m) {
  // A is stepped across the boundary; B is the reference network.
  Network a = load_net(with_seed(ctx.inv.student, seed), "--student", ctx.inv.command);
  Network b = load_net(with_seed(ctx.inv.teacher, seed), "--teacher", ctx.inv.command);
  ProbeConfig pc = ctx.cfg.probe;
  if (pc.clamp && ctx.data.images) {
    // Clamp bounds are given in raw pixel units.
    pc.clamp_lo = normalized_value(ctx.data.stats, 0, pc.clamp_lo);
    pc.clamp_hi = normalized_value(ctx.data.stats, 0, pc.clamp_hi);
  }
  ProbeResult r = transition_curves(a, b, ctx.data.split.test, pc);
  const double value = mte(r.curves);
  write_curves_csv(r.curves, path_in(dir, "curves.csv"));
  write_text(path_in(dir, "mte.txt"), mte_report(r, ctx.cfg.probe, value));
  const CurveSummary s = summarize(r.curves);
  std::string csv = "step,mean_p_j_A,se_p_j_A,mean_p_j_B,se_p_j_B\n";
  for (std::size_t k = 0; k < s.mean_a.size(); ++k) {
    csv += std::to_string(k) + "," + format_number(s.mean_a[k]) + "," + format_number(s.se_a[k]) + "," +
           format_number(s.mean_b[k]) + "," + format_number(s.se_b[k]) + "\n";
  }
  write_text(path_in(dir, "curve_summary.csv"), csv);
  add(m, "mte", value);
  add(m, "curves", r.curves.size());
  add(m, "images_considered", r.images_considered);
  add(m, "images_agreeing", r.images_agreeing);
}

void noise_audit_cmd(Context& ctx, std::uint64_t seed, const std::string& dir, Metrics& m) {
  if (!ctx.data.images) bad("noise-audit runs on image data");
  const bool use_teacher = !ctx.inv.teacher.empty();
  Network net = use_teacher ? load_checkpoint(with_seed(ctx.inv.teacher, seed))
                            : load_net(with_seed(ctx.inv.student, seed), "--teacher or --student", ctx.inv.command);
  const AuditSection& a = ctx.cfg.audit;
  NoiseAuditResult r = noise_audit(net, a.images, a.pixel_lo, a.pixel_hi, ctx.data.stats, derive_seed(seed, 5));
  write_histogram_csv(r, path_in(dir, "histogram.csv"));
  add(m, "images", r.n);
  add(m, "entropy", r.entropy);
  add(m, "max_fraction", *std::max_element(r.fractions.begin(), r.fractions.end()));
}

using SeededCommand = std::function<void(Context&, std::uint64_t, const std::string&, Metrics&)>;

SeededCommand seeded_command(const std::string& name) {
  if (name == "train-teacher") return train_teacher;
  if (name == "zeroshot") return zeroshot;
  if (name == "toy") return toy;
  if (name == "match-noise") return match_noise;
  if (name == "distill") return distill;
  if (name == "finetune") return finetune;
  if (name == "probe") return probe;
  if (name == "noise-audit") return noise_audit_cmd;
  return {};
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names{"train-teacher", "zeroshot",    "toy",   "match-noise", "distill",
                                              "finetune",      "probe",       "noise-audit", "report"};
  return names;
}

std::string seed_dir_name(std::uint64_t seed) { return "seed_" + std::to_string(seed); }

void run(const Invocation& inv, std::ostream& log) {
  const auto& names = command_names();
  if (std::find(names.begin(), names.end(), inv.command) == names.end()) {
    throw Error(ErrorCode::kInvalidArgument, "unknown command '" + inv.command + "'");
  }
  const ExperimentConfig cfg = inv.config.empty() ? parse_config(nlohmann::json::object()) : load_config(inv.config);
  fs::create_directories(inv.out);

  if (inv.command == "report") {
    const auto t0 = std::chrono::steady_clock::now();
    if (cfg.report_runs.empty()) bad("report needs report.runs");
    write_report(cfg.report_runs, inv.out, log);
    Context ctx{inv, cfg, log, {}};
    write_manifest(ctx, inv.out, "", seconds_since(t0));
    return;
  }

  Context ctx{inv, cfg, log, {}};
  ctx.data = load_data(cfg, inv);
  const SeededCommand cmd = seeded_command(inv.command);
  const std::vector<std::uint64_t> seeds = inv.seed ? std::vector<std::uint64_t>{*inv.seed} : cfg.seeds;

  std::mutex log_mutex;
  auto one = [&](std::uint64_t seed) {
    const auto t0 = std::chrono::steady_clock::now();
    const std::string dir = (fs::path(inv.out) / seed_dir_name(seed)).string();
    fs::create_directories(dir);
    {
      std::lock_guard<std::mutex> lock(log_mutex);
      log << inv.command << ": seed " << seed << " -> " << dir << std::endl;
    }
    Metrics m;
    cmd(ctx, seed, dir, m);
    write_text(path_in(dir, "metrics.txt"), format_key_values(m));
    const double wall = seconds_since(t0);
    write_manifest(ctx, dir, std::to_string(seed), wall);
    std::lock_guard<std::mutex> lock(log_mutex);
    log << inv.command << ": seed " << seed << " done\n";
    for (const auto& [k, v] : m) log << "  " << k << "=" << v << "\n";
    log << "  wall_seconds=" << format_number(wall) << std::endl;
  };

  if (cfg.parallel <= 1 || seeds.size() <= 1) {
    for (std::uint64_t seed : seeds) one(seed);
    return;
  }
  // Independent runs on worker threads; the first failure is rethrown.
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::vector<std::thread> workers;
  for (std::size_t t = 0; t < std::min(cfg.parallel, seeds.size()); ++t) {
    workers.emplace_back([&] {
      for (std::size_t i = next++; i < seeds.size(); i = next++) {
        try {
          one(seeds[i]);
        } catch (...) {
          std::lock_guard<std::mutex> lock(log_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& w : workers) w.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace zskt::runner
