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

// Acceptance suite: one PASS/FAIL line per primary criterion on stdout,
// progress on stderr. Exit status is nonzero when any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>

#if defined(__GLIBC__)
#include <malloc.h>
#endif
#include <map>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "runner/artifacts.hpp"
#include "runner/runner.hpp"
#include "suites.hpp"
#include "zskt/checkpoint.hpp"
#include "zskt/data.hpp"
#include "zskt/error.hpp"
#include "zskt/ops.hpp"
#include "zskt/probe.hpp"

namespace fs = std::filesystem;
using namespace zskt;
using namespace zskt::runner;
using nlohmann::json;

namespace {

// Finite-difference step for the gradient suite (fourth-order central stencil).
constexpr double kFdStep = 1e-3;

struct Options {
  std::string mnist;
  std::string configs;
  std::string work;
  bool reuse = false;
};

int failures = 0;

void verdict(const std::string& name, bool pass, const std::string& detail) {
  std::cout << (pass ? "PASS " : "FAIL ") << name << ": " << detail << std::endl;
  if (!pass) ++failures;
}

// Runs `body`, which fills `detail` and returns pass/fail; errors count as FAIL.
void criterion(const std::string& name, const std::function<bool(std::string&)>& body) {
  std::cerr << "== " << name << std::endl;
  std::string detail;
  bool pass = false;
  try {
    pass = body(detail);
  } catch (const Error& e) {
    detail += (detail.empty() ? "" : "; ") + std::string("error: ") + std::string(error_code_name(e.code())) + ": " +
              e.what();
  } catch (const std::exception& e) {
    detail += (detail.empty() ? "" : "; ") + std::string("error: ") + e.what();
  }
  verdict(name, pass, detail);
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---- runner stages ----------------------------------------------------------

struct Stage {
  std::string command;
  std::string config;
  std::string out;
  std::string teacher;
  std::string student;
  std::vector<std::uint64_t> seeds;
};

// A finished seed directory whose manifest matches this invocation and
// whose files still hash to the recorded digest.
bool up_to_date(const Stage& s, const std::string& dir) {
  const fs::path m = fs::path(dir) / "manifest.txt";
  if (!fs::exists(m)) return false;
  const auto kv = read_key_values(m.string());
  return kv.at("command") == s.command && kv.at("config_path") == s.config && kv.at("teacher") == s.teacher &&
         kv.at("student") == s.student && json::parse(kv.at("config")) == json::parse(read_text(s.config)) &&
         kv.at("digest") == git_tree_id(dir, {"manifest.txt"});
}

void run_stage(const Stage& s, const Options& opt) {
  for (std::uint64_t seed : s.seeds) {
    const std::string dir = (fs::path(s.out) / seed_dir_name(seed)).string();
    if (opt.reuse && up_to_date(s, dir)) {
      std::cerr << s.command << ": reusing " << dir << std::endl;
      continue;
    }
    Invocation inv;
    inv.command = s.command;
    inv.config = s.config;
    inv.out = s.out;
    inv.teacher = s.teacher;
    inv.student = s.student;
    inv.seed = seed;
    run(inv, std::cerr);
  }
}

std::map<std::string, std::string> metrics(const std::string& out, std::uint64_t seed) {
  return read_key_values((fs::path(out) / seed_dir_name(seed) / "metrics.txt").string());
}

double metric(const std::string& out, std::uint64_t seed, const std::string& key) {
  return std::stod(metrics(out, seed).at(key));
}

double wall(const std::string& out, std::uint64_t seed) {
  return std::stod(
      read_key_values((fs::path(out) / seed_dir_name(seed) / "manifest.txt").string()).at("wall_seconds"));
}

std::string mean_std(const std::vector<double>& xs) {
  double m = 0.0, v = 0.0;
  for (double x : xs) m += x;
  m /= static_cast<double>(xs.size());
  for (double x : xs) v += (x - m) * (x - m);
  std::ostringstream s;
  s << fmt("%.4f", m) << " +- " << fmt("%.4f", std::sqrt(v / static_cast<double>(xs.size())));
  return s.str();
}

std::string write_json(const fs::path& path, const json& j) {
  fs::create_directories(path.parent_path());
  write_text(path.string(), j.dump(2) + "\n");
  return path.string();
}

// ---- criteria ---------------------------------------------------------------

void gradient_suite() {
  criterion("gradient-suite", [](std::string& d) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto ops = testing::op_cases();
    const auto losses = testing::loss_cases();
    // Every op kind has a case whose name starts with its registered name.
    std::vector<std::string> missing;
    for (int k = static_cast<int>(OpKind::kAdd); k <= static_cast<int>(OpKind::kPick); ++k) {
      const std::string name(op_kind_name(static_cast<OpKind>(k)));
      if (std::none_of(ops.begin(), ops.end(), [&](const auto& c) { return c.name.rfind(name, 0) == 0; })) {
        missing.push_back(name);
      }
    }
    const auto a = testing::run_grad_suite(ops, 20, kFdStep, 101);
    const auto b = testing::run_grad_suite(losses, 20, kFdStep, 202);
    const double secs = seconds_since(t0);
    const auto& worst = a.worst_error >= b.worst_error ? a : b;
    d = std::to_string(a.cases) + " op cases + " + std::to_string(b.cases) + " loss cases x 20 instances, h " + fmt("%.0e", kFdStep) + ", worst " +
        fmt("%.2e", worst.worst_error) + " (" + worst.worst_case + "), " + fmt("%.1f", secs) + " s";
    for (const auto& m : missing) d += ", no case for op '" + m + "'";
    return missing.empty() && a.worst_error < 1e-4 && b.worst_error < 1e-4 && secs < 60.0;
  });
}

void loss_identities() {
  criterion("loss-identities", [](std::string& d) {
    const double gap = testing::loss_sign_identity_gap(1000, 7);
    const std::size_t violations = testing::forward_kl_violations(10000, 8);
    d = "max |L_G + KL part of L_S| over 1000 batches = " + fmt("%.3g", gap) + ", forward_kl < 0 on " +
        std::to_string(violations) + " of 10000 pairs";
    return gap <= 1e-10 && violations == 0;
  });
}

void toy(const Options& opt) {
  criterion("toy-reproduction", [&](std::string& d) {
    const json cfg = json::parse(read_text((fs::path(opt.configs) / "toy.json").string()));
    Stage s{"toy", write_json(fs::path(opt.work) / "configs" / "toy.json", cfg), (fs::path(opt.work) / "toy").string(),
            "", "", cfg.at("seeds").get<std::vector<std::uint64_t>>()};
    run_stage(s, opt);
    bool ok = s.seeds.size() >= 3;
    for (std::uint64_t seed : s.seeds) {
      const double t = metric(s.out, seed, "teacher_test_accuracy");
      const double g = metric(s.out, seed, "grid_agreement");
      const double w = wall(s.out, seed);
      d += (d.empty() ? "" : "; ") + std::string("seed ") + std::to_string(seed) + ": teacher " + fmt("%.4f", t) +
           ", grid agreement " + fmt("%.4f", g) + ", " + fmt("%.1f", w) + " s";
      ok = ok && t >= 0.98 && g >= 0.95 && w < 120.0;
    }
    return ok;
  });
}

struct MnistRuns {
  std::string config;
  std::string teacher_out, teacher_ckpt;
  std::vector<std::uint64_t> seeds;
};

MnistRuns mnist_setup(const Options& opt) {
  json cfg = json::parse(read_text((fs::path(opt.configs) / "mnist.json").string()));
  cfg["data"]["dir"] = fs::absolute(opt.mnist).string();
  MnistRuns r;
  r.config = write_json(fs::path(opt.work) / "configs" / "mnist.json", cfg);
  r.seeds = cfg.at("seeds").get<std::vector<std::uint64_t>>();
  r.teacher_out = (fs::path(opt.work) / "teacher").string();
  r.teacher_ckpt = (fs::path(r.teacher_out) / seed_dir_name(0) / "teacher.ckpt").string();
  return r;
}

void noise_matching(const Options& opt, const MnistRuns& m) {
  criterion("noise-matching", [&](std::string& d) {
    const ExperimentConfig cfg = load_config(m.config);
    run_stage({"train-teacher", m.config, m.teacher_out, "", "", {0}}, opt);
    const std::string out = (fs::path(opt.work) / "match-noise").string();
    run_stage({"match-noise", m.config, out, m.teacher_ckpt, "", {0}}, opt);
    const double t = metric(m.teacher_out, 0, "test_accuracy");
    const double s = metric(out, 0, "test_accuracy");
    const double w = wall(out, 0);
    d = "teacher " + fmt("%.4f", t) + ", noise-matched student " + fmt("%.4f", s) + " after " +
        std::to_string(cfg.noise.steps) + " steps (" + std::string(noise_kind_name(cfg.noise.noise)) + " noise), " +
        fmt("%.0f", w) + " s";
    return t >= 0.97 && s >= 0.85 && cfg.noise.steps <= 20000 && w <= 1800.0;
  });
}

void zero_shot(const Options& opt, const MnistRuns& m) {
  criterion("zero-shot-mnist", [&](std::string& d) {
    run_stage({"train-teacher", m.config, m.teacher_out, "", "", {0}}, opt);
    const std::string out = (fs::path(opt.work) / "zeroshot").string();
    run_stage({"zeroshot", m.config, out, m.teacher_ckpt, "", m.seeds}, opt);
    std::vector<double> acc;
    bool ok = m.seeds.size() >= 3;
    for (std::uint64_t seed : m.seeds) {
      acc.push_back(metric(out, seed, "test_accuracy"));
      ok = ok && acc.back() >= 0.85;
      d += fmt("%.4f", acc.back()) + " ";
    }
    d = "test accuracy per seed " + d + "(mean +- std " + mean_std(acc) + ")";
    return ok;
  });
}

void probe_identity(const Options& opt, const MnistRuns& m) {
  criterion("probe-identity-and-metric", [&](std::string& d) {
    run_stage({"train-teacher", m.config, m.teacher_out, "", "", {0}}, opt);
    Network t = load_checkpoint(m.teacher_ckpt);
    Network t2 = load_checkpoint(m.teacher_ckpt);
    const ExperimentConfig cfg = load_config(m.config);
    const SplitData raw = load_mnist_dir(opt.mnist);
    const Dataset test = normalize(raw.test, compute_stats(raw.train)).head(200);
    ProbeConfig pc = cfg.probe;
    pc.max_images = 200;
    const ProbeResult self = transition_curves(t, t2, test, pc);
    const double self_mte = mte(self.curves);

    TransitionCurve c;
    c.p_a = {0.8};
    c.p_b = {0.6};
    const double hand = mte(std::span<const TransitionCurve>(&c, 1));

    const std::size_t classes = t.spec().classes;
    bool counts = self.curves.size() == self.images_agreeing * (classes - 1);
    std::string count_detail = std::to_string(self.curves.size()) + " curves for " +
                               std::to_string(self.images_agreeing) + " agreeing images";
    // The student/teacher probes from the ordering criterion, when present.
    for (const char* run : {"probe-zeroshot", "probe-kd-at"}) {
      for (std::uint64_t seed : m.seeds) {
        const fs::path mp = fs::path(opt.work) / run / seed_dir_name(seed) / "metrics.txt";
        if (!fs::exists(mp)) continue;
        const auto kv = read_key_values(mp.string());
        counts = counts && std::stoul(kv.at("curves")) == std::stoul(kv.at("images_agreeing")) * (classes - 1);
      }
    }
    char hand_text[64];
    std::snprintf(hand_text, sizeof hand_text, "%.17g", hand);
    d = "MTE(A,A) = " + fmt("%.3g", self_mte) + " over " + std::to_string(self.curves.size()) +
        " curves; hand case = " + hand_text + " (the binary64 value of |0.8 - 0.6|); " + count_detail +
        (counts ? ", counts match" : ", count mismatch");
    return self_mte <= 1e-12 && hand == std::abs(0.8 - 0.6) && std::abs(hand - 0.2) <= 1e-15 && counts;
  });
}

void probe_ordering(const Options& opt, const MnistRuns& m) {
  criterion("probe-ordering", [&](std::string& d) {
    const ExperimentConfig cfg = load_config(m.config);
    run_stage({"train-teacher", m.config, m.teacher_out, "", "", {0}}, opt);
    const std::string zs = (fs::path(opt.work) / "zeroshot").string();
    const std::string kd = (fs::path(opt.work) / "kd-at").string();
    run_stage({"zeroshot", m.config, zs, m.teacher_ckpt, "", m.seeds}, opt);
    run_stage({"distill", m.config, kd, m.teacher_ckpt, "", m.seeds}, opt);
    const std::string pz = (fs::path(opt.work) / "probe-zeroshot").string();
    const std::string pk = (fs::path(opt.work) / "probe-kd-at").string();
    run_stage({"probe", m.config, pz, m.teacher_ckpt, zs + "/seed_{seed}/student.ckpt", m.seeds}, opt);
    run_stage({"probe", m.config, pk, m.teacher_ckpt, kd + "/seed_{seed}/student.ckpt", m.seeds}, opt);
    bool ok = m.seeds.size() >= 3 && cfg.distill_few.m == 10;
    std::vector<double> a, b;
    for (std::uint64_t seed : m.seeds) {
      a.push_back(metric(pz, seed, "mte"));
      b.push_back(metric(pk, seed, "mte"));
      ok = ok && a.back() < b.back();
      d += (d.empty() ? "" : "; ") + std::string("seed ") + std::to_string(seed) + ": zero-shot " +
           fmt("%.4f", a.back()) + " vs KD+AT " + fmt("%.4f", b.back());
    }
    d += "; xi=" + fmt("%g", cfg.probe.xi) + ", K=" + std::to_string(cfg.probe.k) + ", M=" +
         std::to_string(cfg.distill_few.m) + ", means " + mean_std(a) + " vs " + mean_std(b);
    return ok;
  });
}

std::map<std::string, std::string> artifact_bytes(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    const std::string ext = e.path().extension().string();
    if (ext == ".ckpt" || ext == ".csv" || ext == ".bin") {
      out[fs::relative(e.path(), dir).string()] = read_text(e.path().string());
    }
  }
  return out;
}

void determinism(const Options& opt) {
  criterion("determinism", [&](std::string& d) {
    const fs::path root = fs::path(opt.work) / "determinism";
    fs::remove_all(root);
    const json toy_cfg = {{"seeds", {5}},
                          {"data", {{"kind", "toy"}, {"per_class", 60}}},
                          {"teacher", {{"kind", "mlp"}, {"input", {2}}, {"classes", 3}, {"widths", {16, 16}}}},
                          {"train", {{"iterations", 200}, {"lr", 0.05}}},
                          {"toy", {{"iterations", 30}, {"points", 32}, {"snapshot_every", 10}, {"grid", 50}}}};
    json mnist_cfg = json::parse(read_text((fs::path(opt.configs) / "mnist.json").string()));
    mnist_cfg["seeds"] = {5};
    mnist_cfg["data"] = {{"kind", "mnist"}, {"dir", fs::absolute(opt.mnist).string()}, {"train_limit", 1000},
                         {"test_limit", 50}};
    mnist_cfg["train"]["iterations"] = 100;
    mnist_cfg["zeroshot"]["iterations"] = 3;
    mnist_cfg["zeroshot"]["dump_samples"] = 4;
    mnist_cfg["noise"]["steps"] = 20;
    mnist_cfg["distill"]["iterations"] = 20;
    mnist_cfg["finetune"]["iterations"] = 20;
    mnist_cfg["probe"]["max_images"] = 10;
    mnist_cfg["probe"]["k"] = 5;
    mnist_cfg["audit"]["images"] = 100;
    const std::string tc = write_json(root / "toy.json", toy_cfg);
    const std::string mc = write_json(root / "mnist.json", mnist_cfg);

    std::size_t compared = 0, commands = 0;
    std::vector<std::string> differing;
    for (const char* rep : {"a", "b"}) {
      const fs::path r = root / rep;
      const std::string teacher = (r / "teacher" / "seed_5" / "teacher.ckpt").string();
      const std::string zs = (r / "zeroshot" / "seed_5" / "student.ckpt").string();
      const std::vector<Stage> stages{
          {"toy", tc, (r / "toy").string(), "", "", {5}},
          {"train-teacher", mc, (r / "teacher").string(), "", "", {5}},
          {"zeroshot", mc, (r / "zeroshot").string(), teacher, "", {5}},
          {"match-noise", mc, (r / "match-noise").string(), teacher, "", {5}},
          {"distill", mc, (r / "distill").string(), teacher, "", {5}},
          {"finetune", mc, (r / "finetune").string(), teacher, zs, {5}},
          {"probe", mc, (r / "probe").string(), teacher, zs, {5}},
          {"noise-audit", mc, (r / "noise-audit").string(), teacher, "", {5}},
      };
      Options fresh = opt;
      fresh.reuse = false;
      for (const Stage& s : stages) run_stage(s, fresh);
      const json rep_cfg = {{"report", {{"runs", {(r / "toy").string(), (r / "zeroshot").string(),
                                                   (r / "probe").string()}}}}};
      Invocation inv;
      inv.command = "report";
      inv.config = write_json(r / "report.json", rep_cfg);
      inv.out = (r / "report").string();
      run(inv, std::cerr);
      commands = stages.size() + 1;
    }
    const auto a = artifact_bytes(root / "a"), b = artifact_bytes(root / "b");
    for (const auto& [name, bytes] : a) {
      ++compared;
      const auto it = b.find(name);
      if (it == b.end() || it->second != bytes) differing.push_back(name);
    }
    if (a.size() != b.size()) differing.push_back("(file sets differ)");
    d = std::to_string(commands) + " commands run twice, " + std::to_string(compared) +
        " checkpoints/CSVs/dumps compared, " + std::to_string(differing.size()) + " differ";
    for (const auto& n : differing) d += " " + n;
    return differing.empty() && compared >= 10;
  });
}

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  throw std::runtime_error("corrupted input was accepted");
}

void format_guards(const Options& opt) {
  criterion("format-guards", [&](std::string& d) {
    const fs::path root = fs::path(opt.work) / "formats";
    fs::remove_all(root);
    fs::create_directories(root);
    const SplitData raw = load_mnist_dir(opt.mnist);
    const Dataset small = raw.test.head(64);
    const std::string img = (root / "img").string(), lab = (root / "lab").string();
    write_idx(small, img, lab);
    const Dataset back = load_idx(img, lab);
    bool idx_round = back.labels == small.labels && back.inputs.shape() == small.inputs.shape() &&
                     std::equal(back.inputs.values().begin(), back.inputs.values().end(),
                                small.inputs.values().begin());
    // Bytes written again from the reloaded set are identical.
    write_idx(back, img + "2", lab + "2");
    idx_round = idx_round && read_text(img) == read_text(img + "2") && read_text(lab) == read_text(lab + "2");

    const std::string good_img = read_text(img), good_lab = read_text(lab);
    int idx_ok = 0;
    auto corrupt = [&](std::string ib, std::string lb, ErrorCode want) {
      write_text(img, ib);
      write_text(lab, lb);
      idx_ok += code_of([&] { load_idx(img, lab); }) == want;
    };
    std::string bad_magic = good_img;
    bad_magic[3] = 0x01;
    corrupt(bad_magic, good_lab, ErrorCode::kBadMagic);
    corrupt(good_img.substr(0, good_img.size() - 10), good_lab, ErrorCode::kTruncated);
    std::string bad_count = good_lab;
    bad_count[7] = static_cast<char>(bad_count[7] - 1);
    corrupt(good_img, bad_count.substr(0, bad_count.size() - 1), ErrorCode::kCountMismatch);
    idx_ok += code_of([&] { load_idx((root / "missing").string(), lab); }) == ErrorCode::kIo;

    NetSpec spec;
    spec.kind = NetKind::kConvnet;
    spec.input_shape = {1, 28, 28};
    spec.classes = 10;
    spec.base_channels = 4;
    const Network net = build_network(spec, 3);
    const std::string ck = (root / "net.ckpt").string();
    save_checkpoint(net, ck);
    const Network loaded = load_checkpoint(ck);
    const bool ck_round = encode_records(network_records(loaded)) == encode_records(network_records(net)) &&
                          loaded.state_digest() == net.state_digest();
    const std::string good = read_text(ck);
    int ck_ok = 0;
    auto ck_corrupt = [&](std::string bytes, ErrorCode want) {
      write_text(ck, bytes);
      ck_ok += code_of([&] { load_checkpoint(ck); }) == want;
    };
    std::string b = good;
    b[0] = 'X';
    ck_corrupt(b, ErrorCode::kBadMagic);
    b = good;
    b[4] = 9;
    ck_corrupt(b, ErrorCode::kVersionMismatch);
    ck_corrupt(good.substr(0, good.size() - 3), ErrorCode::kTruncated);
    ck_corrupt(good + std::string(1, '\0'), ErrorCode::kCountMismatch);
    auto recs = network_records(net);
    for (auto& r : recs) {
      const auto pos = r.name.find("classes=10");
      if (pos != std::string::npos) r.name.replace(pos, 10, "classes=11");
    }
    ck_ok += code_of([&] { network_from_records(recs); }) == ErrorCode::kDigestMismatch;

    d = "IDX round trip " + std::string(idx_round ? "bit-identical" : "differs") + ", " + std::to_string(idx_ok) +
        "/4 IDX corruptions rejected with the documented class; checkpoint round trip " +
        (ck_round ? "bit-identical" : "differs") + ", " + std::to_string(ck_ok) + "/5 checkpoint corruptions rejected";
    return idx_round && ck_round && idx_ok == 4 && ck_ok == 5;
  });
}

}  // namespace

int main(int argc, char** argv) {
#if defined(__GLIBC__)
  // Keep large tensor buffers on the heap instead of a fresh mmap per op.
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
#endif
  CLI::App app{"zskt acceptance suite"};
  Options opt;
  std::vector<std::string> only;
  app.add_option("--mnist", opt.mnist, "MNIST-format IDX directory")->required();
  app.add_option("--configs", opt.configs, "directory with toy.json and mnist.json")->required();
  app.add_option("--work", opt.work, "scratch directory for run outputs")->required();
  app.add_flag("--reuse", opt.reuse, "skip runs whose manifest digest still matches");
  app.add_option("--only", only, "run only the named criteria");
  CLI11_PARSE(app, argc, argv);
  // Manifests record paths; absolute ones keep --reuse independent of the cwd.
  opt.work = fs::absolute(opt.work).lexically_normal().string();
  opt.mnist = fs::absolute(opt.mnist).lexically_normal().string();
  opt.configs = fs::absolute(opt.configs).lexically_normal().string();
  fs::create_directories(opt.work);

  const auto t0 = std::chrono::steady_clock::now();
  const MnistRuns m = mnist_setup(opt);
  const std::vector<std::pair<std::string, std::function<void()>>> all{
      {"gradient-suite", [] { gradient_suite(); }},
      {"loss-identities", [] { loss_identities(); }},
      {"toy-reproduction", [&] { toy(opt); }},
      {"noise-matching", [&] { noise_matching(opt, m); }},
      {"zero-shot-mnist", [&] { zero_shot(opt, m); }},
      {"probe-ordering", [&] { probe_ordering(opt, m); }},
      {"probe-identity-and-metric", [&] { probe_identity(opt, m); }},
      {"determinism", [&] { determinism(opt); }},
      {"format-guards", [&] { format_guards(opt); }},
  };
  for (const auto& [name, fn] : all) {
    if (only.empty() || std::find(only.begin(), only.end(), name) != only.end()) fn();
  }
  std::cerr << "acceptance finished in " << fmt("%.0f", seconds_since(t0)) << " s, " << failures << " failing"
            << std::endl;
  return failures == 0 ? 0 : 1;
}
