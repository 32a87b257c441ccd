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

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "runner/artifacts.hpp"
#include "runner/runner.hpp"
#include "zskt/error.hpp"

namespace zskt::runner {
namespace fs = std::filesystem;

namespace {

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(const std::string& name) const {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw Error(ErrorCode::kInvalidArgument, "csv has no column '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
  }
};

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

Table read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot read '" + path + "'");
  Table t;
  std::string line;
  if (std::getline(in, line)) t.header = split(line);
  while (std::getline(in, line)) {
    if (!line.empty()) t.rows.push_back(split(line));
  }
  return t;
}

double to_double(const std::string& s) {
  if (s.empty()) return std::nan("");
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  return (end && *end == '\0') ? v : std::nan("");
}

bool is_number(const std::string& s) {
  if (s == "nan") return true;
  char* end = nullptr;
  std::strtod(s.c_str(), &end);
  return !s.empty() && end && *end == '\0';
}

// seed_* subdirectories in seed order, or the run directory itself.
std::vector<fs::path> seed_dirs(const fs::path& run) {
  if (!fs::is_directory(run)) throw Error(ErrorCode::kIo, "run directory '" + run.string() + "' does not exist");
  std::vector<std::pair<unsigned long long, fs::path>> found;
  for (const auto& e : fs::directory_iterator(run)) {
    const std::string n = e.path().filename().string();
    if (e.is_directory() && n.rfind("seed_", 0) == 0) found.emplace_back(std::strtoull(n.c_str() + 5, nullptr, 10), e.path());
  }
  std::sort(found.begin(), found.end());
  std::vector<fs::path> out;
  for (auto& [_, p] : found) out.push_back(p);
  if (out.empty()) out.push_back(run);
  return out;
}

std::string run_name(const std::string& run) {
  fs::path p(run);
  if (p.filename().empty()) p = p.parent_path();
  return p.filename().string();
}

void loss_plot(const std::string& name, const std::vector<fs::path>& dirs, const std::string& out) {
  std::vector<Series> series;
  for (const auto& d : dirs) {
    const fs::path csv = d / "telemetry.csv";
    if (!fs::exists(csv)) continue;
    const Table t = read_csv(csv.string());
    const std::size_t ci = t.column("iter"), cg = t.column("L_G"), cs = t.column("L_S");
    Series g{"L_G " + d.filename().string(), {}, {}, ""}, s{"L_S " + d.filename().string(), {}, {}, ""};
    for (const auto& r : t.rows) {
      g.x.push_back(to_double(r[ci]));
      g.y.push_back(to_double(r[cg]));
      s.x.push_back(to_double(r[ci]));
      s.y.push_back(to_double(r[cs]));
    }
    if (std::any_of(g.y.begin(), g.y.end(), [](double v) { return std::isfinite(v); })) series.push_back(g);
    series.push_back(s);
  }
  if (series.empty()) return;
  write_text((fs::path(out) / ("loss_" + name + ".svg")).string(),
             svg_plot(series, {"losses: " + name, "iteration", "loss", true, true, 640, 420}));
}

void transition_plot(const std::string& name, const std::vector<fs::path>& dirs, const std::string& out) {
  std::vector<double> sum_a, sum_b;
  std::vector<std::size_t> count;
  for (const auto& d : dirs) {
    const fs::path csv = d / "curves.csv";
    if (!fs::exists(csv)) continue;
    const Table t = read_csv(csv.string());
    const std::size_t cs = t.column("step"), ca = t.column("p_j_A"), cb = t.column("p_j_B");
    for (const auto& r : t.rows) {
      const auto k = static_cast<std::size_t>(to_double(r[cs]));
      if (k >= count.size()) sum_a.resize(k + 1), sum_b.resize(k + 1), count.resize(k + 1);
      sum_a[k] += to_double(r[ca]);
      sum_b[k] += to_double(r[cb]);
      ++count[k];
    }
  }
  if (count.empty()) return;
  Series a{"p_j network A", {}, {}, palette(0)}, b{"p_j network B", {}, {}, palette(1)};
  for (std::size_t k = 0; k < count.size(); ++k) {
    if (!count[k]) continue;
    a.x.push_back(static_cast<double>(k));
    b.x.push_back(static_cast<double>(k));
    a.y.push_back(sum_a[k] / static_cast<double>(count[k]));
    b.y.push_back(sum_b[k] / static_cast<double>(count[k]));
  }
  write_text((fs::path(out) / ("transition_" + name + ".svg")).string(),
             svg_plot({a, b}, {"transition curves: " + name, "adversarial step", "mean p_j", true, true, 640, 420}));
}

void toy_plot(const std::string& name, const std::vector<fs::path>& dirs, const std::string& out) {
  for (const auto& d : dirs) {
    const fs::path traj = d / "trajectory.csv", data = d / "data.csv";
    if (!fs::exists(traj)) continue;
    std::vector<Series> series;
    if (fs::exists(data)) {
      const Table t = read_csv(data.string());
      const std::size_t cx = t.column("x"), cy = t.column("y"), cl = t.column("label");
      std::map<std::size_t, Series> by_class;
      for (const auto& r : t.rows) {
        const auto c = static_cast<std::size_t>(to_double(r[cl]));
        Series& s = by_class[c];
        s.label = "class " + std::to_string(c);
        s.color = palette(c);
        s.x.push_back(to_double(r[cx]));
        s.y.push_back(to_double(r[cy]));
      }
      for (auto& [_, s] : by_class) series.push_back(std::move(s));
    }
    const Table t = read_csv(traj.string());
    const std::size_t cs = t.column("snapshot"), cx = t.column("x"), cy = t.column("y");
    std::size_t last = 0;
    for (const auto& r : t.rows) last = std::max(last, static_cast<std::size_t>(to_double(r[cs])));
    Series first{"pseudo points, start", {}, {}, "#999999"}, final{"pseudo points, end", {}, {}, "#000000"};
    for (const auto& r : t.rows) {
      const auto snap = static_cast<std::size_t>(to_double(r[cs]));
      const double x = to_double(r[cx]), y = to_double(r[cy]);
      if (snap == 0) first.x.push_back(x), first.y.push_back(y);
      if (snap == last) final.x.push_back(x), final.y.push_back(y);
    }
    series.push_back(first);
    series.push_back(final);
    // Markers only: the path of every point is visible as a dotted trail.
    Series trail{"", {}, {}, "#bbbbbb"};
    for (const auto& r : t.rows) {
      trail.x.push_back(to_double(r[cx]));
      trail.y.push_back(to_double(r[cy]));
    }
    series.insert(series.begin(), trail);
    write_text((fs::path(out) / ("toy_" + name + "_" + d.filename().string() + ".svg")).string(),
               svg_plot(series, {"toy trajectories: " + name, "x", "y", false, true, 560, 560}));
  }
}

}  // namespace

void write_report(const std::vector<std::string>& runs, const std::string& out, std::ostream& log) {
  fs::create_directories(out);
  std::string csv = "run,metric,mean,std,n\n";
  std::vector<std::pair<std::string, std::string>> kv;
  for (const std::string& run : runs) {
    const std::string name = run_name(run);
    const auto dirs = seed_dirs(run);
    std::map<std::string, std::vector<double>> values;
    std::vector<std::string> order;
    for (const auto& d : dirs) {
      const fs::path mpath = d / "metrics.txt";
      if (!fs::exists(mpath)) continue;
      for (const auto& [k, v] : read_key_values(mpath.string())) {
        if (!is_number(v)) continue;
        if (!values.count(k)) order.push_back(k);
        values[k].push_back(to_double(v));
      }
    }
    std::sort(order.begin(), order.end());
    for (const std::string& k : order) {
      const auto& xs = values[k];
      double mean = 0.0;
      for (double x : xs) mean += x;
      mean /= static_cast<double>(xs.size());
      // Population standard deviation over seeds.
      double var = 0.0;
      for (double x : xs) var += (x - mean) * (x - mean);
      const double sd = std::sqrt(var / static_cast<double>(xs.size()));
      csv += name + "," + k + "," + format_number(mean) + "," + format_number(sd) + "," + std::to_string(xs.size()) + "\n";
      kv.emplace_back(name + "." + k + ".mean", format_number(mean));
      kv.emplace_back(name + "." + k + ".std", format_number(sd));
      kv.emplace_back(name + "." + k + ".n", std::to_string(xs.size()));
      char line[256];
      std::snprintf(line, sizeof line, "%-24s %-24s %.6g +- %.3g (n=%zu)\n", name.c_str(), k.c_str(), mean, sd,
                    xs.size());
      log << line;
    }
    loss_plot(name, dirs, out);
    transition_plot(name, dirs, out);
    toy_plot(name, dirs, out);
  }
  write_text((fs::path(out) / "report.csv").string(), csv);
  write_text((fs::path(out) / "report.txt").string(), format_key_values(kv));
}

}  // namespace zskt::runner
