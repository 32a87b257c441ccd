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

#include "runner/artifacts.hpp"

#include <openssl/sha.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "zskt/error.hpp"

namespace zskt::runner {
namespace fs = std::filesystem;

namespace {

std::array<unsigned char, SHA_DIGEST_LENGTH> sha1(std::string_view bytes) {
  std::array<unsigned char, SHA_DIGEST_LENGTH> out{};
  SHA1(reinterpret_cast<const unsigned char*>(bytes.data()), bytes.size(), out.data());
  return out;
}

std::string hex(const std::array<unsigned char, SHA_DIGEST_LENGTH>& d) {
  static const char* digits = "0123456789abcdef";
  std::string s;
  for (unsigned char c : d) {
    s += digits[c >> 4];
    s += digits[c & 15];
  }
  return s;
}

std::string object(std::string_view type, std::string_view body) {
  std::string o(type);
  o += ' ';
  o += std::to_string(body.size());
  o += '\0';
  o += body;
  return o;
}

}  // namespace

std::string git_blob_id(std::string_view bytes) { return hex(sha1(object("blob", bytes))); }

std::string git_tree_id(const std::string& dir, const std::vector<std::string>& skip) {
  std::vector<std::string> names;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    const std::string n = e.path().filename().string();
    if (std::find(skip.begin(), skip.end(), n) == skip.end()) names.push_back(n);
  }
  std::sort(names.begin(), names.end());
  std::string body;
  for (const auto& n : names) {
    body += "100644 " + n;
    body += '\0';
    const auto d = sha1(object("blob", read_text((fs::path(dir) / n).string())));
    body.append(reinterpret_cast<const char*>(d.data()), d.size());
  }
  return hex(sha1(object("tree", body)));
}

void write_text(const std::string& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write '" + path + "'");
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw Error(ErrorCode::kIo, "write failed for '" + path + "'");
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot read '" + path + "'");
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::map<std::string, std::string> read_key_values(const std::string& path) {
  std::istringstream in(read_text(path));
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw Error(ErrorCode::kInvalidArgument, "'" + path + "': not key=value: " + line);
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return kv;
}

std::string format_key_values(const std::vector<std::pair<std::string, std::string>>& kv) {
  std::string s;
  for (const auto& [k, v] : kv) s += k + "=" + v + "\n";
  return s;
}

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string palette(std::size_t i) {
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                                 "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
  return colors[i % 10];
}

namespace {

std::string esc(const std::string& s) {
  std::string o;
  for (char c : s) {
    if (c == '<') o += "&lt;";
    else if (c == '>') o += "&gt;";
    else if (c == '&') o += "&amp;";
    else o += c;
  }
  return o;
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string tick(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

}  // namespace

std::string svg_plot(const std::vector<Series>& series, const PlotOptions& o) {
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const auto& s : series) {
    for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      x0 = std::min(x0, s.x[i]);
      x1 = std::max(x1, s.x[i]);
      y0 = std::min(y0, s.y[i]);
      y1 = std::max(y1, s.y[i]);
    }
  }
  if (!std::isfinite(x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  if (x1 == x0) x1 = x0 + 1;
  if (y1 == y0) y1 = y0 + 1;
  const double pad_y = 0.05 * (y1 - y0);
  y0 -= pad_y;
  y1 += pad_y;

  const double left = 64, right = 16, top = 36, bottom = 48;
  const double pw = o.width - left - right, ph = o.height - top - bottom;
  auto px = [&](double x) { return left + (x - x0) / (x1 - x0) * pw; };
  auto py = [&](double y) { return top + (1.0 - (y - y0) / (y1 - y0)) * ph; };

  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(o.width) << "\" height=\"" << num(o.height)
    << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s << "<text x=\"" << num(o.width / 2) << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" << esc(o.title)
    << "</text>\n";
  s << "<rect x=\"" << num(left) << "\" y=\"" << num(top) << "\" width=\"" << num(pw) << "\" height=\"" << num(ph)
    << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double xv = x0 + (x1 - x0) * k / 4.0, yv = y0 + (y1 - y0) * k / 4.0;
    s << "<text x=\"" << num(px(xv)) << "\" y=\"" << num(top + ph + 14) << "\" text-anchor=\"middle\">" << tick(xv)
      << "</text>\n";
    s << "<text x=\"" << num(left - 4) << "\" y=\"" << num(py(yv) + 4) << "\" text-anchor=\"end\">" << tick(yv)
      << "</text>\n";
  }
  s << "<text x=\"" << num(left + pw / 2) << "\" y=\"" << num(o.height - 10) << "\" text-anchor=\"middle\">"
    << esc(o.x_label) << "</text>\n";
  s << "<text transform=\"translate(14," << num(top + ph / 2) << ") rotate(-90)\" text-anchor=\"middle\">"
    << esc(o.y_label) << "</text>\n";

  for (std::size_t k = 0; k < series.size(); ++k) {
    const Series& se = series[k];
    const std::string color = se.color.empty() ? palette(k) : se.color;
    if (o.lines) {
      s << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.2\" points=\"";
      for (std::size_t i = 0; i < se.x.size() && i < se.y.size(); ++i) {
        if (std::isfinite(se.x[i]) && std::isfinite(se.y[i])) s << num(px(se.x[i])) << ',' << num(py(se.y[i])) << ' ';
      }
      s << "\"/>\n";
    } else {
      for (std::size_t i = 0; i < se.x.size() && i < se.y.size(); ++i) {
        if (!std::isfinite(se.x[i]) || !std::isfinite(se.y[i])) continue;
        s << "<circle cx=\"" << num(px(se.x[i])) << "\" cy=\"" << num(py(se.y[i])) << "\" r=\"1.6\" fill=\"" << color
          << "\"/>\n";
      }
    }
  }
  if (o.legend) {
    std::size_t row = 0;
    for (std::size_t k = 0; k < series.size(); ++k) {
      if (series[k].label.empty()) continue;
      const double y = top + 12 + 14 * static_cast<double>(row++);
      const std::string color = series[k].color.empty() ? palette(k) : series[k].color;
      s << "<rect x=\"" << num(left + pw - 120) << "\" y=\"" << num(y - 8) << "\" width=\"10\" height=\"10\" fill=\""
        << color << "\"/>\n";
      s << "<text x=\"" << num(left + pw - 106) << "\" y=\"" << num(y + 1) << "\">" << esc(series[k].label)
        << "</text>\n";
    }
  }
  s << "</svg>\n";
  return s.str();
}

}  // namespace zskt::runner
