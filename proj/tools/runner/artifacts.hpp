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

#ifndef ZSKT_TOOLS_RUNNER_ARTIFACTS_HPP_
#define ZSKT_TOOLS_RUNNER_ARTIFACTS_HPP_

#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace zskt::runner {

// Git object ids: sha1("blob <n>\0" + bytes) and, for a flat directory,
// sha1 of the tree object listing every regular file except `skip`.
std::string git_blob_id(std::string_view bytes);
std::string git_tree_id(const std::string& dir, const std::vector<std::string>& skip = {});

void write_text(const std::string& path, std::string_view text);
std::string read_text(const std::string& path);

// key=value lines; blank lines and '#' comments ignored.
std::map<std::string, std::string> read_key_values(const std::string& path);
std::string format_key_values(const std::vector<std::pair<std::string, std::string>>& kv);
std::string format_number(double v);

struct Series {
  std::string label;
  std::vector<double> x, y;
  std::string color;
};

struct PlotOptions {
  std::string title, x_label, y_label;
  bool lines = true;    // false draws markers only
  bool legend = true;
  double width = 640, height = 420;
};

std::string svg_plot(const std::vector<Series>& series, const PlotOptions& opts);
std::string palette(std::size_t i);

}  // namespace zskt::runner

#endif  // ZSKT_TOOLS_RUNNER_ARTIFACTS_HPP_
