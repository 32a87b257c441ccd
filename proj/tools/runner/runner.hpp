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

#ifndef ZSKT_TOOLS_RUNNER_RUNNER_HPP_
#define ZSKT_TOOLS_RUNNER_RUNNER_HPP_

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "runner/config.hpp"

namespace zskt::runner {

// One CLI call. Paths in teacher/student may contain "{seed}", replaced by
// the seed of each run.
struct Invocation {
  std::string command;
  std::string config;  // empty: built-in defaults
  std::optional<std::uint64_t> seed;  // replaces the config's seed list
  std::string out = "out";
  std::string teacher;
  std::string student;
  std::string data;  // overrides data.dir
};

const std::vector<std::string>& command_names();

// Runs the command, writing artifacts under inv.out (seeded commands use
// out/seed_<s>/). Progress goes to `log`. Throws zskt::Error.
void run(const Invocation& inv, std::ostream& log);

// Report over run directories; exposed for tests.
void write_report(const std::vector<std::string>& runs, const std::string& out, std::ostream& log);

std::string seed_dir_name(std::uint64_t seed);

}  // namespace zskt::runner

#endif  // ZSKT_TOOLS_RUNNER_RUNNER_HPP_
