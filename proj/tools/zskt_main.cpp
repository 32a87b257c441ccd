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

// zskt: command line front end for the experiment runner.

#include <iostream>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

#include "CLI11.hpp"
#include "runner/runner.hpp"
#include "zskt/error.hpp"

int main(int argc, char** argv) {
#if defined(__GLIBC__)
  // Keep large tensor buffers on the heap instead of a fresh mmap per op.
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
#endif
  CLI::App app{"zskt experiment runner"};
  app.require_subcommand(1, 1);
  zskt::runner::Invocation inv;
  std::uint64_t seed = 0;

  for (const std::string& name : zskt::runner::command_names()) {
    CLI::App* sub = app.add_subcommand(name);
    sub->add_option("--config", inv.config, "JSON config file");
    sub->add_option("--seed", seed, "run a single seed instead of the config's list");
    sub->add_option("--out", inv.out, "output directory")->capture_default_str();
    sub->add_option("--teacher", inv.teacher, "teacher checkpoint ({seed} is substituted)");
    sub->add_option("--student", inv.student, "student checkpoint ({seed} is substituted)");
    sub->add_option("--data", inv.data, "MNIST-format IDX directory");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::cerr << "error: usage: " << e.what() << "\n";
    return 64;
  }

  CLI::App* sub = app.get_subcommands().front();
  inv.command = sub->get_name();
  if (sub->count("--seed")) inv.seed = seed;

  try {
    zskt::runner::run(inv, std::cerr);
  } catch (const zskt::Error& e) {
    std::cerr << "error: " << zskt::error_code_name(e.code()) << ": " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: internal: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
