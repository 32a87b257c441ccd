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

#ifndef ZSKT_TOOLS_RUNNER_CONFIG_HPP_
#define ZSKT_TOOLS_RUNNER_CONFIG_HPP_

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "zskt/baselines.hpp"
#include "zskt/engine.hpp"
#include "zskt/nn.hpp"
#include "zskt/probe.hpp"

namespace zskt::runner {

struct DataSection {
  std::string kind = "mnist";  // mnist | toy
  std::string dir;             // mnist: directory with train-/t10k- files
  std::size_t classes = 3;     // toy
  std::size_t per_class = 200;
  double spread = 0.3;
  std::uint64_t seed = 0;      // toy sampling
  std::size_t train_limit = 0;  // 0 keeps everything
  std::size_t test_limit = 0;
};

struct AuditSection {
  std::size_t images = 1000;
  int pixel_lo = 0;
  int pixel_hi = 255;
};

struct ExperimentConfig {
  nlohmann::json raw;  // as read, for the manifest echo
  std::string base_dir;  // directory of the config file; relative paths resolve here
  std::vector<std::uint64_t> seeds{0};
  std::size_t parallel = 1;  // seeds run concurrently on this many threads
  DataSection data;
  bool has_teacher = false, has_student = false;
  NetSpec teacher;
  NetSpec student;
  std::size_t gen_channels = 64;
  bool gen_bounded = true;
  BaselineConfig train;
  ZeroShotConfig zeroshot;
  std::size_t dump_samples = 64;
  ToyConfig toy = default_toy_config();
  std::size_t grid = 200;
  NoiseMatchConfig noise;
  BaselineConfig distill;
  FewShotConfig distill_few{10, 0};
  KdConfig distill_kd;
  BaselineConfig finetune = finetune_defaults();
  FewShotConfig finetune_few{100, 0};
  KdConfig finetune_kd;
  ProbeConfig probe;
  AuditSection audit;
  std::vector<std::string> report_runs;
};

// Throws kInvalidConfig on unknown keys, wrong types or bad values.
ExperimentConfig parse_config(const nlohmann::json& j, const std::string& base_dir = ".");
ExperimentConfig load_config(const std::string& path);

NetSpec parse_net_spec(const nlohmann::json& j, const std::string& where);
nlohmann::json net_spec_json(const NetSpec& spec);

}  // namespace zskt::runner

#endif  // ZSKT_TOOLS_RUNNER_CONFIG_HPP_
