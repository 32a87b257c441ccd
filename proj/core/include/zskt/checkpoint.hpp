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

#ifndef ZSKT_CHECKPOINT_HPP_
#define ZSKT_CHECKPOINT_HPP_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "zskt/nn.hpp"
#include "zskt/tensor.hpp"

namespace zskt {

inline constexpr std::uint32_t kCheckpointVersion = 1;

enum class DType : std::uint8_t { kF32 = 0, kF64 = 1 };

struct Record {
  std::string name;
  DType dtype = DType::kF64;
  Tensor value;
};

// Layout: "ZSKT", u32 version, u32 record count, then per record u32 name
// length, name bytes, u8 dtype, u32 rank, u32 dims, raw values. All
// integers and values little-endian.
std::vector<unsigned char> encode_records(std::span<const Record> records);
std::vector<Record> decode_records(std::span<const unsigned char> bytes);

void write_records(const std::string& path, std::span<const Record> records);
std::vector<Record> read_records(const std::string& path);

// Networks store their spec in a record name, a spec digest, then every
// parameter and buffer as f64 so a round trip is bit-identical. An empty
// network stores no records.
std::vector<Record> network_records(const Network& net);
Network network_from_records(std::span<const Record> records);

void save_checkpoint(const Network& net, const std::string& path);
Network load_checkpoint(const std::string& path);

}  // namespace zskt

#endif  // ZSKT_CHECKPOINT_HPP_
