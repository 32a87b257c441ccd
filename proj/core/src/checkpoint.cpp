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

#include "zskt/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "zskt/error.hpp"

namespace zskt {
namespace {

constexpr char kMagic[4] = {'Z', 'S', 'K', 'T'};
constexpr std::string_view kSpecPrefix = "meta.spec:";
constexpr std::string_view kDigestName = "meta.spec_digest";
constexpr std::string_view kParamPrefix = "param.";
constexpr std::string_view kBufferPrefix = "buffer.";

void put_u32(std::vector<unsigned char>& b, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) b.push_back(static_cast<unsigned char>(v >> (8 * i)));
}

void put_u64(std::vector<unsigned char>& b, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) b.push_back(static_cast<unsigned char>(v >> (8 * i)));
}

class Reader {
 public:
  explicit Reader(std::span<const unsigned char> b) : b_(b) {}

  void need(std::size_t n, const char* what) const {
    if (pos_ + n > b_.size()) {
      throw Error(ErrorCode::kTruncated, std::string("checkpoint truncated while reading ") + what + " at byte " +
                                             std::to_string(pos_));
    }
  }
  std::uint8_t u8(const char* what) {
    need(1, what);
    return b_[pos_++];
  }
  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t{b_[pos_ + static_cast<std::size_t>(i)]} << (8 * i);
    pos_ += 4;
    return v;
  }
  std::uint64_t u64(const char* what) {
    need(8, what);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t{b_[pos_ + static_cast<std::size_t>(i)]} << (8 * i);
    pos_ += 8;
    return v;
  }
  std::span<const unsigned char> bytes(std::size_t n, const char* what) {
    need(n, what);
    auto s = b_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  std::size_t remaining() const { return b_.size() - pos_; }

 private:
  std::span<const unsigned char> b_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<unsigned char> encode_records(std::span<const Record> records) {
  std::vector<unsigned char> b(kMagic, kMagic + 4);
  put_u32(b, kCheckpointVersion);
  put_u32(b, static_cast<std::uint32_t>(records.size()));
  for (const Record& r : records) {
    put_u32(b, static_cast<std::uint32_t>(r.name.size()));
    b.insert(b.end(), r.name.begin(), r.name.end());
    b.push_back(static_cast<unsigned char>(r.dtype));
    put_u32(b, static_cast<std::uint32_t>(r.value.rank()));
    for (std::size_t d : r.value.shape()) put_u32(b, static_cast<std::uint32_t>(d));
    for (double v : r.value.values()) {
      if (r.dtype == DType::kF64) {
        put_u64(b, std::bit_cast<std::uint64_t>(v));
      } else {
        put_u32(b, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
      }
    }
  }
  return b;
}

std::vector<Record> decode_records(std::span<const unsigned char> bytes) {
  Reader r(bytes);
  const auto magic = r.bytes(4, "magic");
  if (std::memcmp(magic.data(), kMagic, 4) != 0) {
    throw Error(ErrorCode::kBadMagic, "checkpoint: bad magic bytes");
  }
  const std::uint32_t version = r.u32("version");
  if (version != kCheckpointVersion) {
    throw Error(ErrorCode::kVersionMismatch, "checkpoint: version " + std::to_string(version) + ", expected " +
                                                 std::to_string(kCheckpointVersion));
  }
  const std::uint32_t count = r.u32("record count");
  std::vector<Record> out;
  for (std::uint32_t k = 0; k < count; ++k) {
    Record rec;
    const std::uint32_t len = r.u32("name length");
    const auto name = r.bytes(len, "name");
    rec.name.assign(name.begin(), name.end());
    const std::uint8_t dtype = r.u8("dtype");
    if (dtype > 1) {
      throw Error(ErrorCode::kInvalidArgument, "checkpoint: record '" + rec.name + "' has unknown dtype " +
                                                   std::to_string(dtype));
    }
    rec.dtype = static_cast<DType>(dtype);
    const std::uint32_t rank = r.u32("rank");
    r.need(std::size_t{rank} * 4, "dims");
    Shape shape;
    for (std::uint32_t i = 0; i < rank; ++i) shape.push_back(r.u32("dims"));
    const std::size_t n = shape_size(shape);
    const std::size_t width = rec.dtype == DType::kF64 ? 8 : 4;
    if (n > r.remaining() / width) r.need(n * width, "values");
    std::vector<double> values(n);
    for (std::size_t i = 0; i < n; ++i) {
      values[i] = rec.dtype == DType::kF64 ? std::bit_cast<double>(r.u64("values"))
                                           : static_cast<double>(std::bit_cast<float>(r.u32("values")));
    }
    rec.value = Tensor(std::move(shape), std::move(values));
    out.push_back(std::move(rec));
  }
  if (r.remaining() != 0) {
    throw Error(ErrorCode::kCountMismatch, "checkpoint: " + std::to_string(r.remaining()) +
                                               " trailing bytes after the declared records");
  }
  return out;
}

void write_records(const std::string& path, std::span<const Record> records) {
  const std::vector<unsigned char> bytes = encode_records(records);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write '" + path + "'");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::kIo, "short write to '" + path + "'");
}

std::vector<Record> read_records(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open '" + path + "'");
  const std::vector<unsigned char> bytes(std::istreambuf_iterator<char>(in), {});
  return decode_records(bytes);
}

std::vector<Record> network_records(const Network& net) {
  std::vector<Record> out;
  if (net.layers().empty() && net.parameters().empty() && net.buffers().empty()) return out;
  const std::uint64_t digest = spec_digest(net.spec());
  out.push_back({std::string(kSpecPrefix) + spec_to_string(net.spec()), DType::kF64, Tensor(Shape{0})});
  out.push_back({std::string(kDigestName), DType::kF64,
                 Tensor(Shape{2}, {static_cast<double>(digest >> 32), static_cast<double>(digest & 0xFFFFFFFFu)})});
  for (const Parameter& p : net.parameters()) out.push_back({std::string(kParamPrefix) + p.name, DType::kF64, p.value});
  for (const Parameter& p : net.buffers()) out.push_back({std::string(kBufferPrefix) + p.name, DType::kF64, p.value});
  return out;
}

Network network_from_records(std::span<const Record> records) {
  if (records.empty()) return Network();
  const Record& spec_rec = records[0];
  if (spec_rec.name.rfind(kSpecPrefix, 0) != 0) {
    throw Error(ErrorCode::kInvalidSpec, "checkpoint: first record is not a network spec");
  }
  const NetSpec spec = spec_from_string(std::string_view(spec_rec.name).substr(kSpecPrefix.size()));
  if (records.size() < 2 || records[1].name != kDigestName || records[1].value.size() != 2) {
    throw Error(ErrorCode::kDigestMismatch, "checkpoint: missing spec digest record");
  }
  const std::uint64_t stored = (static_cast<std::uint64_t>(records[1].value[0]) << 32) |
                               static_cast<std::uint64_t>(records[1].value[1]);
  if (stored != spec_digest(spec)) {
    throw Error(ErrorCode::kDigestMismatch, "checkpoint: spec digest does not match the stored spec");
  }
  Network net = build_network(spec, 0);
  std::size_t assigned = 0;
  for (std::size_t i = 2; i < records.size(); ++i) {
    const Record& r = records[i];
    Parameter* target = nullptr;
    if (r.name.rfind(kParamPrefix, 0) == 0) target = net.find_parameter(r.name.substr(kParamPrefix.size()));
    else if (r.name.rfind(kBufferPrefix, 0) == 0) target = net.find_buffer(r.name.substr(kBufferPrefix.size()));
    if (!target) throw Error(ErrorCode::kCountMismatch, "checkpoint: unexpected record '" + r.name + "'");
    if (target->value.shape() != r.value.shape()) {
      throw Error(ErrorCode::kShapeMismatch, "checkpoint: record '" + r.name + "' has shape " +
                                                 shape_string(r.value.shape()) + ", network expects " +
                                                 shape_string(target->value.shape()));
    }
    target->value = r.value;
    ++assigned;
  }
  const std::size_t expected = net.parameters().size() + net.buffers().size();
  if (assigned != expected) {
    throw Error(ErrorCode::kCountMismatch, "checkpoint: " + std::to_string(assigned) + " tensors for " +
                                               std::to_string(expected) + " network slots");
  }
  return net;
}

void save_checkpoint(const Network& net, const std::string& path) {
  write_records(path, network_records(net));
}

Network load_checkpoint(const std::string& path) { return network_from_records(read_records(path)); }

}  // namespace zskt
