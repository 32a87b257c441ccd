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

#include <cstring>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "doctest.h"
#include "zskt/checkpoint.hpp"
#include "zskt/error.hpp"
#include "zskt/nn.hpp"
#include "zskt/random.hpp"

using namespace zskt;

namespace {

std::string tmp(const std::string& name) { return std::string(ZSKT_TEST_TMP) + "/ckpt_" + name; }

std::vector<unsigned char> read_bytes(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error raised");
  return ErrorCode::kIo;
}

NetSpec conv_spec() {
  NetSpec s;
  s.kind = NetKind::kConvnet;
  s.input_shape = {1, 8, 8};
  s.classes = 4;
  s.base_channels = 4;
  s.depth_multiplier = 1;
  return s;
}

}  // namespace

TEST_CASE("record layout matches the documented byte format") {
  std::vector<Record> recs{{"ab", DType::kF32, Tensor({2}, std::vector<double>{1.5, -2.0})},
                           {"c", DType::kF64, Tensor::scalar(0.25)}};
  std::vector<unsigned char> b = encode_records(recs);
  std::vector<unsigned char> expect{'Z', 'S', 'K', 'T', 1, 0, 0, 0, 2, 0, 0, 0};
  // record 1
  for (unsigned char c : {2, 0, 0, 0, int('a'), int('b'), 0, 1, 0, 0, 0, 2, 0, 0, 0}) expect.push_back(c);
  for (float f : {1.5f, -2.0f}) {
    unsigned char raw[4];
    std::memcpy(raw, &f, 4);
    expect.insert(expect.end(), raw, raw + 4);
  }
  // record 2: rank 0, no dims
  for (unsigned char c : {1, 0, 0, 0, int('c'), 1, 0, 0, 0, 0}) expect.push_back(c);
  double d = 0.25;
  unsigned char raw[8];
  std::memcpy(raw, &d, 8);
  expect.insert(expect.end(), raw, raw + 8);
  CHECK(b == expect);
  std::vector<Record> back = decode_records(b);
  REQUIRE(back.size() == 2);
  CHECK(back[0].name == "ab");
  CHECK(back[0].dtype == DType::kF32);
  CHECK(back[0].value == recs[0].value);
  CHECK(back[1].value.shape().empty());
}

TEST_CASE("empty network is a bare header") {
  Network empty;
  save_checkpoint(empty, tmp("empty.bin"));
  std::vector<unsigned char> b = read_bytes(tmp("empty.bin"));
  CHECK(b == std::vector<unsigned char>{'Z', 'S', 'K', 'T', 1, 0, 0, 0, 0, 0, 0, 0});
  Network back = load_checkpoint(tmp("empty.bin"));
  CHECK(back.parameters().empty());
}

TEST_CASE("round trip is bit-identical") {
  Rng rng(3);
  for (const NetSpec& spec : {conv_spec(), generator_spec(8, {1, 8, 8}, 16, true, -0.4, 2.8)}) {
    Network net = build_network(spec, 11);
    // Perturb buffers so they are not at their initial values.
    for (Parameter& b : net.buffers()) b.value = uniform_tensor(b.value.shape(), rng, 0.1, 2.0);
    save_checkpoint(net, tmp("net.bin"));
    Network back = load_checkpoint(tmp("net.bin"));
    CHECK(back.spec() == net.spec());
    REQUIRE(back.parameters().size() == net.parameters().size());
    for (std::size_t i = 0; i < net.parameters().size(); ++i) {
      CHECK(back.parameters()[i].name == net.parameters()[i].name);
      CHECK(back.parameters()[i].value == net.parameters()[i].value);
    }
    for (std::size_t i = 0; i < net.buffers().size(); ++i) CHECK(back.buffers()[i].value == net.buffers()[i].value);
    save_checkpoint(back, tmp("net2.bin"));
    CHECK(read_bytes(tmp("net.bin")) == read_bytes(tmp("net2.bin")));
  }
}

TEST_CASE("corrupt inputs are rejected") {
  Network net = build_network(conv_spec(), 1);
  const std::vector<unsigned char> good = encode_records(network_records(net));

  std::vector<unsigned char> b = good;
  b[0] = 'X';
  CHECK(code_of([&] { decode_records(b); }) == ErrorCode::kBadMagic);
  b = good;
  b[4] = 2;
  CHECK(code_of([&] { decode_records(b); }) == ErrorCode::kVersionMismatch);
  b = good;
  b.resize(b.size() - 1);
  CHECK(code_of([&] { decode_records(b); }) == ErrorCode::kTruncated);
  b = good;
  b.resize(6);
  CHECK(code_of([&] { decode_records(b); }) == ErrorCode::kTruncated);
  b = good;
  b.push_back(0);
  CHECK(code_of([&] { decode_records(b); }) == ErrorCode::kCountMismatch);

  // Spec digest mismatch: edit the spec record without updating the digest.
  std::vector<Record> recs = network_records(net);
  for (Record& r : recs) {
    if (r.name.rfind("meta.spec:", 0) == 0) {
      const auto pos = r.name.find("classes=4");
      REQUIRE(pos != std::string::npos);
      r.name.replace(pos, 9, "classes=5");
    }
  }
  CHECK(code_of([&] { network_from_records(recs); }) == ErrorCode::kDigestMismatch);

  recs = network_records(net);
  recs.pop_back();
  CHECK(code_of([&] { network_from_records(recs); }) == ErrorCode::kCountMismatch);
  CHECK(code_of([] { load_checkpoint(tmp("does-not-exist.bin")); }) == ErrorCode::kIo);
}

TEST_CASE("failed load leaves no partial network") {
  Network net = build_network(conv_spec(), 1);
  save_checkpoint(net, tmp("p.bin"));
  std::vector<unsigned char> b = read_bytes(tmp("p.bin"));
  b[1] = 0;
  {
    std::ofstream f(tmp("p_bad.bin"), std::ios::binary);
    f.write(reinterpret_cast<const char*>(b.data()), static_cast<std::streamsize>(b.size()));
  }
  Network out = build_network(conv_spec(), 2);
  const auto before = out.state_digest();
  CHECK_THROWS_AS(out = load_checkpoint(tmp("p_bad.bin")), Error);
  CHECK(out.state_digest() == before);
}
