#!/usr/bin/env python3
# Copyright 2026 The zskt Authors. All Rights Reserved.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
"""Converts the digit JSON files shipped by the `mnist` npm package into
MNIST-format IDX files (train/test split).

The npm package stores 10000 MNIST digits as per-class JSON arrays of
pixel/255 values rounded to three decimals; rounding back to uint8 is exact.

    npm pack mnist && tar xzf mnist-*.tgz
    python3 tools/mnist_json_to_idx.py package/src/digits data/mnist
"""
import argparse
import json
import random
import struct
from pathlib import Path


def write_idx_images(path, images, rows, cols):
    with open(path, "wb") as f:
        f.write(struct.pack(">IIII", 0x00000803, len(images), rows, cols))
        for img in images:
            f.write(bytes(img))


def write_idx_labels(path, labels):
    with open(path, "wb") as f:
        f.write(struct.pack(">II", 0x00000801, len(labels)))
        f.write(bytes(labels))


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("digits_dir")
    ap.add_argument("out_dir")
    ap.add_argument("--test-fraction", type=float, default=0.2)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    rng = random.Random(args.seed)
    train, test = [], []
    for digit in range(10):
        data = json.loads((Path(args.digits_dir) / f"{digit}.json").read_text())["data"]
        assert len(data) % 784 == 0
        samples = []
        for k in range(len(data) // 784):
            px = [min(255, max(0, round(v * 255))) for v in data[k * 784:(k + 1) * 784]]
            samples.append((px, digit))
        rng.shuffle(samples)
        n_test = round(len(samples) * args.test_fraction)
        test += samples[:n_test]
        train += samples[n_test:]
    rng.shuffle(train)
    rng.shuffle(test)

    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for name, split in (("train", train), ("t10k", test)):
        write_idx_images(out / f"{name}-images-idx3-ubyte", [s[0] for s in split], 28, 28)
        write_idx_labels(out / f"{name}-labels-idx1-ubyte", [s[1] for s in split])
        print(f"{name}: {len(split)} samples")


if __name__ == "__main__":
    main()
