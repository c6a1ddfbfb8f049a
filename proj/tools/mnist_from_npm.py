#!/usr/bin/env python3
"""Convert the digit subset bundled in the `mnist` npm package into IDX files.

The package stores 10000 MNIST digits as per-class JSON arrays of pixel
intensities in [0, 1] rounded to three decimals. This script rebuilds the
8-bit pixels, splits each class 80/20 into train/test, shuffles each split
with a fixed seed and writes the four standard IDX files.

Usage:
    npm pack mnist && tar xzf mnist-*.tgz
    python3 tools/mnist_from_npm.py package/src/digits data/mnist
"""
import argparse
import json
import random
import struct
from pathlib import Path

SIDE = 28


def write_images(path, images):
    with open(path, "wb") as f:
        f.write(struct.pack(">IIII", 0x00000803, len(images), SIDE, SIDE))
        for img in images:
            f.write(bytes(img))


def write_labels(path, labels):
    with open(path, "wb") as f:
        f.write(struct.pack(">II", 0x00000801, len(labels)))
        f.write(bytes(labels))


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("digits_dir", type=Path)
    ap.add_argument("out_dir", type=Path)
    ap.add_argument("--train-fraction", type=float, default=0.8)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    train, test = [], []
    for digit in range(10):
        raw = json.loads((args.digits_dir / f"{digit}.json").read_text())["data"]
        count = len(raw) // (SIDE * SIDE)
        cut = int(round(count * args.train_fraction))
        for k in range(count):
            px = raw[k * SIDE * SIDE:(k + 1) * SIDE * SIDE]
            img = [min(255, max(0, int(round(v * 255)))) for v in px]
            (train if k < cut else test).append((img, digit))

    rng = random.Random(args.seed)
    rng.shuffle(train)
    rng.shuffle(test)

    args.out_dir.mkdir(parents=True, exist_ok=True)
    for name, split in (("train", train), ("t10k", test)):
        write_images(args.out_dir / f"{name}-images-idx3-ubyte", [s[0] for s in split])
        write_labels(args.out_dir / f"{name}-labels-idx1-ubyte", [s[1] for s in split])
        print(f"{name}: {len(split)} samples")


if __name__ == "__main__":
    main()
