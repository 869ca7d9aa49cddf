#!/usr/bin/env python3
"""Convert the digit subset shipped in the npm `mnist` package to IDX files.

The package (https://github.com/cazala/mnist, `npm pack mnist@1.1.0`) holds
10,000 digits as `src/digits/<d>.json`, each `{"data": [...]}` with 784
intensities per image scaled to [0, 1]. This writes the four standard IDX
files, shuffled with a fixed seed and split into train and test parts, so the
`mnist` subcommand can run where the official files are unavailable.

    python3 scripts/mnist_from_npm.py path/to/package data/mnist
"""

import argparse
import json
import random
import struct
from pathlib import Path

PIXELS = 28 * 28


def load(package: Path):
    examples = []
    for digit in range(10):
        data = json.loads((package / "src" / "digits" / f"{digit}.json").read_text())["data"]
        if len(data) % PIXELS:
            raise SystemExit(f"{digit}.json does not hold whole 28x28 images")
        for i in range(0, len(data), PIXELS):
            pixels = bytes(min(255, max(0, round(v * 255))) for v in data[i : i + PIXELS])
            examples.append((pixels, digit))
    return examples


def write_images(path: Path, images):
    with path.open("wb") as f:
        f.write(struct.pack(">IIII", 2051, len(images), 28, 28))
        for pixels in images:
            f.write(pixels)


def write_labels(path: Path, labels):
    with path.open("wb") as f:
        f.write(struct.pack(">II", 2049, len(labels)))
        f.write(bytes(labels))


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("package", type=Path, help="unpacked npm mnist package")
    parser.add_argument("out", type=Path, help="output directory")
    parser.add_argument("--test-fraction", type=float, default=0.2)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    examples = load(args.package)
    random.Random(args.seed).shuffle(examples)
    n_test = round(len(examples) * args.test_fraction)
    test, train = examples[:n_test], examples[n_test:]

    args.out.mkdir(parents=True, exist_ok=True)
    for prefix, part in (("train", train), ("t10k", test)):
        write_images(args.out / f"{prefix}-images-idx3-ubyte", [p for p, _ in part])
        write_labels(args.out / f"{prefix}-labels-idx1-ubyte", [d for _, d in part])
    print(f"wrote {len(train)} training and {len(test)} test images to {args.out}")


if __name__ == "__main__":
    main()
