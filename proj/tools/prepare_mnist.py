#!/usr/bin/env python3
"""Build desk-scale MNIST IDX files from the npm `mnist` package's digit JSONs.

Usage: prepare_mnist.py <digits_dir> <out_dir> [per_class_train] [per_class_val]

<digits_dir> must contain 0.json .. 9.json, each {"data": [floats in [0,1]]}
flattened 784 per image. Output: desk-train-images.idx3 / desk-train-labels.idx1
and desk-val-images.idx3 / desk-val-labels.idx1, classes interleaved so every
prefix stays balanced. Pixel bytes are round(v * 255).
"""

import json
import os
import struct
import sys


def load_digit(path):
    with open(path) as f:
        flat = json.load(f)["data"]
    n = len(flat) // 784
    return [flat[i * 784:(i + 1) * 784] for i in range(n)]


def write_images(path, images):
    with open(path, "wb") as f:
        f.write(struct.pack(">IIII", 0x803, len(images), 28, 28))
        for img in images:
            f.write(bytes(min(255, max(0, round(v * 255))) for v in img))


def write_labels(path, labels):
    with open(path, "wb") as f:
        f.write(struct.pack(">II", 0x801, len(labels)))
        f.write(bytes(labels))


def main():
    digits_dir = sys.argv[1]
    out_dir = sys.argv[2]
    per_train = int(sys.argv[3]) if len(sys.argv) > 3 else 100
    per_val = int(sys.argv[4]) if len(sys.argv) > 4 else 100

    per_class = [load_digit(os.path.join(digits_dir, f"{d}.json")) for d in range(10)]
    for d, imgs in enumerate(per_class):
        if len(imgs) < per_train + per_val:
            raise SystemExit(f"digit {d}: only {len(imgs)} images, "
                             f"need {per_train + per_val}")

    os.makedirs(out_dir, exist_ok=True)
    for tag, start, count in (("train", 0, per_train), ("val", per_train, per_val)):
        images, labels = [], []
        for i in range(count):
            for d in range(10):
                images.append(per_class[d][start + i])
                labels.append(d)
        write_images(os.path.join(out_dir, f"desk-{tag}-images.idx3"), images)
        write_labels(os.path.join(out_dir, f"desk-{tag}-labels.idx1"), labels)
        print(f"{tag}: {len(images)} images")


if __name__ == "__main__":
    main()
