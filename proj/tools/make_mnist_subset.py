#!/usr/bin/env python3
"""Build the gzipped IDX MNIST subset under data/mnist-subset/.

Source: the 5000-image MNIST sample bundled with mlxtend
(mlxtend/data/data/mnist_5k.csv.gz, 500 images per digit, BSD-3-Clause).
Writes a class-balanced 2000-image training split and a disjoint
1000-image test split in the standard IDX layout.

    pip download --no-deps mlxtend -d /tmp/mlx
    python3 tools/make_mnist_subset.py /tmp/mlx/mlxtend-*.whl data/mnist-subset
"""
import gzip
import io
import struct
import sys
import zipfile
from pathlib import Path

import numpy as np

TRAIN_PER_CLASS = 200
TEST_PER_CLASS = 100
SEED = 20220101


def write_idx(path, images, labels):
    n, side = images.shape[0], 28
    with gzip.GzipFile(path.with_name(path.name + "-images-idx3-ubyte.gz"), "wb", mtime=0) as f:
        f.write(struct.pack(">IIII", 0x00000803, n, side, side))
        f.write(images.astype(np.uint8).tobytes())
    with gzip.GzipFile(path.with_name(path.name + "-labels-idx1-ubyte.gz"), "wb", mtime=0) as f:
        f.write(struct.pack(">II", 0x00000801, n))
        f.write(labels.astype(np.uint8).tobytes())


def main():
    wheel, out = Path(sys.argv[1]), Path(sys.argv[2])
    raw = gzip.decompress(zipfile.ZipFile(wheel).read("mlxtend/data/data/mnist_5k.csv.gz"))
    table = np.loadtxt(io.BytesIO(raw), delimiter=",", dtype=np.int64)
    images, labels = table[:, :-1], table[:, -1]

    rng = np.random.default_rng(SEED)
    train_idx, test_idx = [], []
    for digit in range(10):
        idx = rng.permutation(np.flatnonzero(labels == digit))
        train_idx.extend(idx[:TRAIN_PER_CLASS])
        test_idx.extend(idx[TRAIN_PER_CLASS:TRAIN_PER_CLASS + TEST_PER_CLASS])
    train_idx = rng.permutation(train_idx)
    test_idx = rng.permutation(test_idx)

    out.mkdir(parents=True, exist_ok=True)
    write_idx(out / "train", images[train_idx], labels[train_idx])
    write_idx(out / "t10k", images[test_idx], labels[test_idx])


if __name__ == "__main__":
    main()
