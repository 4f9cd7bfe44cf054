"""Convert the digits bundled with the npm ``mnist`` package into IDX files.

Usage::

    npm pack mnist && tar xzf mnist-*.tgz
    python scripts/npm_mnist_to_idx.py package/src/digits data/mnist10k

The npm package stores 28x28 intensities rounded to three decimals, grouped
by class. Items are written in a fixed shuffled order (seed 0) so that any
prefix/suffix split mixes all classes.
"""
import gzip
import json
import struct
import sys
from pathlib import Path

import numpy as np


def main(src: str, dst: str) -> None:
    images, labels = [], []
    for digit in range(10):
        raw = np.asarray(json.loads((Path(src) / f"{digit}.json").read_text())["data"])
        n = raw.size // 784
        images.append(np.rint(raw[: n * 784].reshape(n, 784) * 255).astype(np.uint8))
        labels.append(np.full(n, digit, dtype=np.uint8))
    x = np.concatenate(images)
    y = np.concatenate(labels)
    order = np.random.default_rng(0).permutation(len(y))
    x, y = x[order], y[order]

    out = Path(dst)
    out.mkdir(parents=True, exist_ok=True)
    with gzip.GzipFile(out / "images-idx3-ubyte.gz", "wb", mtime=0) as f:
        f.write(struct.pack(">IIII", 2051, len(y), 28, 28))
        f.write(x.tobytes())
    with gzip.GzipFile(out / "labels-idx1-ubyte.gz", "wb", mtime=0) as f:
        f.write(struct.pack(">II", 2049, len(y)))
        f.write(y.tobytes())
    print(f"wrote {len(y)} items to {out}")


if __name__ == "__main__":
    main(*sys.argv[1:3])
