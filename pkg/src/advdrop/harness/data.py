"""IDX (MNIST container) reading and train/test splitting."""
from __future__ import annotations

import gzip
import os
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import ConsistencyError, FormatError

IMAGE_MAGIC = 2051
LABEL_MAGIC = 2049
DATA_ENV = "ADVDROP_DATA"


class TruncatedFileError(FormatError):
    pass


@dataclass
class Dataset:
    images: np.ndarray  # (N, rows * cols), float64 in [0, 1]
    labels: np.ndarray  # (N,), ints 0-9
    rows: int = 28
    cols: int = 28

    def __len__(self) -> int:
        return len(self.labels)

    def subset(self, idx) -> "Dataset":
        return Dataset(self.images[idx], self.labels[idx], self.rows, self.cols)


def _read_bytes(path) -> bytes:
    path = Path(path)
    with (gzip.open(path, "rb") if path.suffix == ".gz" else open(path, "rb")) as f:
        return f.read()


def _header(buf: bytes, n_fields: int, path) -> tuple[int, ...]:
    size = 4 * n_fields
    if len(buf) < size:
        raise TruncatedFileError(f"{path}: header needs {size} bytes, file has {len(buf)}")
    return struct.unpack(f">{n_fields}I", buf[:size])


def read_idx_images(path) -> np.ndarray:
    buf = _read_bytes(path)
    magic, = _header(buf, 1, path)
    if magic != IMAGE_MAGIC:
        raise FormatError(f"{path}: image magic is {magic}, expected {IMAGE_MAGIC}")
    _, n, rows, cols = _header(buf, 4, path)
    expected = n * rows * cols
    if len(buf) - 16 < expected:
        raise TruncatedFileError(f"{path}: header promises {expected} pixel bytes, found {len(buf) - 16}")
    return np.frombuffer(buf, dtype=np.uint8, count=expected, offset=16).reshape(n, rows, cols)


def read_idx_labels(path) -> np.ndarray:
    buf = _read_bytes(path)
    magic, = _header(buf, 1, path)
    if magic != LABEL_MAGIC:
        raise FormatError(f"{path}: label magic is {magic}, expected {LABEL_MAGIC}")
    _, n = _header(buf, 2, path)
    if len(buf) - 8 < n:
        raise TruncatedFileError(f"{path}: header promises {n} labels, found {len(buf) - 8}")
    labels = np.frombuffer(buf, dtype=np.uint8, count=n, offset=8)
    if labels.size and labels.max() > 9:
        raise FormatError(f"{path}: label values outside 0-9")
    return labels


def load_mnist_idx(images_path, labels_path) -> Dataset:
    """Images scaled to [0, 1] and flattened, with their labels."""
    images = read_idx_images(images_path)
    labels = read_idx_labels(labels_path)
    if len(images) != len(labels):
        raise ConsistencyError(f"{len(images)} images but {len(labels)} labels")
    n, rows, cols = images.shape
    return Dataset(images.reshape(n, rows * cols).astype(np.float64) / 255.0,
                   labels.astype(np.int64), rows, cols)


def default_data_dir() -> Path:
    """Directory holding the bundled 10,000-digit IDX files (overridable via $ADVDROP_DATA)."""
    env = os.environ.get(DATA_ENV)
    if env:
        return Path(env)
    return Path(__file__).resolve().parents[3] / "data" / "mnist10k"


def default_mnist_paths() -> tuple[Path, Path]:
    d = default_data_dir()
    return d / "images-idx3-ubyte.gz", d / "labels-idx1-ubyte.gz"


def split(ds: Dataset, n_train: int | None, n_test: int) -> tuple[Dataset, Dataset]:
    """Leading items for training, the last ``n_test`` items for testing."""
    if n_test < 0 or n_test >= len(ds):
        raise ConsistencyError(f"cannot hold out {n_test} of {len(ds)} items")
    pool = len(ds) - n_test
    n_train = pool if n_train is None else n_train
    if n_train > pool:
        raise ConsistencyError(f"n_train={n_train} exceeds the {pool} non-test items")
    return ds.subset(slice(0, n_train)), ds.subset(slice(len(ds) - n_test, len(ds)))
