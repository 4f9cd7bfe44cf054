"""Dense float64 tensors, seeded random streams and noise samplers.

Tensors are plain ``numpy.ndarray`` objects of dtype float64. Random streams
wrap the counter-based Philox generator so that a stream is fully determined
by its seed and the sequence of calls made on it.
"""
from __future__ import annotations

import numpy as np

from .errors import DomainError, ShapeError

DTYPE = np.float64


def as_tensor(a) -> np.ndarray:
    return np.asarray(a, dtype=DTYPE)


def check_finite(a: np.ndarray, what: str = "tensor") -> np.ndarray:
    if not np.all(np.isfinite(a)):
        raise DomainError(f"{what} contains non-finite entries")
    return a


def matmul(a, b) -> np.ndarray:
    """Rank-2 matrix product with explicit shape checking."""
    a = as_tensor(a)
    b = as_tensor(b)
    if a.ndim != 2 or b.ndim != 2:
        raise ShapeError(f"matmul expects rank-2 operands, got {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul inner dimensions differ: {a.shape} x {b.shape}")
    return check_finite(a @ b, "matmul result")


class RngStream:
    """Seeded, single-owner random stream backed by Philox.

    ``child(i)`` derives an independent stream from this stream's seed
    without consuming any draws, so data-loading streams never perturb the
    training stream.
    """

    def __init__(self, seed: int, _key=None):
        self.seed = int(seed)
        key = _key if _key is not None else np.random.SeedSequence(self.seed).generate_state(2, np.uint64)
        self._key = np.asarray(key, dtype=np.uint64)
        self._bitgen = np.random.Philox(key=self._key)
        self._gen = np.random.Generator(self._bitgen)

    @property
    def counter(self) -> tuple[int, ...]:
        return tuple(int(c) for c in self._bitgen.state["state"]["counter"])

    def child(self, index: int) -> "RngStream":
        ss = np.random.SeedSequence(self.seed, spawn_key=(int(index),))
        return RngStream(self.seed, _key=ss.generate_state(2, np.uint64))

    def uniform(self, shape) -> np.ndarray:
        return self._gen.random(shape, dtype=DTYPE)

    def normal(self, shape) -> np.ndarray:
        return self._gen.standard_normal(shape, dtype=DTYPE)

    def integers(self, low: int, high: int, size=None):
        return self._gen.integers(low, high, size=size)

    def permutation(self, n: int) -> np.ndarray:
        return self._gen.permutation(n)

    def choice(self, n: int, size: int, replace: bool = False) -> np.ndarray:
        return self._gen.choice(n, size=size, replace=replace)


def sample_bernoulli_mask(rng: RngStream, dim, keep_prob: float) -> np.ndarray:
    """Binary mask whose entries are 1 independently with probability ``keep_prob``.

    ``dim`` may be an int or a shape tuple (e.g. ``(batch, H)``).
    """
    if not 0.0 <= keep_prob <= 1.0:
        raise DomainError(f"keep_prob must lie in [0, 1], got {keep_prob}")
    return (rng.uniform(dim) < keep_prob).astype(DTYPE)


def sample_gaussian(rng: RngStream, shape, sigma: float) -> np.ndarray:
    if sigma < 0:
        raise DomainError(f"sigma must be non-negative, got {sigma}")
    return sigma * rng.normal(shape)
