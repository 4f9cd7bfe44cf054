"""Distances between two dropout conditions.

Masks are binary vectors; every distance here counts differing units, which
is the squared Euclidean distance of the binary vectors.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, ShapeError


def _pair(eps1, eps2):
    a = np.asarray(eps1)
    b = np.asarray(eps2)
    if a.shape != b.shape:
        raise ShapeError(f"masks differ in shape: {a.shape} vs {b.shape}")
    if not (np.isin(a, (0, 1)).all() and np.isin(b, (0, 1)).all()):
        raise DomainError("masks must be binary")
    return a.astype(bool), b.astype(bool)


@dataclass(frozen=True)
class MaskPair:
    eps1: tuple
    eps2: tuple
    n_lower: int
    n_upper: int

    def __post_init__(self):
        _pair(self.eps1, self.eps2)
        if self.n_lower <= 0 or self.n_upper <= 0:
            raise DomainError("layer widths must be positive")


def hamming(eps1, eps2) -> int:
    a, b = _pair(eps1, eps2)
    return int(np.count_nonzero(a != b))


def graph_edit_distance(pair: MaskPair) -> int:
    """Edge insertions/deletions turning one dropped network into the other.

    Every unit that is kept in one network and dropped in the other carries
    ``n_lower`` incoming and ``n_upper`` outgoing edges.
    """
    return (pair.n_lower + pair.n_upper) * hamming(pair.eps1, pair.eps2)


def jaccard_distance(eps1, eps2) -> float:
    a, b = _pair(eps1, eps2)
    union = np.count_nonzero(a | b)
    if union == 0:
        raise DomainError("Jaccard distance is undefined for two all-zero masks")
    return (union - np.count_nonzero(a & b)) / union
