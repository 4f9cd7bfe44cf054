"""Distances D[y, y'] between output vectors and their gradients.

All functions accept a single vector or a batch of row vectors; batched
inputs give one value per row.
"""
from __future__ import annotations

from enum import Enum

import numpy as np

from .errors import DomainError, ShapeError
from .numerics import as_tensor

PROB_FLOOR = 1e-7
_SUM_TOL = 1e-6


class DivergenceKind(str, Enum):
    CE = "ce"
    KL = "kl"
    QE = "qe"

    @classmethod
    def parse(cls, value) -> "DivergenceKind":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise DomainError(f"unknown divergence kind {value!r}") from None


def _check(kind: DivergenceKind, y, y_prime):
    y = as_tensor(y)
    y_prime = as_tensor(y_prime)
    if y.shape != y_prime.shape:
        raise ShapeError(f"divergence arguments differ in shape: {y.shape} vs {y_prime.shape}")
    if kind is not DivergenceKind.QE:
        for name, p in (("y", y), ("y'", y_prime)):
            if np.any(p < 0) or np.any(np.abs(p.sum(axis=-1) - 1.0) > _SUM_TOL):
                raise DomainError(f"{kind.value} needs probability vectors; {name} is not one")
    return y, y_prime


def _clamp(p):
    return np.clip(p, PROB_FLOOR, 1.0)


def div_eval(kind, y, y_prime):
    """Evaluate D[y, y'] (per row for batched input)."""
    kind = DivergenceKind.parse(kind)
    y, y_prime = _check(kind, y, y_prime)
    if kind is DivergenceKind.CE:
        return -np.sum(y * np.log(_clamp(y_prime)), axis=-1)
    if kind is DivergenceKind.KL:
        # 0 log 0 = 0
        logy = np.log(np.where(y > 0, y, 1.0))
        return np.sum(y * (logy - np.log(_clamp(y_prime))), axis=-1)
    return np.sum((y - y_prime) ** 2, axis=-1)


def div_grad(kind, y, y_prime, wrt: str = "second"):
    """Gradient of D[y, y'] with respect to ``y'`` (default) or ``y``.

    Entries of ``y'`` below the probability floor are clamped in the forward
    value, so their gradient is zero.
    """
    kind = DivergenceKind.parse(kind)
    y, y_prime = _check(kind, y, y_prime)
    if wrt not in ("first", "second"):
        raise ValueError("wrt must be 'first' or 'second'")
    if kind is DivergenceKind.QE:
        g = 2.0 * (y - y_prime)
        return g if wrt == "first" else -g
    if wrt == "second":
        live = y_prime >= PROB_FLOOR
        return np.where(live, -y / _clamp(y_prime), 0.0)
    if kind is DivergenceKind.CE:
        return -np.log(_clamp(y_prime))
    return np.log(_clamp(y)) + 1.0 - np.log(_clamp(y_prime))
