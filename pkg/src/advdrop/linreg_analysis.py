"""Regularisation identities for linear regression under FGSM and adversarial dropout.

For ``l(w) = sum_i (y_i - x_i.w)^2`` the input gradient of point ``i`` is
``-2 (y_i - x_i.w) w``. Each ``*_decomposition`` returns the objective
evaluated directly (lhs) and through its penalty-term expansion (rhs).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, ShapeError
from .numerics import as_tensor


@dataclass
class LinRegProblem:
    X: np.ndarray
    y: np.ndarray
    w: np.ndarray
    delta: float = 0.0
    k: int = 0

    def __post_init__(self):
        self.X = np.atleast_2d(as_tensor(self.X))
        self.y = np.atleast_1d(as_tensor(self.y))
        self.w = np.atleast_1d(as_tensor(self.w))
        n, d = self.X.shape
        if self.y.shape != (n,) or self.w.shape != (d,):
            raise ShapeError(f"X {self.X.shape}, y {self.y.shape}, w {self.w.shape} are inconsistent")
        if self.delta < 0:
            raise DomainError("delta must be non-negative")
        if not 0 <= self.k <= d:
            raise DomainError(f"k must lie in [0, {d}]")


def residuals(p: LinRegProblem) -> np.ndarray:
    return p.y - p.X @ p.w


def linreg_loss(p: LinRegProblem) -> float:
    r = residuals(p)
    return float(r @ r)


def input_gradients(p: LinRegProblem) -> np.ndarray:
    """Row i holds the gradient of the loss with respect to x_i."""
    return -2.0 * residuals(p)[:, None] * p.w[None, :]


def at_decomposition(p: LinRegProblem) -> tuple[float, float]:
    g = input_gradients(p)
    x_adv = p.X + p.delta * np.sign(g)
    r_adv = p.y - x_adv @ p.w
    lhs = float(r_adv @ r_adv)

    s = np.sign(g)
    gamma = s.T @ s  # sum_i of outer products sign(g_i) sign(g_i)^T
    rhs = linreg_loss(p) + float(np.sum(np.abs(p.delta * g))) + p.delta ** 2 * float(p.w @ gamma @ p.w)
    return lhs, rhs


def feature_scores(p: LinRegProblem, i: int) -> np.ndarray:
    return p.X[i] * input_gradients(p)[i]


def add_closed_form_mask(p: LinRegProblem, i: int) -> np.ndarray:
    """Adversarial dropout mask of point ``i`` with the all-ones base mask.

    Drops feature j when its score ``x_ij * dl/dx_ij`` is at most
    ``min(s_k, 0)``, ``s_k`` being the k-th lowest score. Among tied scores
    the lower indices are dropped first, so at most k features are dropped.
    """
    d = p.X.shape[1]
    mask = np.ones(d)
    if p.k == 0:
        return mask
    scores = feature_scores(p, i)
    order = np.argsort(scores, kind="stable")
    threshold = min(scores[order[p.k - 1]], 0.0)
    for j in order[: p.k]:
        if scores[j] <= threshold:
            mask[j] = 0.0
    return mask


def add_masks(p: LinRegProblem) -> np.ndarray:
    return np.stack([add_closed_form_mask(p, i) for i in range(p.X.shape[0])])


def add_decomposition(p: LinRegProblem) -> tuple[float, float]:
    masks = add_masks(p)
    r_adv = p.y - (masks * p.X) @ p.w
    lhs = float(r_adv @ r_adv)

    g = input_gradients(p)
    dropped = masks == 0
    l1 = float(np.sum(np.abs(p.X * g)[dropped]))
    z = (1.0 - masks) * p.X
    gamma = z.T @ z
    rhs = linreg_loss(p) + l1 + float(p.w @ gamma @ p.w)
    return lhs, rhs
