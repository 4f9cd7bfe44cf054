"""Hidden-unit activation statistics of a one-hidden-layer ReLU autoencoder."""
from __future__ import annotations

import json
import logging
import math
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..adversarial import Batch, LossSpec, assemble_objective
from ..errors import ConfigurationError, TrainingDiverged
from ..network import AdamState, LayerSpec, SplitNetwork, adam_step, atomic_write_text
from ..numerics import RngStream
from .data import Dataset

MODES = ("none", "dropout", "add")
# lowest bin collects everything below 1e-3 (including exact zeros), last bin is open-ended
HIST_EDGES = np.concatenate([[0.0], np.logspace(-3, 1, 9), [np.inf]])

log = logging.getLogger(__name__)


@dataclass
class SparsityReport:
    edges: np.ndarray
    counts: np.ndarray
    unit_means: np.ndarray
    global_mean: float
    n_items: int
    reconstruction_error: float | None = None

    def to_dict(self) -> dict:
        return {
            "edges": [float(e) if math.isfinite(e) else None for e in self.edges],
            "counts": [int(c) for c in self.counts],
            "unit_means": [float(m) for m in self.unit_means],
            "global_mean": self.global_mean,
            "n_items": self.n_items,
            "reconstruction_error": self.reconstruction_error,
        }


def autoencoder(hidden: int = 256, keep_prob: float = 1.0, n_in: int = 784, seed: int = 0,
                rng: RngStream | None = None) -> SplitNetwork:
    specs = [
        LayerSpec("dense", units=hidden),
        LayerSpec("relu"),
        LayerSpec("adversarial_dropout_slot", keep_prob=keep_prob),
        LayerSpec("dense", units=n_in),
    ]
    return SplitNetwork(specs, (n_in,), seed=seed, rng=rng)


def mode_loss(mode: str) -> tuple[float, LossSpec]:
    """Slot keep probability and objective for a sparsity study mode."""
    if mode == "none":
        return 1.0, LossSpec(objective="plain", supervised_loss="qe", divergence="qe")
    if mode == "dropout":
        return 0.5, LossSpec(objective="plain", supervised_loss="qe", divergence="qe")
    if mode == "add":
        return 0.5, LossSpec(objective="sadd", supervised_loss="qe", divergence="qe", lam=0.2, delta=0.3)
    raise ConfigurationError(f"unknown sparsity mode {mode!r}; expected one of {MODES}")


def hidden_activations(model: SplitNetwork, x) -> np.ndarray:
    if model.slot_index is None:
        raise ConfigurationError("model has no designated hidden layer (adversarial dropout slot)")
    return model.under(x, train=False)


def sparsity_report(model: SplitNetwork, data, n_items: int) -> SparsityReport:
    """Histogram and means of hidden activations over the first ``n_items`` items.

    ``data`` is a :class:`Dataset` or an array of inputs.
    """
    x = data.images if isinstance(data, Dataset) else np.asarray(data, dtype=np.float64)
    if n_items < 1 or n_items > len(x):
        raise ValueError(f"n_items must lie in [1, {len(x)}]")
    h = hidden_activations(model, x[:n_items])
    counts, _ = np.histogram(np.abs(h), bins=HIST_EDGES)
    unit_means = h.mean(axis=0)
    return SparsityReport(edges=HIST_EDGES.copy(), counts=counts, unit_means=unit_means,
                          global_mean=float(h.mean()), n_items=n_items)


def reconstruction_error(model: SplitNetwork, x) -> float:
    """Mean over items of the summed squared reconstruction error."""
    out = model.predict(x)
    return float(np.mean(np.sum((out - x) ** 2, axis=1)))


def train_autoencoder(mode: str, train_x: np.ndarray, *, seed: int = 0, epochs: int = 10,
                      batch: int = 128, lr: float = 0.001, hidden: int = 256) -> SplitNetwork:
    keep, spec = mode_loss(mode)
    root = RngStream(seed)
    model = autoencoder(hidden, keep, train_x.shape[1], rng=root.child(1))
    order_rng, step_rng = root.child(0), root.child(2)
    state = AdamState()
    n = len(train_x)
    for epoch in range(epochs):
        perm = order_rng.permutation(n)
        total = 0.0
        for i in range(0, n, batch):
            xb = train_x[perm[i:i + batch]]
            res = assemble_objective(model, Batch(xb, xb), spec, step_rng)
            if not math.isfinite(res.total):
                raise TrainingDiverged(f"non-finite loss in epoch {epoch}")
            params, state = adam_step(model.params, res.grads, state, lr, 0.9, 0.999)
            model.set_params(params)
            total += res.total * len(xb)
        log.info("%s epoch %d loss %.4f", mode, epoch + 1, total / n)
    return model


def run_sparsity(mode: str, data: Dataset, out_dir=None, *, seed: int = 0, epochs: int = 10,
                 n_train: int = 9000, n_eval: int = 1000) -> SparsityReport:
    """Train on the leading ``n_train`` items, report on the ``n_eval`` items after them."""
    if n_train + n_eval > len(data):
        raise ConfigurationError(f"need {n_train + n_eval} items, dataset has {len(data)}")
    t0 = time.perf_counter()
    model = train_autoencoder(mode, data.images[:n_train], seed=seed, epochs=epochs)
    held = data.images[n_train:n_train + n_eval]
    rep = sparsity_report(model, held, n_eval)
    rep.reconstruction_error = reconstruction_error(model, held)
    if out_dir is not None:
        doc = {"mode": mode, "seed": seed, "epochs": epochs, "n_train": n_train, **rep.to_dict()}
        atomic_write_text(Path(out_dir) / f"sparsity_{mode}.json", json.dumps(doc, indent=2))
    log.info("%s: global mean %.4f, reconstruction %.3f (%.1fs)", mode, rep.global_mean,
             rep.reconstruction_error, time.perf_counter() - t0)
    return rep
