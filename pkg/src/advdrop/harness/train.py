"""Training loop, weight schedule and metrics persistence."""
from __future__ import annotations

import csv
import io
import json
import logging
import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from ..adversarial import Batch, assemble_objective, one_hot
from ..errors import ConfigurationError, TrainingDiverged
from ..network import AdamState, SplitNetwork, adam_step, atomic_write_text, checkpoint_dict
from ..numerics import RngStream
from .config import ExperimentConfig
from .data import Dataset, default_mnist_paths, load_mnist_idx, split

log = logging.getLogger(__name__)

CSV_COLUMNS = ("epoch", "nll", "reg", "lambda", "test_err", "mean_abs_J", "mean_mask_flips", "seconds")
_UNSUPERVISED = ("pi_model", "vat", "vadd", "vadd_plus_vat")


def ramp_up_weight(epoch: float, ramp_epochs: int, max_value: float) -> float:
    """Gaussian ramp-up ``max_value * exp(-5 (1 - T)^2)`` with ``T = epoch / ramp_epochs``."""
    if ramp_epochs < 1:
        raise ValueError("ramp_epochs must be at least 1")
    if epoch >= ramp_epochs:
        return float(max_value)
    t = max(epoch, 0) / ramp_epochs
    return float(max_value * math.exp(-5.0 * (1.0 - t) ** 2))


@dataclass
class EpochRecord:
    epoch: int
    nll: float
    reg: float
    lam: float
    test_err: float
    mean_abs_J: float
    mean_mask_flips: float
    seconds: float


@dataclass
class MetricsLog:
    config: dict
    seed: int
    records: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)
    record_wall_time: bool = False

    def append(self, rec: EpochRecord) -> None:
        if self.records and rec.epoch <= self.records[-1].epoch:
            raise ValueError("epoch indices must increase")
        self.records.append(rec)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in self.records:
            w.writerow([r.epoch, repr(r.nll), repr(r.reg), repr(r.lam), repr(r.test_err),
                        repr(r.mean_abs_J), repr(r.mean_mask_flips),
                        repr(r.seconds) if self.record_wall_time else ""])
        return buf.getvalue()

    def to_json(self) -> str:
        doc = {
            "seed": self.seed,
            "config": self.config,
            "epochs": [_jsonable(asdict(r), self.record_wall_time) for r in self.records],
            "summary": self.summary,
        }
        return json.dumps(doc, indent=2, sort_keys=True)

    def write(self, out_dir) -> None:
        out = Path(out_dir)
        atomic_write_text(out / "metrics.csv", self.to_csv())
        atomic_write_text(out / "summary.json", self.to_json())
        timing = {"seconds": [r.seconds for r in self.records]}
        atomic_write_text(out / "timing.json", json.dumps(timing))


def _jsonable(rec: dict, keep_time: bool) -> dict:
    if not keep_time:
        rec.pop("seconds")
    return {k: (None if isinstance(v, float) and math.isnan(v) else v) for k, v in rec.items()}


def load_experiment_data(cfg: ExperimentConfig) -> tuple[Dataset, Dataset]:
    ds = cfg.dataset
    if ds.images is None:
        img, lab = default_mnist_paths()
    else:
        img, lab = ds.images, ds.labels
    full = load_mnist_idx(img, lab)
    if ds.test_images:
        test = load_mnist_idx(ds.test_images, ds.test_labels)
        if ds.n_test:
            test = test.subset(slice(0, ds.n_test))
        train = full if ds.n_train is None else full.subset(slice(0, ds.n_train))
        return train, test
    return split(full, ds.n_train, ds.n_test)


def error_rate(net: SplitNetwork, ds: Dataset, batch: int = 1000) -> float:
    wrong = 0
    for i in range(0, len(ds), batch):
        pred = net.predict(ds.images[i:i + batch]).argmax(axis=1)
        wrong += int(np.sum(pred != ds.labels[i:i + batch]))
    return 100.0 * wrong / max(len(ds), 1)


class _Cycler:
    """Endless shuffled passes over ``n`` indices."""

    def __init__(self, n: int, rng: RngStream):
        self.n, self.rng = n, rng
        self.order = rng.permutation(n)
        self.pos = 0

    def take(self, k: int) -> np.ndarray:
        out = []
        while k > 0:
            if self.pos == self.n:
                self.order, self.pos = self.rng.permutation(self.n), 0
            m = min(k, self.n - self.pos)
            out.append(self.order[self.pos:self.pos + m])
            self.pos += m
            k -= m
        return np.concatenate(out)


def _nanmean(values) -> float:
    vals = [v for v in values if not math.isnan(v)]
    return float(np.mean(vals)) if vals else float("nan")


def run_experiment(cfg: ExperimentConfig, out_dir=None, data: tuple[Dataset, Dataset] | None = None,
                   num_classes: int = 10) -> MetricsLog:
    """Train one network as configured; writes metrics (and checkpoints) to ``out_dir``.

    Each step combines a labeled batch with an unlabeled batch drawn from the
    whole training pool; the NLL uses labeled items only. An epoch is one
    pass over the pool in unlabeled-batch units.
    """
    train, test = data if data is not None else load_experiment_data(cfg)
    if cfg.label_budget > len(train):
        raise ConfigurationError(f"label budget {cfg.label_budget} exceeds {len(train)} training items")
    spec = cfg.loss_spec
    root = RngStream(cfg.seed)
    data_rng, init_rng, step_rng = root.child(0), root.child(1), root.child(2)

    net = SplitNetwork(cfg.layer_specs, (train.images.shape[1],), rng=init_rng)
    labeled = np.sort(data_rng.choice(len(train), cfg.label_budget))
    if cfg.label_budget == 0 and spec.objective not in _UNSUPERVISED:
        raise ConfigurationError("objective needs labeled items but label_budget is 0")
    lab_cycle = _Cycler(len(labeled), data_rng.child(1)) if len(labeled) else None
    pool_rng = data_rng.child(2)
    unsup = spec.objective in _UNSUPERVISED
    steps = max(1, math.ceil(len(train) / cfg.batch_unlabeled))

    metrics = MetricsLog(config=cfg.to_dict(), seed=cfg.seed, record_wall_time=cfg.record_wall_time)
    state = AdamState()
    last_good = checkpoint_dict(net)
    t_start = time.perf_counter()
    for epoch in range(cfg.epochs):
        t0 = time.perf_counter()
        lam = ramp_up_weight(epoch, cfg.ramp_epochs, spec.lam)
        lam2 = ramp_up_weight(epoch, cfg.ramp_epochs, spec.lam2)
        pool = pool_rng.permutation(len(train))
        nlls, regs, js, flips = [], [], [], []
        for s in range(steps):
            if lab_cycle is not None:
                li = labeled[lab_cycle.take(cfg.batch_labeled)]
                xl, yl = train.images[li], one_hot(train.labels[li], num_classes)
            else:
                xl = yl = None
            xu = None
            if unsup:
                xu = train.images[pool[s * cfg.batch_unlabeled:(s + 1) * cfg.batch_unlabeled]]
            res = assemble_objective(net, Batch(xl, yl, xu), spec, step_rng, lam=lam, lam2=lam2)
            if not math.isfinite(res.total):
                if out_dir is not None:
                    atomic_write_text(Path(out_dir) / "last_good_params.json", json.dumps(last_good))
                raise TrainingDiverged(f"non-finite loss at epoch {epoch}, step {s}", checkpoint=last_good)
            params, state = adam_step(net.params, res.grads, state, cfg.lr, cfg.beta1, cfg.beta2)
            net.set_params(params)
            nlls.append(res.nll)
            regs.append(res.reg + res.reg2)
            js.append(res.mean_abs_J)
            flips.append(res.mean_flips)
        last_good = checkpoint_dict(net)
        rec = EpochRecord(epoch=epoch + 1, nll=float(np.mean(nlls)), reg=float(np.mean(regs)), lam=lam,
                          test_err=error_rate(net, test), mean_abs_J=_nanmean(js),
                          mean_mask_flips=_nanmean(flips), seconds=time.perf_counter() - t0)
        metrics.append(rec)
        log.info("epoch %d nll=%.4f reg=%.4f test_err=%.2f%% (%.1fs)", rec.epoch, rec.nll, rec.reg,
                 rec.test_err, rec.seconds)

    metrics.summary = {
        "final_test_err": metrics.records[-1].test_err if metrics.records else None,
        "epochs": len(metrics.records),
        "n_train": len(train),
        "n_test": len(test),
        "label_budget": cfg.label_budget,
        "num_params": net.num_params(),
    }
    if out_dir is not None:
        metrics.write(out_dir)
        atomic_write_text(Path(out_dir) / "params.json", json.dumps(last_good))
    log.debug("run finished in %.1fs", time.perf_counter() - t_start)
    metrics.network = net
    return metrics
