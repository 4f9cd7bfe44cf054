"""Acceptance criteria, one test each.

Every test records a one-line PASS/FAIL verdict that is printed in the
pytest terminal summary (and directly when this file is run as a script).
Tolerances and thresholds are fixed here and must not be tuned to results.
"""
import json
import shutil
import statistics
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from advdrop.harness.config import ExperimentConfig
from advdrop.harness.data import default_mnist_paths, load_mnist_idx
from advdrop.harness.sparsity import run_sparsity
from advdrop.harness.train import load_experiment_data, run_experiment
from advdrop.harness.verify import (GRAD_TOL, IDENTITY_TOL, determinism_suite, gradients_suite,
                                    linreg_suite, mask_oracle_suite, metrics_identities_suite)

ROOT = Path(__file__).resolve().parents[1]
CONFIGS = ROOT / "configs"
VERDICTS: list[str] = []


def record(n: int, title: str, ok: bool, detail: str) -> None:
    VERDICTS.append(f"criterion {n} [{'PASS' if ok else 'FAIL'}] {title}: {detail}")
    print(VERDICTS[-1], flush=True)
    assert ok, VERDICTS[-1]


def timed(fn, *args, **kw):
    t0 = time.perf_counter()
    out = fn(*args, **kw)
    return out, time.perf_counter() - t0


def test_criterion_1_mask_search_oracle():
    rep, secs = timed(mask_oracle_suite, n_instances=1000, max_H=12, max_budget=3)
    ok = rep["matches"] == 1000 and secs < 10
    record(1, "mask search equals exhaustive maximum", ok,
           f"{rep['matches']}/1000 exact, {secs:.2f}s (limit 10s)")


def test_criterion_2_gradient_suite():
    rep, secs = timed(gradients_suite)
    ok = rep["max_rel_err"] < GRAD_TOL and secs < 60
    record(2, "layers, divergences and objectives match finite differences", ok,
           f"{len(rep['cases'])} cases, max rel err {rep['max_rel_err']:.2e} (limit {GRAD_TOL:g}), "
           f"{secs:.1f}s (limit 60s)")


def test_criterion_3_linear_regression_identities():
    rep, secs = timed(linreg_suite, n_instances=100)
    n = rep["instances"]
    ok = (rep["at_max_gap"] < IDENTITY_TOL and rep["add_max_gap"] < IDENTITY_TOL
          and rep["true_optimal_instances"] == n and secs < 10)
    record(3, "linear-regression decompositions and closed-form mask optimality", ok,
           f"AT gap {rep['at_max_gap']:.1e}, AdD gap {rep['add_max_gap']:.1e} (limit {IDENTITY_TOL:g}); "
           f"closed-form mask attains the exact squared-error optimum in {rep['true_optimal_instances']}/{n} "
           f"instances (required {n}/{n}; linearised optimum {rep['linearised_optimal_instances']}/{n}); "
           f"{secs:.2f}s")


def test_criterion_4_mask_distance_identities():
    rep, secs = timed(metrics_identities_suite, n_pairs=1000)
    ok = rep["ged_exact"] == 1000 and rep["jaccard_exact"] == 1000
    record(4, "edit distance and Jaccard identities", ok,
           f"GED {rep['ged_exact']}/1000, Jaccard {rep['jaccard_exact']}/1000, {secs:.2f}s")


def test_criterion_7_determinism(tmp_path):
    rep = determinism_suite()
    cfg = ExperimentConfig.from_file(CONFIGS / "smoke.json")
    data = load_experiment_data(cfg)
    texts = []
    for d in ("a", "b"):
        run_experiment(cfg, tmp_path / d, data=data)
        texts.append((tmp_path / d / "metrics.csv").read_bytes())
    ok = rep["passed"] and texts[0] == texts[1]
    record(7, "equal seeds give byte-identical CSV logs", ok,
           f"combined-objective run identical: {rep['csv_identical']}, smoke config identical: "
           f"{texts[0] == texts[1]}")


def test_criterion_8_cli_smoke(tmp_path):
    exe = shutil.which("advdrop")
    cmd = [exe] if exe else [sys.executable, "-m", "advdrop.cli"]
    t0 = time.perf_counter()
    proc = subprocess.run(cmd + ["train", "--config", str(CONFIGS / "smoke.json"), "--out", str(tmp_path)],
                          capture_output=True, text=True, timeout=120)
    secs = time.perf_counter() - t0
    cfg = json.loads((CONFIGS / "smoke.json").read_text())
    rows = (tmp_path / "metrics.csv").read_text().splitlines() if proc.returncode == 0 else []
    ok = proc.returncode == 0 and secs < 60 and len(rows) == 1 + cfg["epochs"] and cfg["dataset"]["n_train"] == 100
    record(8, "advdrop train on 100 items for 2 epochs", ok,
           f"exit {proc.returncode}, {len(rows) - 1 if rows else 0} epoch rows, {secs:.1f}s (limit 60s)")


SPARSITY_SEEDS = (0, 1, 2)
SPARSITY_EPOCHS = 20
RECON_TOL = 0.10


def test_criterion_5_sparsity_direction():
    data = load_mnist_idx(*default_mnist_paths())
    t0 = time.perf_counter()
    rows = []
    for seed in SPARSITY_SEEDS:
        drop = run_sparsity("dropout", data, seed=seed, epochs=SPARSITY_EPOCHS)
        add = run_sparsity("add", data, seed=seed, epochs=SPARSITY_EPOCHS)
        rows.append((seed, drop, add))
    secs = time.perf_counter() - t0
    lower = sum(a.global_mean < d.global_mean for _, d, a in rows)
    # relative to the dropout model's error
    gaps = [abs(a.reconstruction_error - d.reconstruction_error) / d.reconstruction_error for _, d, a in rows]
    ok = lower == len(SPARSITY_SEEDS) and max(gaps) <= RECON_TOL and secs < 15 * 60
    detail = "; ".join(f"seed {s}: mean act {d.global_mean:.4f} vs {a.global_mean:.4f}, "
                       f"recon {d.reconstruction_error:.2f} vs {a.reconstruction_error:.2f}"
                       for s, d, a in rows)
    record(5, "adversarial dropout autoencoder is sparser with similar reconstruction", ok,
           f"AdD mean lower in {lower}/3 seeds; max reconstruction gap {max(gaps):.1%} (limit 10%); "
           f"{secs / 60:.1f} min (limit 15); dropout vs AdD: {detail}")


SUPERVISED_SEEDS = (0, 1, 2, 3, 4)


def test_criterion_6_supervised_direction():
    cfgs = {name: ExperimentConfig.from_file(CONFIGS / f"mnist_{name}.json")
            for name in ("plain", "pi_model", "vadd")}
    data = load_experiment_data(cfgs["plain"])
    t0 = time.perf_counter()
    errs = {name: [] for name in cfgs}
    for seed in SUPERVISED_SEEDS:
        for name, cfg in cfgs.items():
            cfg.seed = seed
            errs[name].append(run_experiment(cfg, data=data).records[-1].test_err)
    secs = time.perf_counter() - t0
    mean = {k: float(np.mean(v)) for k, v in errs.items()}
    pooled = float(np.sqrt((statistics.variance(errs["pi_model"]) + statistics.variance(errs["vadd"])) / 2))
    ok = mean["vadd"] <= mean["plain"] and mean["vadd"] <= mean["pi_model"] + pooled and secs < 30 * 60
    record(6, "VAdD test error at most plain dropout and within one pooled std of the Pi-model", ok,
           f"mean test error plain {mean['plain']:.2f}%, Pi {mean['pi_model']:.2f}%, VAdD {mean['vadd']:.2f}% "
           f"(pooled std {pooled:.2f}); {secs / 60:.1f} min (limit 30); per seed {json.dumps(errs)}")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-s"]))
