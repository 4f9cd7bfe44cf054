"""Command-line entry point: ``advdrop {train,sparsity,linreg-check,verify}``.

Exit status is 0 on success, 1 when a check or run fails and 2 for usage,
configuration or input errors.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from .errors import AdvDropError, TrainingDiverged

OUT_ENV = "ADVDROP_OUT"
EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2

log = logging.getLogger("advdrop")


def _out_dir(arg: str | None, default_name: str) -> Path:
    if arg:
        return Path(arg)
    return Path(os.environ.get(OUT_ENV, "runs")) / default_name


def _cmd_train(args) -> int:
    from .harness.config import ExperimentConfig
    from .harness.train import run_experiment

    cfg = ExperimentConfig.from_file(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    if args.epochs is not None:
        cfg.epochs = args.epochs
    out = _out_dir(args.out, Path(args.config).stem)
    out.mkdir(parents=True, exist_ok=True)
    try:
        metrics = run_experiment(cfg, out)
    except TrainingDiverged as e:
        log.error("%s; last good parameters written to %s", e, out / "last_good_params.json")
        return EXIT_FAIL
    print(json.dumps({"out": str(out), **metrics.summary}))
    return EXIT_OK


def _cmd_sparsity(args) -> int:
    from .harness.data import default_mnist_paths, load_mnist_idx
    from .harness.sparsity import run_sparsity

    if args.images:
        paths = (args.images, args.labels)
    else:
        paths = default_mnist_paths()
    data = load_mnist_idx(*paths)
    out = _out_dir(args.out, "sparsity")
    out.mkdir(parents=True, exist_ok=True)
    rep = run_sparsity(args.mode, data, out, seed=args.seed, epochs=args.epochs,
                       n_train=args.n_train, n_eval=args.n_eval)
    print(json.dumps({"mode": args.mode, "global_mean": rep.global_mean,
                      "reconstruction_error": rep.reconstruction_error,
                      "report": str(out / f"sparsity_{args.mode}.json")}))
    return EXIT_OK


def _cmd_linreg(args) -> int:
    from .harness.verify import IDENTITY_TOL, linreg_records

    rec = linreg_records(args.instances, args.seed)
    ok = rec["at_max_gap"] < IDENTITY_TOL and rec["add_max_gap"] < IDENTITY_TOL
    if args.json:
        print(json.dumps({**rec, "tolerance": IDENTITY_TOL, "passed": ok}))
    else:
        print(f"{'#':>4} {'AT lhs':>14} {'AT rhs':>14} {'AdD lhs':>14} {'AdD rhs':>14}")
        for i, ((a1, a2), (b1, b2)) in enumerate(zip(rec["at_pairs"], rec["add_pairs"])):
            print(f"{i:>4} {a1:>14.8g} {a2:>14.8g} {b1:>14.8g} {b2:>14.8g}")
        print(f"max |lhs - rhs|: AT {rec['at_max_gap']:.3e}, AdD {rec['add_max_gap']:.3e}")
        n = rec["instances"]
        print(f"closed-form mask optimal for exact squared error: {rec['true_optimal_instances']}/{n}; "
              f"for the linearised objective: {rec['linearised_optimal_instances']}/{n}")
    return EXIT_OK if ok else EXIT_FAIL


def _cmd_verify(args) -> int:
    from .harness.verify import verify

    report = verify(args.suite)
    text = json.dumps(report, indent=2)
    if args.report:
        from .network import atomic_write_text
        atomic_write_text(args.report, text)
    print(text)
    return EXIT_OK if report["passed"] else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    from .harness.sparsity import MODES
    from .harness.verify import SUITES

    p = argparse.ArgumentParser(prog="advdrop", description="Adversarial dropout experiments and checks.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="train a network from a JSON config")
    t.add_argument("--config", required=True)
    t.add_argument("--out", help=f"output directory (default ${OUT_ENV}/<config name>)")
    t.add_argument("--seed", type=int)
    t.add_argument("--epochs", type=int)
    t.set_defaults(func=_cmd_train)

    s = sub.add_parser("sparsity", help="train an autoencoder and report hidden-unit activation statistics")
    s.add_argument("--mode", required=True, choices=MODES)
    s.add_argument("--out")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--epochs", type=int, default=20)
    s.add_argument("--n-train", type=int, default=9000)
    s.add_argument("--n-eval", type=int, default=1000)
    s.add_argument("--images", help="IDX image file (default: bundled digits)")
    s.add_argument("--labels")
    s.set_defaults(func=_cmd_sparsity)

    lr = sub.add_parser("linreg-check", help="check the linear-regression penalty identities")
    lr.add_argument("--json", action="store_true")
    lr.add_argument("--instances", type=int, default=100)
    lr.add_argument("--seed", type=int, default=0)
    lr.set_defaults(func=_cmd_linreg)

    v = sub.add_parser("verify", help="run a self-check suite")
    v.add_argument("suite", choices=SUITES)
    v.add_argument("--report", help="also write the JSON report here")
    v.set_defaults(func=_cmd_verify)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code == 0 else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "sparsity" and bool(args.images) != bool(args.labels):
        print("advdrop: --images and --labels must be given together", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except (AdvDropError, OSError) as e:
        print(f"advdrop: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
