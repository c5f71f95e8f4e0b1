"""Command-line entry point.

Subcommands:

  generate   simulate a dataset from a manifest-style config file
  split      assign train/validation/test indices inside a dataset manifest
  oracle     fit one stored observation by simulation-in-the-loop search
  eval       score a predictions CSV against dataset labels, optionally plot
  selftest   run the built-in analytic verification suite

stdout carries one machine-readable JSON summary per run; diagnostics go to
stderr.  Exit codes: 0 success, 1 bad input/config, 2 solver blow-up during
generation, 3 I/O failure.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from .dataset import Dataset, DatasetManifest, GenerationError, generate, split
from .oracle import FitScenario, fit
from .regression import (PARAM_NAMES, binned_trend, metrics,
                         read_predictions_csv)
from .selftest import run_selftest

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_SOLVER = 2
EXIT_IO = 3

TRUTH_MISMATCH_TOL = 1e-6


def _fail(message: str, code: int) -> int:
    print(f"error: {message}", file=sys.stderr)
    return code


def cmd_generate(args) -> int:
    try:
        manifest = DatasetManifest.load(args.config)
    except OSError as exc:
        return _fail(f"cannot read config: {exc}", EXIT_CONFIG)
    except (ValueError, KeyError, TypeError) as exc:
        return _fail(f"bad config: {exc}", EXIT_CONFIG)
    if args.seed is not None:
        manifest.master_seed = args.seed

    started = time.perf_counter()
    try:
        manifest = generate(manifest, args.out, threads=args.threads)
    except GenerationError as exc:
        return _fail(str(exc), EXIT_SOLVER)
    except OSError as exc:
        return _fail(f"I/O failure: {exc}", EXIT_IO)
    print(json.dumps({
        "command": "generate",
        "out": str(args.out),
        "samples": manifest.sample_count,
        "seconds": round(time.perf_counter() - started, 3),
    }))
    return EXIT_OK


def cmd_split(args) -> int:
    try:
        fractions = tuple(float(f) for f in args.fractions.split(","))
    except ValueError:
        return _fail(f"cannot parse fractions {args.fractions!r}", EXIT_CONFIG)
    manifest_path = Path(args.dataset) / "manifest.json"
    try:
        manifest = DatasetManifest.load(manifest_path)
        manifest = split(manifest, fractions, args.seed)
        manifest.save(manifest_path)
    except OSError as exc:
        return _fail(f"I/O failure: {exc}", EXIT_IO)
    except ValueError as exc:
        return _fail(str(exc), EXIT_CONFIG)
    print(json.dumps({
        "command": "split",
        "dataset": str(args.dataset),
        "sizes": {name: len(manifest.splits[name])
                  for name in ("train", "validation", "test")},
        "seed": args.seed,
    }))
    return EXIT_OK


def cmd_oracle(args) -> int:
    try:
        data = Dataset(args.dataset)
        target = data.observation(args.index)
    except (OSError, ValueError, IndexError) as exc:
        return _fail(str(exc), EXIT_CONFIG)
    scenario = FitScenario.from_manifest(data.manifest)
    try:
        result = fit(target, scenario, method=args.method, budget=args.budget)
    except ValueError as exc:
        return _fail(str(exc), EXIT_CONFIG)
    print(json.dumps({"command": "oracle", "index": args.index,
                      **result.to_dict()}))
    return EXIT_OK


def _plot_parameter(preds, truths, name: str, sigma: float, out_path: Path):
    import matplotlib
    matplotlib.use("svg")
    import matplotlib.pyplot as plt

    trend = binned_trend(preds, truths, n_bins=20)
    fig, ax = plt.subplots(figsize=(4.2, 4.2))
    line = np.linspace(0.0, 1.0, 2)
    filled = ~np.isnan(trend.mean_pred)
    centers = trend.centers[filled]
    means = trend.mean_pred[filled]
    ax.fill_between(centers, means - 4 * sigma, means + 4 * sigma,
                    color="#b3cde3", alpha=0.6, label="4 sigma")
    ax.fill_between(centers, means - sigma, means + sigma,
                    color="#2c7fb8", alpha=0.5, label="1 sigma")
    ax.plot(truths, preds, ".", ms=2, color="0.45", alpha=0.4, zorder=1)
    ax.plot(line, line, "k--", lw=1, label="ideal")
    ax.plot(centers, means, "o", color="#08519c", ms=5, label="bin mean")
    ax.set_xlabel(f"true {name} (normalized)")
    ax.set_ylabel(f"predicted {name} (normalized)")
    ax.set_xlim(-0.02, 1.02)
    ax.set_ylim(-0.05, 1.05)
    ax.legend(loc="upper left", fontsize=8)
    fig.tight_layout()
    fig.savefig(out_path, format="svg")
    plt.close(fig)


def cmd_eval(args) -> int:
    try:
        indices, preds, truths = read_predictions_csv(args.pred)
    except OSError as exc:
        return _fail(f"cannot read predictions: {exc}", EXIT_CONFIG)
    except ValueError as exc:
        return _fail(f"malformed predictions CSV: {exc}", EXIT_CONFIG)
    # canonical row order makes the report independent of CSV row order
    order = np.argsort(indices, kind="stable")
    indices, preds, truths = indices[order], preds[order], truths[order]

    try:
        data = Dataset(args.dataset)
        reference = data.labels_normalized()
    except (OSError, ValueError) as exc:
        return _fail(str(exc), EXIT_CONFIG)
    if indices.min() < 0 or indices.max() >= len(data):
        return _fail(f"prediction indices outside [0, {len(data)})", EXIT_CONFIG)
    mismatch = np.abs(truths - reference[indices]).max()
    if mismatch > TRUTH_MISMATCH_TOL:
        return _fail(
            f"CSV truths disagree with dataset labels by {mismatch:.3e} "
            f"(> {TRUTH_MISMATCH_TOL}); wrong dataset or stale split?",
            EXIT_CONFIG)

    report = metrics(preds, truths)
    try:
        Path(args.out).write_text(report.to_json(), encoding="utf-8")
        if args.plot is not None:
            plot_dir = Path(args.plot)
            plot_dir.mkdir(parents=True, exist_ok=True)
            for i, name in enumerate(PARAM_NAMES):
                _plot_parameter(preds[:, i], truths[:, i], name,
                                float(report.sigma[i]),
                                plot_dir / f"{name}.svg")
    except OSError as exc:
        return _fail(f"I/O failure: {exc}", EXIT_IO)
    print(json.dumps({"command": "eval", "out": str(args.out),
                      **report.to_dict()}))
    return EXIT_OK


def cmd_selftest(_args) -> int:
    results = run_selftest()
    failed = [r.name for r in results if not r.passed]
    print(json.dumps({"command": "selftest",
                      "passed": len(results) - len(failed),
                      "failed": failed}))
    return EXIT_OK if not failed else EXIT_CONFIG


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="satkerr",
        description="Saturable-Kerr propagation datasets and estimator tooling")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="simulate a dataset from a config file")
    p.add_argument("--config", required=True, help="manifest-style JSON config")
    p.add_argument("--out", required=True, help="output dataset directory")
    p.add_argument("--seed", type=int, default=None,
                   help="override the config's master seed")
    p.add_argument("--threads", type=int, default=1)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("split", help="write train/val/test indices into the manifest")
    p.add_argument("--dataset", required=True)
    p.add_argument("--fractions", default="0.8,0.1,0.1")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("oracle", help="fit one observation with the simulator in the loop")
    p.add_argument("--dataset", required=True)
    p.add_argument("--index", type=int, required=True)
    p.add_argument("--method", choices=("grid", "nelder-mead"),
                   default="nelder-mead")
    p.add_argument("--budget", type=int, default=500)
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("eval", help="score a predictions CSV against a dataset")
    p.add_argument("--pred", required=True, help="exchange-format CSV")
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True, help="metrics JSON output path")
    p.add_argument("--plot", default=None, help="directory for per-parameter SVGs")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("selftest", help="run the built-in verification suite")
    p.set_defaults(func=cmd_selftest)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
