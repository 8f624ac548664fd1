"""Command-line entry point ``iic``."""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

import numpy as np

from .core import RegressionDataset, isotropic_gaussian, linear_model, substream
from .criteria import bic_linear, bic_ridge, iic, iic_linear
from .errors import IICError
from .harness.report import emit_csv, emit_svg, format_csv
from .harness.sweep import SweepConfig, run_sweep
from .interpolate import pinv_interpolator
from .verify import SUITES, run_suite


def _report_linear(X, y, prior_variance: float, ridge_lambda: float, out) -> int:
    n, d = X.shape
    print(f"n={n}", file=out)
    print(f"d={d}", file=out)
    if d > n:
        prior = isotropic_gaussian(d, prior_variance)
        theta = pinv_interpolator(X, y, prior).theta_star
        rep = iic(linear_model(d), RegressionDataset(X, y), prior, theta)
        out.write(rep.to_text())
        print(f"iic_linear={iic_linear(X, y):.17g}", file=out)
    elif n > d:
        print(f"bic={bic_linear(X, y):.17g}", file=out)
    else:
        print("# d = n: neither IIC nor BIC applies", file=out)
    print(f"bic_ridge={bic_ridge(X, y, ridge_lambda):.17g}", file=out)
    return 0


def cmd_demo_linear(args) -> int:
    rng = substream(args.seed, 0)
    n, d = 6, 15
    X = rng.standard_normal((n, d))
    y = X @ rng.standard_normal(d) / np.sqrt(d) + 0.1 * rng.standard_normal(n)
    print(f"# random design {n}x{d}, isotropic Gaussian prior with variance {args.prior_variance}")
    _report_linear(X, y, args.prior_variance, 0.1, sys.stdout)
    print("# iic_linear - iic = log 2 for every isotropic Gaussian prior")
    return 0


def cmd_verify(args) -> int:
    checks, elapsed = run_suite(args.suite)
    for c in checks:
        print(c.line())
    failed = sum(not c.passed for c in checks)
    print(f"{args.suite}: {len(checks) - failed}/{len(checks)} passed in {elapsed:.2f}s")
    return 1 if failed else 0


def sweep_metadata(config) -> dict:
    ds = config.data_source
    meta = {"data_source": ds.kind, "seed": config.seed, "n_train": config.n_train, "n_test": config.n_test,
            "repeats": config.repeats, "rff_bandwidth": config.rff_bandwidth,
            "rff_weights": "W~N(0,1/bandwidth^2) b~U[0,2pi)", "prior_variance": config.prior_variance,
            "ridge_lambda": config.ridge_lambda,
            "critical_band": f"{config.critical_band[0]:g},{config.critical_band[1]:g}"}
    if ds.kind == "mnist":
        meta["target"] = "digit/10 scalar (m=1)"
    else:
        meta["target"] = f"sin(|x|)+{ds.noise:g}*N(0,1), p={ds.p}"
    return meta


def cmd_sweep(args) -> int:
    config = SweepConfig.from_json(args.config)
    start = time.perf_counter()
    records = run_sweep(config, threads=args.threads)
    meta = sweep_metadata(config)
    if args.out_csv:
        emit_csv(records, args.out_csv, meta)
    else:
        sys.stdout.write(format_csv(records, meta))
    if args.out_svg:
        N = config.n_train
        emit_svg(records, args.out_svg, band=(config.critical_band[0] * N, config.critical_band[1] * N))
    errors = [r for r in records if r.error]
    print(f"# {len(records)} records in {time.perf_counter() - start:.1f}s, {len(errors)} with errors",
          file=sys.stderr)
    return 0


def _load_matrix(path) -> np.ndarray:
    return np.atleast_2d(np.loadtxt(Path(path), delimiter=",", dtype=float, ndmin=2))


def cmd_compute(args) -> int:
    X = _load_matrix(args.design)
    y = _load_matrix(args.targets).reshape(-1)
    if y.size != X.shape[0]:
        print(f"error: design has {X.shape[0]} rows but {y.size} targets", file=sys.stderr)
        return 2
    return _report_linear(X, y, args.prior_variance, args.ridge_lambda, sys.stdout)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="iic", description="Interpolating information criterion tools")
    sub = p.add_subparsers(dest="command", required=True)

    demo = sub.add_parser("demo-linear", help="worked linear-regression example")
    demo.add_argument("--seed", type=int, default=0)
    demo.add_argument("--prior-variance", type=float, default=1.0)
    demo.set_defaults(func=cmd_demo_linear)

    ver = sub.add_parser("verify", help="run an oracle suite")
    ver.add_argument("suite", choices=sorted(SUITES))
    ver.set_defaults(func=cmd_verify)

    sw = sub.add_parser("sweep", help="double-descent sweep over random Fourier features")
    sw.add_argument("--config", required=True)
    sw.add_argument("--out-csv")
    sw.add_argument("--out-svg")
    sw.add_argument("--threads", type=int, default=1)
    sw.set_defaults(func=cmd_sweep)

    comp = sub.add_parser("compute", help="IIC/BIC report for a linear design")
    comp.add_argument("--design", required=True, help="CSV of the n x d design matrix")
    comp.add_argument("--targets", required=True, help="CSV of the n targets")
    comp.add_argument("--prior-variance", type=float, default=1.0)
    comp.add_argument("--ridge-lambda", type=float, default=0.1)
    comp.set_defaults(func=cmd_compute)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except IICError as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return 1
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
