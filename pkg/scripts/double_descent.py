"""Run the random-feature double-descent sweep and summarise the curves.

    python scripts/double_descent.py --config scripts/configs/default_sweep.json --out results/
"""

import argparse
from pathlib import Path

from iic.cli import sweep_metadata
from iic.harness import SweepConfig, emit_csv, emit_svg, run_sweep, series_means, trend_summary

HERE = Path(__file__).resolve().parent


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--config", default=HERE / "configs" / "default_sweep.json")
    ap.add_argument("--out", default="results")
    ap.add_argument("--threads", type=int, default=4)
    ap.add_argument("--mnist", help="directory with MNIST IDX files; overrides the config data source")
    args = ap.parse_args()

    config = SweepConfig.from_json(args.config)
    if args.mnist:
        raw = config.to_dict()
        raw["data_source"] = {"kind": "mnist", "path": args.mnist}
        config = SweepConfig.from_dict(raw)
    records = run_sweep(config, threads=args.threads)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    emit_csv(records, out / "sweep.csv", sweep_metadata(config))
    N = config.n_train
    emit_svg(records, out / "sweep.svg", band=(config.critical_band[0] * N, config.critical_band[1] * N))

    print(f"{'d':>6} {'regime':>9} {'test_mse':>10} {'iic':>9} {'bic':>9} {'bic_ridge':>10}")
    means = {s: series_means(records, s) for s in ("test_mse", "iic", "bic", "bic_ridge")}
    regimes = {r.d: r.regime for r in records}
    for d in config.d_grid:
        cells = [means[s].get(d) for s in ("test_mse", "iic", "bic", "bic_ridge")]
        text = " ".join(f"{v:10.4f}" if v is not None else f"{'-':>10}" for v in cells)
        print(f"{d:>6} {regimes[d]:>9} {text}")
    t = trend_summary(records, N, config.critical_band)
    print(f"under-regime mean BIC strictly increasing: {t.bic_increasing}")
    print(f"spearman(iic, d) over d >= {2 * N}: {t.iic_spearman:+.3f}")
    print(f"spearman(test_mse, d) over d >= {2 * N}: {t.mse_spearman:+.3f}")
    print(f"test_mse peak at d={t.peak_d}, inside critical band: {t.peak_in_band}")

if __name__ == "__main__":
    main()
