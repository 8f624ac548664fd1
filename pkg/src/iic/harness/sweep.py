"""Double-descent sweep over random-feature models of increasing width."""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Optional

import numpy as np
import scipy.stats

from ..core import RegressionDataset, isotropic_gaussian, linear_model, substream
from ..criteria import bic_linear, bic_ridge, iic
from ..errors import ContractViolation, IICError
from ..interpolate import pinv_interpolator
from .data import SyntheticSpec, find_mnist, load_mnist_idx, synthetic_dataset
from .features import median_heuristic, rff_transform

DEFAULT_GRID = (20, 50, 100, 150, 180, 220, 300, 500, 1000, 2000)
REGIMES = ("under", "critical", "over")


@dataclass(frozen=True)
class DataSource:
    kind: str = "synthetic"
    path: Optional[str] = None
    p: int = 20
    noise: float = 0.1

    def __post_init__(self):
        if self.kind not in ("synthetic", "mnist"):
            raise ContractViolation(f"unknown data source kind {self.kind!r}")


@dataclass(frozen=True)
class SweepConfig:
    data_source: DataSource = field(default_factory=DataSource)
    n_train: int = 200
    n_test: int = 500
    d_grid: tuple = DEFAULT_GRID
    repeats: int = 10
    rff_bandwidth: object = "median-heuristic"
    ridge_lambda: float = 0.1
    prior_variance: float = 1.0
    seed: int = 0
    critical_band: tuple = (0.8, 1.2)

    def __post_init__(self):
        object.__setattr__(self, "d_grid", tuple(int(d) for d in self.d_grid))
        object.__setattr__(self, "critical_band", tuple(float(c) for c in self.critical_band))
        if list(self.d_grid) != sorted(self.d_grid) or not self.d_grid or min(self.d_grid) < 1:
            raise ContractViolation("d_grid must be a non-empty ascending list of positive counts")
        if self.repeats < 1 or self.n_train < 1 or self.n_test < 1:
            raise ContractViolation("repeats, n_train and n_test must be >= 1")
        lo, hi = self.critical_band
        if not 0 < lo <= 1 <= hi:
            raise ContractViolation(f"critical band {self.critical_band} must bracket 1")
        if self.rff_bandwidth != "median-heuristic" and not float(self.rff_bandwidth) > 0:
            raise ContractViolation("rff_bandwidth must be positive or 'median-heuristic'")

    @classmethod
    def from_dict(cls, raw: dict) -> "SweepConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(raw) - known
        if unknown:
            raise ContractViolation(f"unknown config keys: {sorted(unknown)}")
        kw = dict(raw)
        if "data_source" in kw:
            ds = dict(kw["data_source"])
            bad = set(ds) - {f.name for f in fields(DataSource)}
            if bad:
                raise ContractViolation(f"unknown data_source keys: {sorted(bad)}")
            kw["data_source"] = DataSource(**ds)
        return cls(**kw)

    @classmethod
    def from_json(cls, path) -> "SweepConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def to_dict(self) -> dict:
        out = asdict(self)
        out["d_grid"] = list(self.d_grid)
        out["critical_band"] = list(self.critical_band)
        return out


@dataclass(frozen=True)
class SweepRecord:
    d: int
    repeat: int
    regime: str
    train_mse: float
    test_mse: float
    iic: Optional[float] = None
    bic: Optional[float] = None
    bic_ridge: Optional[float] = None
    error: Optional[str] = None


def classify_regime(d: int, N: int, band=(0.8, 1.2)) -> str:
    if d < band[0] * N:
        return "under"
    if d > band[1] * N:
        return "over"
    return "critical"


def _repeat_data(config: SweepConfig, repeat: int, pool: RegressionDataset | None):
    total = config.n_train + config.n_test
    key = (config.seed, repeat)
    if config.data_source.kind == "synthetic":
        spec = SyntheticSpec(n=total, p=config.data_source.p, noise=config.data_source.noise)
        data = synthetic_dataset(spec, key)
    else:
        if pool.n < total:
            raise ContractViolation(f"MNIST pool has {pool.n} points, need {total}")
        idx = substream(key, 2).choice(pool.n, total, replace=False)
        data = RegressionDataset(pool.inputs[idx], pool.targets[idx])
    return data


def _run_cell(config: SweepConfig, d: int, repeat: int, data: RegressionDataset, bandwidth: float) -> SweepRecord:
    nt = config.n_train
    features = rff_transform(data.inputs, d, bandwidth, (config.seed, repeat))
    X, X_test = features[:nt], features[nt:]
    y, y_test = data.targets[:nt, 0], data.targets[nt:, 0]
    N = nt * data.m
    regime = classify_regime(d, N, config.critical_band)
    errors = []
    crit = {}
    if regime == "over":
        prior = isotropic_gaussian(d, config.prior_variance)
        fit = pinv_interpolator(X, y, prior)
        theta = fit.theta_star
        try:
            crit["iic"] = iic(linear_model(d), RegressionDataset(X, y), prior, theta).iic
        except IICError as e:
            errors.append(f"iic: {e}")
    else:
        theta, *_ = np.linalg.lstsq(X, y, rcond=None)
        if regime == "under":
            try:
                crit["bic"] = bic_linear(X, y)
            except IICError as e:
                errors.append(f"bic: {e}")
    try:
        crit["bic_ridge"] = bic_ridge(X, y, config.ridge_lambda)
    except IICError as e:
        errors.append(f"bic_ridge: {e}")
    train_mse = float(np.mean((X @ theta - y) ** 2))
    test_mse = float(np.mean((X_test @ theta - y_test) ** 2))
    return SweepRecord(d=d, repeat=repeat, regime=regime, train_mse=train_mse, test_mse=test_mse,
                       error="; ".join(errors) or None, **crit)


def load_pool(config: SweepConfig) -> RegressionDataset | None:
    if config.data_source.kind != "mnist":
        return None
    files = find_mnist(config.data_source.path)
    if files is None:
        raise ContractViolation("MNIST files not found; set data_source.path or IIC_MNIST_DIR")
    return load_mnist_idx(*files)


def run_sweep(config: SweepConfig, threads: int = 1) -> list[SweepRecord]:
    """One record per ``(d, repeat)`` cell, sorted by ``(d, repeat)``.

    All randomness is keyed by ``(seed, repeat, d)``, so the output does not
    depend on ``threads``.
    """
    pool = load_pool(config)
    per_repeat = []
    for r in range(config.repeats):
        data = _repeat_data(config, r, pool)
        if config.rff_bandwidth == "median-heuristic":
            bw = median_heuristic(data.inputs[: config.n_train], seed=(config.seed, r))
        else:
            bw = float(config.rff_bandwidth)
        per_repeat.append((data, bw))
    cells = [(d, r) for d in config.d_grid for r in range(config.repeats)]

    def work(cell):
        d, r = cell
        data, bw = per_repeat[r]
        return _run_cell(config, d, r, data, bw)

    if threads <= 1:
        records = [work(c) for c in cells]
    else:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            records = list(ex.map(work, cells))
    return sorted(records, key=lambda rec: (rec.d, rec.repeat))


def series_means(records, series: str) -> dict[int, float]:
    """Mean of ``series`` over repeats for each d where it is present."""
    out = {}
    for d in sorted({r.d for r in records}):
        vals = [getattr(r, series) for r in records if r.d == d and getattr(r, series) is not None]
        if vals:
            out[d] = float(np.mean(vals))
    return out


@dataclass(frozen=True)
class TrendSummary:
    bic_increasing: bool
    iic_spearman: float
    mse_spearman: float
    peak_d: int
    peak_in_band: bool
    right_limb_descends: bool

    @property
    def holds(self) -> bool:
        return (self.bic_increasing and self.iic_spearman < 0 and self.mse_spearman < 0 and self.peak_in_band
                and self.right_limb_descends)


def trend_summary(records, n_train: int, band=(0.8, 1.2), tail_from: int | None = None) -> TrendSummary:
    """Qualitative double-descent checks on mean-over-repeats curves.

    ``tail_from`` defaults to ``2 * n_train``; Spearman correlations are taken
    over grid points at or above it.
    """
    tail_from = 2 * n_train if tail_from is None else tail_from
    under = [r for r in records if r.regime == "under"]
    bic = series_means(under, "bic")
    bic_vals = [bic[d] for d in sorted(bic)]
    iic_m = {d: v for d, v in series_means(records, "iic").items() if d >= tail_from}
    mse = series_means(records, "test_mse")
    tail = sorted(d for d in mse if d >= tail_from)
    over = sorted(series_means([r for r in records if r.regime == "over"], "test_mse").items())
    peak = max(mse, key=mse.get)
    return TrendSummary(
        bic_increasing=len(bic_vals) >= 2 and bool(np.all(np.diff(bic_vals) > 0)),
        iic_spearman=_spearman(sorted(iic_m), [iic_m[d] for d in sorted(iic_m)]),
        mse_spearman=_spearman(tail, [mse[d] for d in tail]),
        peak_d=int(peak),
        peak_in_band=band[0] * n_train <= peak <= band[1] * n_train,
        right_limb_descends=len(over) >= 2 and over[-1][1] < over[0][1],
    )


def _spearman(x, y) -> float:
    if len(x) < 2:
        return float("nan")
    return float(scipy.stats.spearmanr(x, y)[0])
