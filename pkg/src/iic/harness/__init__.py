"""Double-descent experiment: data, random features, sweep and reports."""

from .data import SyntheticSpec, find_mnist, load_mnist_idx, synthetic_dataset
from .features import gaussian_kernel, median_heuristic, rff_transform
from .report import emit_csv, emit_svg, format_csv, parse_svg_means, read_csv
from .sweep import (DataSource, SweepConfig, SweepRecord, TrendSummary, classify_regime, run_sweep, series_means,
                    trend_summary)
