"""CSV and SVG output for sweep records."""

from __future__ import annotations

import io
import math
import xml.etree.ElementTree as ET
from pathlib import Path
from xml.sax.saxutils import quoteattr

import numpy as np

from ..errors import ContractViolation
from .sweep import SweepRecord, series_means

CSV_COLUMNS = ("d", "repeat", "regime", "train_mse", "test_mse", "iic", "bic", "bic_ridge")
SVG_SERIES = ("test_mse", "iic", "bic", "bic_ridge")

_COLORS = {"test_mse": "#1f77b4", "train_mse": "#7f7f7f", "iic": "#d62728", "bic": "#2ca02c",
           "bic_ridge": "#9467bd"}


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, str):
        return v
    return f"{float(v):.17g}"


def format_csv(records, metadata: dict | None = None) -> str:
    buf = io.StringIO()
    for k, v in (metadata or {}).items():
        buf.write(f"# {k}={v}\n")
    buf.write(",".join(CSV_COLUMNS) + "\n")
    for rec in records:
        buf.write(",".join(_fmt(getattr(rec, c)) for c in CSV_COLUMNS) + "\n")
    return buf.getvalue()


def emit_csv(records, path, metadata: dict | None = None) -> Path:
    """Write records with ``%.17g`` floats, empty fields for absent values and LF endings.

    ``metadata`` entries become leading ``# key=value`` comment lines.
    """
    path = Path(path)
    try:
        path.write_bytes(format_csv(records, metadata).encode("utf-8"))
    except OSError as e:
        raise OSError(f"cannot write CSV to {path}: {e}") from e
    return path


def read_csv(path) -> tuple[list[SweepRecord], dict]:
    """Parse a file written by :func:`emit_csv` back to records and metadata."""
    meta = {}
    records = []
    header = None
    for line in Path(path).read_text(encoding="utf-8").split("\n"):
        if not line:
            continue
        if line.startswith("#"):
            k, _, v = line[1:].strip().partition("=")
            meta[k] = v
            continue
        cells = line.split(",")
        if header is None:
            header = cells
            if tuple(header) != CSV_COLUMNS:
                raise ContractViolation(f"unexpected CSV header {header}")
            continue
        row = dict(zip(header, cells))
        opt = {c: (float(row[c]) if row[c] else None) for c in ("iic", "bic", "bic_ridge")}
        records.append(SweepRecord(d=int(row["d"]), repeat=int(row["repeat"]), regime=row["regime"],
                                   train_mse=float(row["train_mse"]), test_mse=float(row["test_mse"]), **opt))
    return records, meta


class _Panel:
    def __init__(self, x0, y0, w, h, dmin, dmax, vmin, vmax, logy):
        self.x0, self.y0, self.w, self.h = x0, y0, w, h
        self.lx = (math.log10(dmin), math.log10(dmax))
        self.logy = logy
        if logy:
            vmin, vmax = math.log10(vmin), math.log10(vmax)
        if vmax == vmin:
            vmin, vmax = vmin - 1.0, vmax + 1.0
        pad = 0.05 * (vmax - vmin)
        self.ly = (vmin - pad, vmax + pad)

    def x(self, d):
        a, b = self.lx
        t = 0.5 if a == b else (math.log10(d) - a) / (b - a)
        return self.x0 + t * self.w

    def y(self, v):
        if self.logy:
            v = math.log10(v)
        a, b = self.ly
        return self.y0 + self.h - (v - a) / (b - a) * self.h


def emit_svg(records, path, series=SVG_SERIES, band: tuple[float, float] | None = None,
             width: int = 720, height: int = 640) -> Path:
    """Two stacked panels of mean-over-repeats curves against d on a log axis.

    The top panel holds ``test_mse`` (log scale) and the bottom one the
    criteria. ``band`` is the critical interval ``(d_lo, d_hi)`` in feature
    counts and is shaded in both panels. Each polyline carries its means in
    a ``data-means`` attribute as ``d:value`` pairs at full precision.
    """
    series = tuple(series)
    bad = set(series) - set(SVG_SERIES)
    if bad:
        raise ContractViolation(f"unknown SVG series {sorted(bad)}")
    means = {s: series_means(records, s) for s in series}
    ds = sorted({r.d for r in records}) or [1]
    dmin, dmax = ds[0], ds[-1]
    top_s = [s for s in series if s == "test_mse"]
    bot_s = [s for s in series if s != "test_mse"]

    def bounds(names, positive):
        vals = [v for s in names for v in means[s].values() if (v > 0 or not positive) and math.isfinite(v)]
        return (min(vals), max(vals)) if vals else (1.0, 10.0)

    margin, gap = 70, 50
    ph = (height - 2 * margin - gap) / 2
    pw = width - 2 * margin
    panels = [
        ("test MSE", top_s, _Panel(margin, margin, pw, ph, dmin, dmax, *bounds(top_s, True), logy=True)),
        ("criteria", bot_s, _Panel(margin, margin + ph + gap, pw, ph, dmin, dmax, *bounds(bot_s, False),
                                   logy=False)),
    ]
    out = ['<?xml version="1.0" encoding="UTF-8"?>',
           f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'viewBox="0 0 {width} {height}">',
           '<rect width="100%" height="100%" fill="white"/>']
    for title, names, P in panels:
        out.append(f'<g class="panel" data-title={quoteattr(title)}>')
        out.append(f'<rect x="{P.x0:.2f}" y="{P.y0:.2f}" width="{P.w:.2f}" height="{P.h:.2f}" '
                   'fill="none" stroke="black"/>')
        if band is not None:
            lo = min(max(band[0], dmin), dmax)
            hi = min(max(band[1], dmin), dmax)
            if hi > lo:
                out.append(f'<rect class="critical-band" x="{P.x(lo):.2f}" y="{P.y0:.2f}" '
                           f'width="{P.x(hi) - P.x(lo):.2f}" height="{P.h:.2f}" fill="#cccccc" '
                           f'fill-opacity="0.5" data-lo="{band[0]:.17g}" data-hi="{band[1]:.17g}"/>')
        for d in ds:
            out.append(f'<text x="{P.x(d):.2f}" y="{P.y0 + P.h + 14:.2f}" font-size="10" '
                       f'text-anchor="middle">{d}</text>')
        out.append(f'<text x="{P.x0:.2f}" y="{P.y0 - 8:.2f}" font-size="12">{title}</text>')
        for i, s in enumerate(names):
            pts = [(d, v) for d, v in means[s].items() if math.isfinite(v) and (v > 0 or not P.logy)]
            if not pts:
                continue
            coords = " ".join(f"{P.x(d):.3f},{P.y(v):.3f}" for d, v in pts)
            data = " ".join(f"{d}:{v:.17g}" for d, v in pts)
            out.append(f'<polyline class="series" data-series="{s}" data-means="{data}" points="{coords}" '
                       f'fill="none" stroke="{_COLORS[s]}" stroke-width="1.5"/>')
            out.append(f'<text x="{P.x0 + P.w - 80:.2f}" y="{P.y0 + 16 + 14 * i:.2f}" font-size="11" '
                       f'fill="{_COLORS[s]}">{s}</text>')
        out.append("</g>")
    out.append("</svg>")
    path = Path(path)
    try:
        path.write_bytes(("\n".join(out) + "\n").encode("utf-8"))
    except OSError as e:
        raise OSError(f"cannot write SVG to {path}: {e}") from e
    return path


def parse_svg_means(text: str) -> dict[str, dict[int, float]]:
    """Recover the ``data-means`` attributes written by :func:`emit_svg`."""
    root = ET.fromstring(text.encode("utf-8"))
    out = {}
    for el in root.iter("{http://www.w3.org/2000/svg}polyline"):
        pairs = (p.split(":") for p in el.get("data-means").split())
        out[el.get("data-series")] = {int(d): float(v) for d, v in pairs}
    return out
