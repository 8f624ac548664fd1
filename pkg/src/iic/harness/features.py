"""Random Fourier features for the Gaussian kernel."""

from __future__ import annotations

import numpy as np
import scipy.spatial.distance

from ..core import substream
from ..errors import ContractViolation

MEDIAN_SUBSAMPLE = 500


def median_heuristic(inputs, seed: int = 0) -> float:
    """Median pairwise distance on at most 500 points."""
    inputs = np.atleast_2d(np.asarray(inputs, dtype=float))
    if len(inputs) > MEDIAN_SUBSAMPLE:
        idx = substream(seed, 1).choice(len(inputs), MEDIAN_SUBSAMPLE, replace=False)
        inputs = inputs[np.sort(idx)]
    dist = scipy.spatial.distance.pdist(inputs)
    if dist.size == 0 or not np.median(dist) > 0:
        raise ContractViolation("median heuristic needs at least two distinct points")
    return float(np.median(dist))


def rff_transform(raw_inputs, d: int, bandwidth, seed: int) -> np.ndarray:
    """``sqrt(2/d) cos(W x + b)``, ``W ~ N(0, 1/bandwidth^2)``, ``b ~ U[0, 2 pi)``.

    W and b come from a stream keyed by ``(seed, d)`` so each feature count
    is reproducible on its own.
    """
    raw_inputs = np.atleast_2d(np.asarray(raw_inputs, dtype=float))
    if d < 1:
        raise ContractViolation("need d >= 1 features")
    if bandwidth == "median-heuristic":
        bandwidth = median_heuristic(raw_inputs, seed)
    bandwidth = float(bandwidth)
    if not bandwidth > 0:
        raise ContractViolation(f"bandwidth must be positive, got {bandwidth}")
    rng = substream(seed, d)
    W = rng.standard_normal((d, raw_inputs.shape[1])) / bandwidth
    b = rng.uniform(0.0, 2.0 * np.pi, d)
    return np.sqrt(2.0 / d) * np.cos(raw_inputs @ W.T + b)


def gaussian_kernel(a, b, bandwidth: float) -> np.ndarray:
    sq = scipy.spatial.distance.cdist(np.atleast_2d(a), np.atleast_2d(b), "sqeuclidean")
    return np.exp(-sq / (2.0 * bandwidth**2))
