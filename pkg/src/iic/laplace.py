"""Laplace approximations (Euclidean and on a constraint manifold) and the
desk-scale quadrature used to check them."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .core import FD_SCALE, Prior, PredictorModel, RegressionDataset
from .errors import ContractViolation, DegenerateParameterization, NotPositiveDefinite, Unsupported
from .geometry import cholesky_logdet, manifold_hessian

MAX_QUAD_DIM = 4


@dataclass(frozen=True)
class LaplaceEstimate:
    log_value: float
    order: str = "leading"

    @property
    def value(self) -> float:
        return float(np.exp(self.log_value))


def laplace_point(eta_at_min: float, hess_eta, g_at_min: float, gamma: float, k: int) -> LaplaceEstimate:
    """Leading term of ``int exp(-eta/gamma) g`` over R^k."""
    hess_eta = np.atleast_2d(np.asarray(hess_eta, dtype=float))
    if hess_eta.shape != (k, k):
        raise ContractViolation(f"Hessian has shape {hess_eta.shape}, expected ({k}, {k})")
    if not g_at_min > 0 or not gamma > 0:
        raise ContractViolation("need g(x0) > 0 and gamma > 0")
    log_det = cholesky_logdet(hess_eta, NotPositiveDefinite, "Hessian of eta")
    log_value = 0.5 * k * np.log(2.0 * np.pi * gamma) - 0.5 * log_det - eta_at_min / gamma + np.log(g_at_min)
    return LaplaceEstimate(float(log_value))


def laplace_manifold(model: PredictorModel, data: RegressionDataset, prior: Prior, theta_star, tau: float,
                     Q_at_star: float = 1.0) -> LaplaceEstimate:
    """Leading term of ``int_M exp(-R/tau) Q dH`` around the constrained minimiser."""
    if not tau > 0 or not Q_at_star > 0:
        raise ContractViolation("need tau > 0 and Q(theta*) > 0")
    mh = manifold_hessian(model, data, prior, theta_star)
    k = mh.H.shape[0]
    log_value = (0.5 * k * np.log(2.0 * np.pi * tau) - prior.R(np.asarray(theta_star, dtype=float)) / tau
                 + np.log(Q_at_star) - 0.5 * mh.log_det)
    return LaplaceEstimate(float(log_value))


def _gauss_legendre(lo: float, hi: float, points: int, panels: int):
    x, w = np.polynomial.legendre.leggauss(points)
    edges = np.linspace(lo, hi, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    nodes = (mid[:, None] + half[:, None] * x[None, :]).reshape(-1)
    weights = (half[:, None] * w[None, :]).reshape(-1)
    return nodes, weights


def quadrature_nd(f: Callable[[np.ndarray], np.ndarray], box: Sequence[Sequence[float]], points_per_axis: int, *,
                  panels: int = 1, chunk: int = 1 << 20) -> float:
    """Tensor-product Gauss-Legendre integral of a vectorised ``f`` over a box.

    ``f`` receives an ``(M, k)`` array of nodes and returns ``M`` values.
    Each axis uses ``panels`` equal sub-intervals of ``points_per_axis`` nodes.
    """
    box = np.atleast_2d(np.asarray(box, dtype=float))
    k = box.shape[0]
    if box.shape != (k, 2):
        raise ContractViolation("box must be a sequence of (lo, hi) pairs")
    if k > MAX_QUAD_DIM:
        raise Unsupported(f"tensor quadrature is limited to {MAX_QUAD_DIM} dimensions, got {k}")
    rules = [_gauss_legendre(lo, hi, points_per_axis, panels) for lo, hi in box]
    if k == 1:
        nodes, weights = rules[0]
        return float(np.sum(weights * np.asarray(f(nodes[:, None]), dtype=float)))
    rest_nodes = np.stack(np.meshgrid(*[r[0] for r in rules[1:]], indexing="ij"), axis=-1).reshape(-1, k - 1)
    rest_w = np.prod(np.stack(np.meshgrid(*[r[1] for r in rules[1:]], indexing="ij"), axis=-1), axis=-1).reshape(-1)
    first_nodes, first_w = rules[0]
    per = max(1, chunk // len(rest_w))
    partials = []
    for start in range(0, len(first_nodes), per):
        xs = first_nodes[start:start + per]
        pts = np.concatenate([np.repeat(xs, len(rest_w))[:, None], np.tile(rest_nodes, (len(xs), 1))], axis=1)
        vals = np.asarray(f(pts), dtype=float).reshape(len(xs), len(rest_w))
        partials.append(first_w[start:start + per] @ (vals @ rest_w))
    return float(math.fsum(partials))


def curve_integral(parameterization: Callable[[float], np.ndarray], integrand: Callable[[np.ndarray], float],
                   t_range: tuple[float, float], points: int, *, panels: int = 1) -> float:
    """Line integral ``int integrand(theta(t)) |theta'(t)| dt`` (1-D Hausdorff measure)."""
    nodes, weights = _gauss_legendre(t_range[0], t_range[1], points, panels)
    total = []
    for t, w in zip(nodes, weights):
        h = FD_SCALE * max(1.0, abs(t))
        speed = np.linalg.norm((np.asarray(parameterization(t + h)) - np.asarray(parameterization(t - h))) / (2 * h))
        if not speed > 1e-12:
            raise DegenerateParameterization(f"parameterisation speed vanishes at t = {t:.6g}")
        total.append(w * float(integrand(np.asarray(parameterization(t), dtype=float))) * speed)
    return float(np.sum(total))
