"""The interpolating information criterion and its linear-regression relatives."""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields

import numpy as np

from .core import Prior, PredictorModel, RegressionDataset, jacobian
from .errors import (ContractViolation, DegenerateResidual, IICError, NotPositiveDefinite, PriorDegenerate,
                     RankDeficient, with_term)
from .geometry import cholesky_logdet, gram_matrix, log_det_gram, manifold_hessian, rank_cutoff
from .interpolate import pinv_interpolator

DELTA_R_FLOOR = 1e-12


@dataclass(frozen=True)
class CriterionReport:
    iic: float
    term_iterated_log_prior: float
    term_sharpness: float
    term_curvature: float
    term_correction: float
    tau_star: float
    delta_R: float
    free_energy_at_tau_star: float
    N: int

    @property
    def terms(self) -> tuple[float, float, float, float]:
        return (self.term_iterated_log_prior, self.term_sharpness, self.term_curvature, self.term_correction)

    def to_text(self) -> str:
        """Line-oriented ``key=value`` block, floats at full precision."""
        lines = []
        for f in fields(self):
            v = getattr(self, f.name)
            lines.append(f"{f.name}={v:d}" if isinstance(v, int) else f"{f.name}={v:.17g}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "CriterionReport":
        raw = dict(line.split("=", 1) for line in text.splitlines() if line.strip() and not line.startswith("#"))
        kw = {f.name: (int(raw[f.name]) if f.name == "N" else float(raw[f.name])) for f in fields(cls)}
        return cls(**kw)

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class FreeEnergyCurve:
    taus: np.ndarray
    values: np.ndarray

    @property
    def argmin_tau(self) -> float:
        return float(self.taus[int(np.argmin(self.values))])


def free_energy_bar(delta_R: float, log_det_J: float, log_K: float, N: int, tau):
    """Leading-order free energy ``dR/tau + logdetJ/2 + (N/2) log(tau pi) + log K / 2``."""
    tau = np.asarray(tau, dtype=float)
    if np.any(tau <= 0) or N < 1:
        raise ContractViolation("need tau > 0 and N >= 1")
    out = delta_R / tau + 0.5 * log_det_J + 0.5 * N * np.log(tau * np.pi) + 0.5 * log_K
    return float(out) if out.ndim == 0 else out


def free_energy_curve(delta_R, log_det_J, log_K, N, taus) -> FreeEnergyCurve:
    taus = np.asarray(taus, dtype=float)
    return FreeEnergyCurve(taus=taus, values=free_energy_bar(delta_R, log_det_J, log_K, N, taus))


def optimal_tau(delta_R: float, N: int) -> float:
    """Empirical-Bayes prior temperature ``2 dR / N``."""
    if not delta_R > DELTA_R_FLOOR:
        raise PriorDegenerate(f"R(theta*) - R(theta0) = {delta_R:.3e}: the prior mode interpolates")
    return 2.0 * delta_R / N


def log_relative_curvature(model: PredictorModel, data: RegressionDataset, prior: Prior, theta_star,
                           theta0=None) -> float:
    """``log det(manifold Hessian at theta*) - log det(hess R at theta0)``."""
    theta0 = prior.theta0 if theta0 is None else np.asarray(theta0, dtype=float)
    on_M = manifold_hessian(model, data, prior, theta_star).log_det
    ambient = cholesky_logdet(prior.hess_R(theta0), NotPositiveDefinite, "prior Hessian at theta0")
    return on_M - ambient


def relative_curvature(model, data, prior, theta_star, theta0=None) -> float:
    return float(np.exp(log_relative_curvature(model, data, prior, theta_star, theta0)))


def iic(model: PredictorModel, data: RegressionDataset, prior: Prior, theta_star) -> CriterionReport:
    """IIC of an interpolator with its four-term breakdown.

    Additive constants in N and d are dropped, so with ``R = |theta|^2/2``
    this sits ``log 2`` below :func:`iic_linear`.
    """
    theta_star = np.asarray(theta_star, dtype=float)
    N = data.N
    delta_R = prior.R(theta_star) - prior.R(prior.theta0)
    try:
        tau_star = optimal_tau(delta_R, N)
    except IICError as e:
        raise with_term(e, "iterated_log_prior")
    try:
        ldj = log_det_gram(gram_matrix(jacobian(model, theta_star, data)))
    except IICError as e:
        raise with_term(e, "sharpness")
    try:
        log_K = log_relative_curvature(model, data, prior, theta_star)
    except IICError as e:
        raise with_term(e, "curvature")
    t1 = float(np.log(delta_R))
    t2 = ldj / N
    t3 = log_K / N
    t4 = -float(np.log(N))
    return CriterionReport(
        iic=t1 + t2 + t3 + t4,
        term_iterated_log_prior=t1,
        term_sharpness=t2,
        term_curvature=t3,
        term_correction=t4,
        tau_star=tau_star,
        delta_R=float(delta_R),
        free_energy_at_tau_star=free_energy_bar(delta_R, ldj, log_K, N, tau_star),
        N=N,
    )


def free_energy_constant() -> float:
    """``(2/N) F(tau*) - IIC``, the same for every model: ``1 + log(2 pi)``."""
    return 1.0 + float(np.log(2.0 * np.pi))


def _full_row_rank(X):
    s = np.linalg.svd(X, compute_uv=False)
    if s.size < X.shape[0] or s[-1] <= rank_cutoff(s, X.shape):
        raise RankDeficient("X is not of full row rank", s)
    return s


def iic_linear(X, y) -> float:
    """``2 log|X^+ y| + (1/n) log det(X X^T) - log n`` for overparameterised least squares."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    n, d = X.shape
    if d <= n:
        raise ContractViolation(f"iic_linear needs d > n, got d = {d}, n = {n}")
    s = _full_row_rank(X)
    theta = pinv_interpolator(X, y).theta_star
    norm = np.linalg.norm(theta)
    if norm == 0.0:
        raise PriorDegenerate("X^+ y = 0")
    return 2.0 * np.log(norm) + 2.0 * float(np.sum(np.log(s))) / n - np.log(n)


def _bic_value(residual, n, d):
    return 2.0 * float(np.log(residual)) + (d / n - 1.0) * float(np.log(n))


def bic_linear(X, y) -> float:
    """``2 log|(I - X X^+) y| + (d/n - 1) log n``, normalised by n."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float).reshape(-1)
    n, d = X.shape
    if n <= d:
        raise ContractViolation(f"bic_linear needs n > d, got n = {n}, d = {d}")
    theta, *_ = np.linalg.lstsq(X, y, rcond=None)
    r = np.linalg.norm(y - X @ theta)
    if r <= 1e-12 * max(1.0, np.linalg.norm(y)):
        raise DegenerateResidual("least-squares residual is zero; BIC undefined for interpolating fits")
    return _bic_value(r, n, d)


def ridge_fit(X, y, lam: float) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float).reshape(-1)
    n, d = X.shape
    # solve in whichever of the two equivalent forms is smaller
    if d <= n:
        return np.linalg.solve(X.T @ X + lam * np.eye(d), X.T @ y)
    return X.T @ np.linalg.solve(X @ X.T + lam * np.eye(n), y)


def bic_ridge(X, y, lam: float) -> float:
    """BIC with the ridge residual in place of the least-squares one."""
    if not lam > 0:
        raise ContractViolation(f"ridge parameter must be positive, got {lam}")
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float).reshape(-1)
    n, d = X.shape
    r = np.linalg.norm(y - X @ ridge_fit(X, y, lam))
    return _bic_value(r, n, d)
