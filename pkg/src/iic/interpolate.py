"""Interpolators: minimum-R points of the zero-loss set, and MAP estimates."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .core import EPS, Prior, PredictorModel, RegressionDataset, eval_stacked, isotropic_gaussian, jacobian, total_loss
from .errors import ContractViolation, DidNotConverge, Infeasible, NotPositiveDefinite, RankDeficient
from .geometry import _full_row_rank_svd, rank_cutoff, tangent_projector

STATIONARITY_TOL = 1e-8
ARMIJO = 1e-4


@dataclass(frozen=True)
class InterpolationResult:
    theta_star: np.ndarray
    residual: float
    R_value: float
    iterations: int
    converged: bool


@dataclass(frozen=True)
class AnnealingTrace:
    gammas: np.ndarray
    thetas: np.ndarray
    distances_to_int: np.ndarray
    losses: np.ndarray


def residual_tol(data: RegressionDataset) -> float:
    y = data.y_vec
    return 1e-10 * (1.0 + float(y @ y))


def pinv_interpolator(X, y, prior: Prior | None = None) -> InterpolationResult:
    """Minimum-norm interpolator ``X^+ y`` (SVD with the package rank cutoff).

    ``R_value`` uses ``prior`` if given, else ``|theta|^2 / 2``.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float).reshape(-1)
    if X.shape[0] != y.shape[0]:
        raise ContractViolation(f"X has {X.shape[0]} rows, y has {y.shape[0]} entries")
    U, s, Vt = np.linalg.svd(X, full_matrices=False)
    keep = s > rank_cutoff(s, X.shape)
    theta = Vt[keep].T @ ((U[:, keep].T @ y) / s[keep])
    gap = np.linalg.norm(X @ theta - y)
    if gap > 1e-8 * np.linalg.norm(y):
        raise Infeasible(f"y is not in range(X): |X X^+ y - y| = {gap:.3e}")
    prior = prior if prior is not None else isotropic_gaussian(X.shape[1])
    return InterpolationResult(theta_star=theta, residual=float(gap**2), R_value=prior.R(theta),
                               iterations=0, converged=True)


def _min_norm_step(DF: np.ndarray, r: np.ndarray) -> np.ndarray:
    # DF^T J^{-1} r through the SVD
    U, s, Vt = _full_row_rank_svd(DF)
    return Vt.T @ ((U.T @ r) / s)


def project_to_manifold(model: PredictorModel, data: RegressionDataset, theta_init, *, max_iter: int = 200,
                        tol: float | None = None, full_output: bool = False):
    """Gauss-Newton projection onto M with step halving.

    Returns theta, or ``(theta, iterations, loss)`` with ``full_output``.
    """
    theta = np.asarray(theta_init, dtype=float).copy()
    tol = residual_tol(data) if tol is None else tol
    r = (eval_stacked(model, theta, data) - data.targets).reshape(-1)
    loss = float(r @ r)
    for it in range(max_iter + 1):
        if loss <= tol:
            return (theta, it, loss) if full_output else theta
        if it == max_iter:
            break
        step = _min_norm_step(jacobian(model, theta, data), r)
        t = 1.0
        while True:
            cand = theta - t * step
            rc = (eval_stacked(model, cand, data) - data.targets).reshape(-1)
            lc = float(rc @ rc)
            if lc < loss:
                break
            t *= 0.5
            if t < 1e-12:
                raise DidNotConverge("Gauss-Newton step halving failed", residual=loss)
        theta, r, loss = cand, rc, lc
    raise DidNotConverge(f"projection did not reach tolerance in {max_iter} iterations", residual=loss)


def minimize_prior_on_manifold(model: PredictorModel, data: RegressionDataset, prior: Prior, theta_on_M, *,
                               max_iter: int = 5000, stat_tol: float = STATIONARITY_TOL) -> InterpolationResult:
    """Minimise R over M by projected gradient steps followed by re-projection.

    Terminates when ``|Pi grad R| <= stat_tol``. The first trial step is
    1.0; later ones use the Barzilai-Borwein estimate from the previous
    accepted step, with Armijo backtracking as the safeguard.
    """
    tol = residual_tol(data)
    theta = np.asarray(theta_on_M, dtype=float).copy()
    loss = total_loss(eval_stacked(model, theta, data), data.targets)
    if loss > tol:
        raise ContractViolation(f"starting point is not on M (loss {loss:.3e} > {tol:.3e})")

    def tangent_grad(t):
        Pi = tangent_projector(jacobian(model, t, data))
        return Pi @ prior.grad_R(t)

    g = tangent_grad(theta)
    R_theta = prior.R(theta)
    eta = 1.0
    for it in range(max_iter):
        gnorm = float(np.linalg.norm(g))
        if gnorm <= stat_tol:
            return InterpolationResult(theta, loss, R_theta, it, True)
        while True:
            try:
                cand, _, lc = project_to_manifold(model, data, theta - eta * g, tol=tol, full_output=True)
                Rc = prior.R(cand)
                gc = tangent_grad(cand)
            except (DidNotConverge, RankDeficient):
                Rc = np.inf
            if Rc <= R_theta - ARMIJO * eta * gnorm**2:
                break
            # below the resolution of R: accept if stationarity improves
            if (np.isfinite(Rc) and abs(Rc - R_theta) <= 1e2 * EPS * max(1.0, abs(R_theta))
                    and np.linalg.norm(gc) < gnorm):
                break
            eta *= 0.5
            if eta < 1e-14:
                return InterpolationResult(theta, loss, R_theta, it, False)
        step, dg = cand - theta, gc - g
        curv = float(step @ dg)
        eta = float(np.clip(step @ step / curv, 1e-10, 1e8)) if curv > 0 else min(2.0 * eta, 1e8)
        theta, loss, R_theta, g = cand, lc, Rc, gc
    if np.linalg.norm(g) <= stat_tol:
        return InterpolationResult(theta, loss, R_theta, max_iter, True)
    raise DidNotConverge(f"tangent descent did not reach |Pi grad R| <= {stat_tol}", residual=float(np.linalg.norm(g)))


def solve_interpolator(model: PredictorModel, data: RegressionDataset, prior: Prior, theta_init=None) -> InterpolationResult:
    """Two-phase solve: project to M, then minimise R along M."""
    start = prior.theta0 if theta_init is None else theta_init
    on_M = project_to_manifold(model, data, start)
    return minimize_prior_on_manifold(model, data, prior, on_M)


def _map_objective(model, data, prior, gamma, theta):
    r = (eval_stacked(model, theta, data) - data.targets).reshape(-1)
    return prior.R(theta) + float(r @ r) / gamma, r


def map_estimate(model: PredictorModel, data: RegressionDataset, prior: Prior, gamma: float, theta_init, *,
                 max_iter: int = 500, full_output: bool = False):
    """Minimise ``R(theta) + L(F(theta), y) / gamma`` by damped Gauss-Newton.

    Stops when the gradient norm is at most ``1e-8 (1 + 1/gamma)``.
    """
    if not gamma > 0:
        raise ContractViolation(f"gamma must be positive, got {gamma}")
    theta = np.asarray(theta_init, dtype=float).copy()
    tol = 1e-8 * (1.0 + 1.0 / gamma)
    phi, r = _map_objective(model, data, prior, gamma, theta)
    gnorm = np.inf
    for it in range(max_iter + 1):
        DF = jacobian(model, theta, data)
        grad = prior.grad_R(theta) + (2.0 / gamma) * (DF.T @ r)
        gnorm = float(np.linalg.norm(grad))
        if gnorm <= tol:
            return (theta, it, gnorm) if full_output else theta
        if it == max_iter:
            break
        H = np.asarray(prior.hess_R(theta), dtype=float) + (2.0 / gamma) * (DF.T @ DF)
        direction = None
        mu = 0.0
        scale = max(1.0, float(np.abs(np.diag(H)).max()))
        for _ in range(60):
            try:
                c = scipy.linalg.cho_factor(H + mu * np.eye(len(theta)))
                direction = -scipy.linalg.cho_solve(c, grad)
                if direction @ grad < 0:
                    break
            except np.linalg.LinAlgError:
                pass
            mu = max(10.0 * mu, 1e-10 * scale)
        if direction is None:
            raise NotPositiveDefinite("could not build a descent direction for the MAP objective")
        t = 1.0
        slope = float(direction @ grad)
        while True:
            cand = theta + t * direction
            phic, rc = _map_objective(model, data, prior, gamma, cand)
            if phic <= phi + ARMIJO * t * slope:
                break
            if abs(phic - phi) <= 1e2 * EPS * max(1.0, abs(phi)):
                DFc = jacobian(model, cand, data)
                gc = prior.grad_R(cand) + (2.0 / gamma) * (DFc.T @ rc)
                if np.linalg.norm(gc) < gnorm:
                    break
            t *= 0.5
            if t < 1e-14:
                raise DidNotConverge("MAP line search failed", residual=gnorm)
        theta, phi, r = cand, phic, rc
    raise DidNotConverge(f"MAP solve did not reach gradient tolerance {tol:.2e}", residual=gnorm)


def anneal_map(model: PredictorModel, data: RegressionDataset, prior: Prior, gamma_schedule, theta_star_ref, *,
               theta_init=None) -> AnnealingTrace:
    """MAP estimates along a decreasing temperature schedule, warm-started."""
    gammas = np.asarray(gamma_schedule, dtype=float)
    if gammas.ndim != 1 or gammas.size == 0 or np.any(gammas <= 0):
        raise ContractViolation("schedule must be a non-empty sequence of positive temperatures")
    if np.any(np.diff(gammas) >= 0):
        raise ContractViolation("schedule must be strictly decreasing")
    if gammas[-1] >= 1e-6:
        raise ContractViolation("schedule must end below 1e-6")
    ref = np.asarray(theta_star_ref, dtype=float)
    theta = prior.theta0.copy() if theta_init is None else np.asarray(theta_init, dtype=float).copy()
    thetas, dists, losses = [], [], []
    for gamma in gammas:
        theta = map_estimate(model, data, prior, gamma, theta)
        thetas.append(theta)
        dists.append(float(np.linalg.norm(theta - ref)))
        losses.append(total_loss(eval_stacked(model, theta, data), data.targets))
    return AnnealingTrace(gammas=gammas, thetas=np.array(thetas), distances_to_int=np.array(dists),
                          losses=np.array(losses))
