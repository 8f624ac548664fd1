"""Tangent spaces and curvature of the interpolating manifold ``M = F^{-1}(y)``."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .core import EPS, FD_SCALE, Prior, PredictorModel, RegressionDataset, eval_stacked, jacobian, total_loss
from .errors import ContractViolation, NotPositiveDefinite, RankDeficient

FEASIBILITY_TOL = 1e-8


def rank_cutoff(singular_values: np.ndarray, shape) -> float:
    """Singular values at or below this are treated as zero."""
    if singular_values.size == 0:
        return 0.0
    return max(shape) * EPS * float(np.max(singular_values))


def _sign_fix(B: np.ndarray) -> np.ndarray:
    # make the largest-magnitude entry of each column positive
    if B.size == 0:
        return B
    idx = np.argmax(np.abs(B), axis=0)
    signs = np.sign(B[idx, np.arange(B.shape[1])])
    signs[signs == 0] = 1.0
    return B * signs


def _full_row_rank_svd(DF: np.ndarray, full_matrices: bool = False):
    DF = np.atleast_2d(np.asarray(DF, dtype=float))
    mn, d = DF.shape
    if mn > d:
        raise ContractViolation(f"DF is {mn} x {d}; need mn <= d")
    U, s, Vt = np.linalg.svd(DF, full_matrices=full_matrices)
    if mn and s[-1] <= rank_cutoff(s, DF.shape):
        raise RankDeficient(f"DF is rank deficient (smallest singular value {s[-1]:.3e})", s)
    return U, s, Vt


def gram_matrix(DF) -> np.ndarray:
    """``J = DF DF^T``."""
    DF = np.atleast_2d(np.asarray(DF, dtype=float))
    J = DF @ DF.T
    return 0.5 * (J + J.T)


def tangent_projector(DF) -> np.ndarray:
    """Orthogonal projector onto ``ker(DF)``: ``I - DF^T J^{-1} DF``.

    Evaluated as ``I - V V^T`` from the thin SVD, which is the same matrix
    without forming ``J^{-1}``.
    """
    _, _, Vt = _full_row_rank_svd(DF)
    d = Vt.shape[1]
    Pi = np.eye(d) - Vt.T @ Vt
    return 0.5 * (Pi + Pi.T)


def tangent_basis(Pi, mn: int) -> np.ndarray:
    """Orthonormal basis (``d x (d - mn)``) of the range of a projector."""
    Pi = np.asarray(Pi, dtype=float)
    d = Pi.shape[0]
    w, V = np.linalg.eigh(0.5 * (Pi + Pi.T))
    keep = w > 0.5
    if int(keep.sum()) != d - mn:
        raise RankDeficient(f"projector has rank {int(keep.sum())}, expected {d - mn}", w)
    if np.max(np.abs(w * (1.0 - w))) > 1e-6:
        raise ContractViolation("matrix is not a projector: eigenvalues away from {0, 1}")
    return _sign_fix(V[:, keep][:, ::-1])


@dataclass(frozen=True)
class TangentFrame:
    theta: np.ndarray
    J: np.ndarray
    Pi: np.ndarray
    U: np.ndarray
    singular_values: np.ndarray

    @property
    def dim(self) -> int:
        return self.U.shape[1]


def tangent_frame(DF, theta=None) -> TangentFrame:
    """Gram matrix, projector and tangent basis at one point.

    The basis is taken from the trailing right singular vectors of DF, which
    spans the same space as ``tangent_basis(Pi)`` at a fraction of the cost.
    """
    DF = np.atleast_2d(np.asarray(DF, dtype=float))
    mn, d = DF.shape
    _, s, Vt = _full_row_rank_svd(DF, full_matrices=True)
    row = Vt[:mn]
    Pi = np.eye(d) - row.T @ row
    Pi = 0.5 * (Pi + Pi.T)
    U = _sign_fix(Vt[mn:].T.copy())
    theta = np.zeros(d) if theta is None else np.asarray(theta, dtype=float)
    return TangentFrame(theta=theta, J=gram_matrix(DF), Pi=Pi, U=U, singular_values=s)


def _projector_at(model: PredictorModel, data: RegressionDataset, theta) -> np.ndarray:
    return tangent_projector(jacobian(model, theta, data))


def weingarten_fd(model: PredictorModel, data: RegressionDataset, theta, u, w, *, Pi=None,
                  step: float | None = None) -> np.ndarray:
    """Shape operator ``S(u, w) = (d/dt) Pi(theta + t u) w`` by central differences."""
    theta = np.asarray(theta, dtype=float)
    u = np.asarray(u, dtype=float)
    w = np.asarray(w, dtype=float)
    if Pi is None:
        Pi = _projector_at(model, data, theta)
    nu = np.linalg.norm(u)
    if np.linalg.norm(u - Pi @ u) > 1e-6 * max(nu, 1e-300):
        raise ContractViolation("direction u is not tangent to M")
    h = FD_SCALE * max(1.0, float(np.linalg.norm(theta))) if step is None else step
    Pp = _projector_at(model, data, theta + h * u)
    Pm = _projector_at(model, data, theta - h * u)
    return (Pp - Pm) @ w / (2.0 * h)


def cholesky_logdet(A, error=NotPositiveDefinite, what: str = "matrix") -> float:
    """``log det A`` for symmetric positive definite A."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if A.size == 0:
        return 0.0
    try:
        L = scipy.linalg.cholesky(A, lower=True)
    except np.linalg.LinAlgError as e:
        raise error(f"{what} is not positive definite") from e
    pivots = np.diag(L) ** 2
    if pivots.min() <= A.shape[0] * EPS * float(np.max(np.abs(np.diag(A)))):
        raise error(f"{what} is numerically singular (smallest pivot {pivots.min():.3e})")
    return 2.0 * float(np.sum(np.log(np.diag(L))))


def log_det_gram(J) -> float:
    """Log-determinant of the Gram matrix (sharpness term, unregularised)."""
    J = np.atleast_2d(np.asarray(J, dtype=float))
    if not np.allclose(J, J.T, rtol=1e-10, atol=1e-12 * max(1.0, np.abs(J).max(initial=0.0))):
        raise ContractViolation("Gram matrix must be symmetric")
    return cholesky_logdet(J, RankDeficient, "Gram matrix")


@dataclass(frozen=True)
class ManifoldHessianResult:
    H: np.ndarray
    asymmetry: float
    log_det: float
    frame: TangentFrame


def manifold_hessian(model: PredictorModel, data: RegressionDataset, prior: Prior, theta) -> ManifoldHessianResult:
    """Hessian of R restricted to M, in the tangent basis of the frame at theta.

    ``H[k, l] = U_k . (Pi hess_R U_l + S(U_l, (I - Pi) grad_R))``. The
    Weingarten term vanishes identically for affine models.
    """
    theta = np.asarray(theta, dtype=float)
    resid = total_loss(eval_stacked(model, theta, data), data.targets)
    if resid > FEASIBILITY_TOL:
        raise ContractViolation(f"theta is not on M (training loss {resid:.3e})")
    frame = tangent_frame(jacobian(model, theta, data), theta)
    U, Pi = frame.U, frame.Pi
    A = np.asarray(prior.hess_R(theta), dtype=float)
    # U^T Pi = U^T, so the ambient term is U^T A U
    H = U.T @ (A @ U)
    if not model.linear and U.shape[1]:
        g = np.asarray(prior.grad_R(theta), dtype=float)
        g_normal = g - Pi @ g
        S = np.column_stack([weingarten_fd(model, data, theta, U[:, l], g_normal, Pi=Pi)
                             for l in range(U.shape[1])])
        H = H + U.T @ S
    asym = float(np.linalg.norm(H - H.T))
    if asym > 1e-4 * (1.0 + np.linalg.norm(H)):
        warnings.warn(f"manifold Hessian asymmetry {asym:.2e} exceeds finite-difference budget", RuntimeWarning)
    H = 0.5 * (H + H.T)
    log_det = cholesky_logdet(H, NotPositiveDefinite, "manifold Hessian (theta is not a strict constrained minimiser)")
    return ManifoldHessianResult(H=H, asymmetry=asym, log_det=log_det, frame=frame)
