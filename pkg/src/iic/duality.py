"""Primal and dual marginal likelihoods, dual priors, and the radial coarea integral.

The dual model lives on data space R^{mn}: its prior is the fibre integral
``pi*(z) = int_{F^{-1}(z)} pi / sqrt(det J) dH^{d-mn}`` and its likelihood is
the Gibbs likelihood evaluated at ``z`` directly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.integrate
import scipy.linalg
import scipy.special

from .core import Prior, PredictorModel, RegressionDataset, stacked_many, substream
from .errors import ContractViolation, NumericError, RankDeficient, TailNotResolved, Unsupported
from .geometry import rank_cutoff
from .laplace import MAX_QUAD_DIM, quadrature_nd

MC_CHUNK = 1 << 16


@dataclass(frozen=True)
class DualGaussianPrior:
    """N(0, tau0 X X^T), the dual of an isotropic Gaussian prior under a linear model."""

    mean: np.ndarray
    covariance: np.ndarray
    log_det_cov: float
    tau0: float
    log_det_gram: float

    @property
    def n(self) -> int:
        return self.mean.shape[0]

    def logpdf(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        L = scipy.linalg.cholesky(self.covariance, lower=True)
        flat = z.reshape(-1, self.n) - self.mean
        sol = scipy.linalg.solve_triangular(L, flat.T, lower=True)
        quad = np.sum(sol**2, axis=0)
        out = -0.5 * self.n * np.log(2.0 * np.pi) - 0.5 * self.log_det_cov - 0.5 * quad
        return out.reshape(z.shape[:-1]) if z.ndim > 1 else out[0]

    def pdf(self, z):
        return np.exp(self.logpdf(z))

    def sample(self, rng: np.random.Generator, k: int) -> np.ndarray:
        L = scipy.linalg.cholesky(self.covariance, lower=True)
        return self.mean + rng.standard_normal((k, self.n)) @ L.T


def dual_prior_linear(X, tau0: float) -> DualGaussianPrior:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if not tau0 > 0:
        raise ContractViolation(f"tau0 must be positive, got {tau0}")
    s = np.linalg.svd(X, compute_uv=False)
    if s.size < X.shape[0] or s[-1] <= rank_cutoff(s, X.shape):
        raise RankDeficient("X is not of full row rank", s)
    gram = X @ X.T
    log_det_gram = 2.0 * float(np.sum(np.log(s)))
    n = X.shape[0]
    return DualGaussianPrior(mean=np.zeros(n), covariance=tau0 * 0.5 * (gram + gram.T),
                             log_det_cov=n * np.log(tau0) + log_det_gram, tau0=float(tau0),
                             log_det_gram=log_det_gram)


def _kernel_split(X):
    U, s, Vt = np.linalg.svd(X, full_matrices=True)
    n = X.shape[0]
    if s[-1] <= rank_cutoff(s, X.shape):
        raise RankDeficient("X is not of full row rank", s)
    pinv = Vt[:n].T @ (U.T / s[:, None])
    Q = Vt[n:].T
    return pinv, Q, 2.0 * float(np.sum(np.log(s)))


def fiber_density_mc(X, prior: Prior, z, samples: int, seed: int = 0, *, proposal_scale: float = 1.0,
                     proposal_df: float | None = None):
    """Monte Carlo estimate of the dual prior density ``pi*(z)`` for a linear model.

    Uses ``pi*(z) = det(X X^T)^{-1/2} int pi(X^+ z + Q w) dw`` with an
    importance proposal on ``w`` in kernel coordinates: N(0, s^2 I) by
    default, or a multivariate Student t with ``proposal_df`` degrees of
    freedom for heavy-tailed priors. Returns ``(estimate, std_error)``.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    z = np.asarray(z, dtype=float).reshape(-1)
    pinv, Q, log_det_gram = _kernel_split(X)
    k = Q.shape[1]
    base = pinv @ z
    s = float(proposal_scale)
    total = 0.0
    total_sq = 0.0
    done = 0
    stream = 0
    while done < samples:
        size = min(MC_CHUNK, samples - done)
        rng = substream(seed, stream)
        g = rng.standard_normal((size, k))
        if proposal_df is None:
            w = s * g
            log_q = -0.5 * np.sum(g**2, axis=1) - 0.5 * k * np.log(2.0 * np.pi) - k * np.log(s)
        else:
            nu = float(proposal_df)
            chi = rng.chisquare(nu, size)
            w = s * g / np.sqrt(chi / nu)[:, None]
            log_q = (scipy.special.gammaln(0.5 * (nu + k)) - scipy.special.gammaln(0.5 * nu)
                     - 0.5 * k * np.log(nu * np.pi) - k * np.log(s)
                     - 0.5 * (nu + k) * np.log1p(np.sum((w / s) ** 2, axis=1) / nu))
        log_w = prior.log_density(base + w @ Q.T) - log_q
        weights = np.exp(log_w)
        if not np.all(np.isfinite(weights)):
            raise NumericError("non-finite importance weights")
        total += float(np.sum(weights))
        total_sq += float(np.sum(weights**2))
        done += size
        stream += 1
    mean = total / samples
    var = max(total_sq / samples - mean**2, 0.0)
    factor = np.exp(-0.5 * log_det_gram)
    return mean * factor, np.sqrt(var / samples) * factor


@dataclass(frozen=True)
class EvidencePair:
    primal: float
    dual: float
    gamma: float
    method: str
    std_error: float = 0.0

    @property
    def relative_gap(self) -> float:
        return abs(self.primal - self.dual) / self.primal


def _log_gibbs(Fz: np.ndarray, y: np.ndarray, gamma: float) -> np.ndarray:
    # log c_{n,gamma} - L(z, y) / gamma, squared loss
    N = y.size
    return -0.5 * N * np.log(np.pi * gamma) - np.sum((Fz - y) ** 2, axis=-1) / gamma


def _mc_mean(draw, seed: int, samples: int):
    total, total_sq, done, stream = 0.0, 0.0, 0, 0
    while done < samples:
        size = min(MC_CHUNK, samples - done)
        vals = draw(substream(seed, stream), size)
        total += float(np.sum(vals))
        total_sq += float(np.sum(vals**2))
        done += size
        stream += 1
    mean = total / samples
    return mean, float(np.sqrt(max(total_sq / samples - mean**2, 0.0) / samples))


def evidence_primal(model: PredictorModel, data: RegressionDataset, prior: Prior, gamma: float,
                    method: str = "quadrature", budget: int = 200, seed: int = 0, *, box=None,
                    panels: int = 1, return_std: bool = False):
    """``Z = int c(F) exp(-L(F(theta), y)/gamma) pi(theta) dtheta`` over parameter space.

    ``budget`` is nodes per axis (quadrature) or sample count (monte-carlo).
    The default quadrature box is ``theta0 +- 10 * prior.scale``.
    """
    if not gamma > 0:
        raise ContractViolation("gamma must be positive")
    y = data.y_vec
    if method == "quadrature":
        if model.d > MAX_QUAD_DIM:
            raise Unsupported(f"quadrature needs d <= {MAX_QUAD_DIM}, got {model.d}")
        if box is None:
            if prior.scale is None:
                raise ContractViolation("prior has no scale; pass an explicit box")
            box = np.column_stack([prior.theta0 - 10 * prior.scale, prior.theta0 + 10 * prior.scale])

        def integrand(thetas):
            return np.exp(_log_gibbs(stacked_many(model, thetas, data), y, gamma) + prior.log_density(thetas))

        value = quadrature_nd(integrand, box, budget, panels=panels)
        return (value, 0.0) if return_std else value
    if method == "monte-carlo":
        def draw(rng, size):
            thetas = prior.sample(rng, size)
            return np.exp(_log_gibbs(stacked_many(model, thetas, data), y, gamma))

        value, se = _mc_mean(draw, seed, budget)
        return (value, se) if return_std else value
    raise ContractViolation(f"unknown method {method!r}")


def evidence_dual(dual_prior: DualGaussianPrior, y, gamma: float, method: str = "quadrature", budget: int = 2000,
                  seed: int = 0, *, box=None, panels: int = 1, return_std: bool = False):
    """``Z* = int c(z) exp(-L(z, y)/gamma) pi*(z) dz`` over data space."""
    y = np.asarray(y, dtype=float).reshape(-1)
    n = y.size
    if method == "quadrature":
        if n > MAX_QUAD_DIM:
            raise Unsupported(f"quadrature needs mn <= {MAX_QUAD_DIM}, got {n}")
        if box is None:
            lik_sd = np.sqrt(gamma / 2.0)
            prior_sd = np.sqrt(np.diag(dual_prior.covariance))
            lo = np.minimum(y - 10 * lik_sd, dual_prior.mean - 10 * prior_sd)
            hi = np.maximum(y + 10 * lik_sd, dual_prior.mean + 10 * prior_sd)
            box = np.column_stack([lo, hi])

        def integrand(zs):
            return np.exp(_log_gibbs(zs, y, gamma) + dual_prior.logpdf(zs))

        value = quadrature_nd(integrand, box, budget, panels=panels)
        return (value, 0.0) if return_std else value
    if method == "monte-carlo":
        def draw(rng, size):
            return np.exp(_log_gibbs(dual_prior.sample(rng, size), y, gamma))

        value, se = _mc_mean(draw, seed, budget)
        return (value, se) if return_std else value
    raise ContractViolation(f"unknown method {method!r}")


def gaussian_convolution_evidence(X, y, tau0: float, gamma: float) -> float:
    """Closed form ``N(y; 0, tau0 X X^T + (gamma/2) I)`` for the linear-Gaussian model."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float).reshape(-1)
    C = tau0 * X @ X.T + 0.5 * gamma * np.eye(len(y))
    L = scipy.linalg.cholesky(C, lower=True)
    a = scipy.linalg.solve_triangular(L, y, lower=True)
    return float(np.exp(-0.5 * len(y) * np.log(2 * np.pi) - np.sum(np.log(np.diag(L))) - 0.5 * a @ a))


def radial_integral(g, d: int, points=None, *, tol: float = 1e-12, max_panels: int = 64) -> float:
    """``int_{R^d} g(|theta|) dtheta`` via the spherical coarea identity.

    Adaptive quadrature on dyadic panels ``[0, 1], [1, 2], [2, 4], ...``
    until a panel contributes less than ``tol`` of the running total.
    ``points`` lists known breakpoints of g (e.g. jumps).
    """
    if d < 1:
        raise ContractViolation("dimension must be >= 1")
    breaks = sorted(float(p) for p in (points or ()))
    surface = 2.0 * np.pi ** (d / 2.0) / scipy.special.gamma(d / 2.0)

    def piece(a, b):
        inner = [p for p in breaks if a < p < b]
        val, _ = scipy.integrate.quad(lambda r: r ** (d - 1) * g(r), a, b, points=inner or None,
                                      epsabs=0.0, epsrel=1e-13, limit=500)
        return val

    total = piece(0.0, 1.0)
    a = 1.0
    for _ in range(max_panels):
        b = 2.0 * a
        contrib = piece(a, b)
        total += contrib
        a = b
        if abs(contrib) <= tol * abs(total) and a > (breaks[-1] if breaks else 0.0):
            return surface * total
    raise TailNotResolved(f"radial tail still contributing beyond r = {a:g}")
