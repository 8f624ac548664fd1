"""Domain types: datasets, predictor models, squared loss, priors.

Conventions used throughout the package:

* ``F(theta)`` is the ``n x m`` matrix of predictions; its vectorisation is
  row-major, so entry ``(i, j)`` maps to row ``i * m + j`` of the Jacobian.
* Priors are carried as ``R = -log(pi) - log_norm_const``, i.e. the negative
  log-density without its normaliser.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import ContractViolation, DidNotConverge, NumericError

EPS = np.finfo(float).eps
FD_SCALE = EPS ** (1.0 / 3.0)


def substream(seed, *keys: int) -> np.random.Generator:
    """Independent Philox stream keyed by ``(seed, *keys)``.

    ``seed`` may itself be a tuple of integers (an already-derived key).
    Every random draw in the package goes through this so results never
    depend on evaluation order or thread count.
    """
    root = list(seed) if isinstance(seed, (tuple, list)) else [seed]
    entropy = [int(k) for k in (*root, *keys)]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))


# ---------------------------------------------------------------------------
# data


@dataclass(frozen=True)
class RegressionDataset:
    inputs: np.ndarray
    targets: np.ndarray

    def __post_init__(self):
        x = np.atleast_2d(np.asarray(self.inputs, dtype=float))
        y = np.asarray(self.targets, dtype=float)
        if y.ndim == 1:
            y = y[:, None]
        if y.ndim != 2:
            raise ContractViolation(f"targets must be 1-D or 2-D, got shape {y.shape}")
        if x.shape[0] != y.shape[0]:
            raise ContractViolation(f"inputs have {x.shape[0]} rows but targets have {y.shape[0]}")
        if x.shape[0] < 1 or y.shape[1] < 1:
            raise ContractViolation("dataset needs n >= 1 and m >= 1")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise ContractViolation("dataset entries must be finite")
        x.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "inputs", x)
        object.__setattr__(self, "targets", y)

    @property
    def n(self) -> int:
        return self.inputs.shape[0]

    @property
    def m(self) -> int:
        return self.targets.shape[1]

    @property
    def p(self) -> int:
        return self.inputs.shape[1]

    @property
    def N(self) -> int:
        return self.n * self.m

    @property
    def y_vec(self) -> np.ndarray:
        return self.targets.reshape(-1)


# ---------------------------------------------------------------------------
# models


@dataclass(frozen=True)
class PredictorModel:
    """A smooth parametric predictor ``f(x, theta)``.

    ``predict(x, theta)`` maps one input row to an output vector of length m.
    ``jacobian_fn(inputs, theta)`` optionally returns the analytic ``mn x d``
    Jacobian of the stacked map. ``predict_batch(inputs, theta)`` is an
    optional vectorised form of ``predict``. Set ``linear`` only when F is
    affine in theta; geometry then treats DF as constant.
    """

    d: int
    predict: Callable[[np.ndarray, np.ndarray], np.ndarray]
    jacobian_fn: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = None
    predict_batch: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = None
    linear: bool = False
    name: str = "model"

    @property
    def jacobian_mode(self) -> str:
        return "analytic" if self.jacobian_fn is not None else "finite-difference"


def _check_theta(model: PredictorModel, theta) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (model.d,):
        raise ContractViolation(f"theta has shape {theta.shape}, model expects ({model.d},)")
    if not np.all(np.isfinite(theta)):
        raise ContractViolation("theta must be finite")
    return theta


def eval_stacked(model: PredictorModel, theta, data: RegressionDataset) -> np.ndarray:
    """Predictions ``F(theta)`` as an ``n x m`` matrix."""
    theta = _check_theta(model, theta)
    if model.predict_batch is not None:
        out = np.asarray(model.predict_batch(data.inputs, theta), dtype=float)
        out = out.reshape(data.n, -1)
    else:
        out = np.array([np.atleast_1d(model.predict(x, theta)) for x in data.inputs], dtype=float)
    if out.shape != (data.n, data.m):
        raise ContractViolation(f"model produced predictions of shape {out.shape}, targets are {(data.n, data.m)}")
    return out


def fd_jacobian(model: PredictorModel, theta, data: RegressionDataset, step_scale: float = 1.0) -> np.ndarray:
    """Central-difference Jacobian of vec(F), step ``cbrt(eps) * max(1, |theta_k|)``."""
    theta = _check_theta(model, theta)
    jac = np.empty((data.N, model.d))
    for k in range(model.d):
        h = step_scale * FD_SCALE * max(1.0, abs(theta[k]))
        tp = theta.copy()
        tm = theta.copy()
        tp[k] += h
        tm[k] -= h
        # the actual representable step
        hk = tp[k] - tm[k]
        jac[:, k] = (eval_stacked(model, tp, data) - eval_stacked(model, tm, data)).reshape(-1) / hk
    return jac


def jacobian(model: PredictorModel, theta, data: RegressionDataset) -> np.ndarray:
    """Jacobian ``DF(theta)`` of shape ``mn x d`` (row ``i*m + j`` is output j of point i)."""
    theta = _check_theta(model, theta)
    if model.jacobian_fn is not None:
        jac = np.asarray(model.jacobian_fn(data.inputs, theta), dtype=float)
        if jac.shape != (data.N, model.d):
            raise ContractViolation(f"analytic Jacobian has shape {jac.shape}, expected {(data.N, model.d)}")
    else:
        jac = fd_jacobian(model, theta, data)
    if not np.all(np.isfinite(jac)):
        raise NumericError("Jacobian has non-finite entries")
    return jac


def stacked_many(model: PredictorModel, thetas: np.ndarray, data: RegressionDataset) -> np.ndarray:
    """vec(F) for a batch of parameter vectors, shape ``(k, mn)``.

    Affine models are evaluated as ``F(0) + DF thetas`` in one product.
    """
    thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
    if model.linear:
        zero = np.zeros(model.d)
        offset = eval_stacked(model, zero, data).reshape(-1)
        return offset + thetas @ jacobian(model, zero, data).T
    return np.stack([eval_stacked(model, t, data).reshape(-1) for t in thetas])


def linear_model(d: int) -> PredictorModel:
    """``f(x, theta) = x . theta`` with scalar output; DF is the design matrix."""
    return PredictorModel(
        d=d,
        predict=lambda x, theta: np.atleast_1d(x @ theta),
        jacobian_fn=lambda inputs, theta: np.array(inputs, dtype=float),
        predict_batch=lambda inputs, theta: (inputs @ theta)[:, None],
        linear=True,
        name="linear",
    )


def tanh_network(p: int, width: int) -> PredictorModel:
    """One-hidden-layer network ``sum_j a_j tanh(w_j . x + b_j)``.

    Parameters are packed as ``(W.ravel(), b, a)`` with ``W`` of shape
    ``width x p``, so ``d = width * (p + 2)``.
    """
    d = width * (p + 2)

    def unpack(theta):
        W = theta[: width * p].reshape(width, p)
        b = theta[width * p: width * (p + 1)]
        a = theta[width * (p + 1):]
        return W, b, a

    def predict_batch(inputs, theta):
        W, b, a = unpack(theta)
        return (np.tanh(inputs @ W.T + b) @ a)[:, None]

    def jac(inputs, theta):
        W, b, a = unpack(theta)
        h = np.tanh(inputs @ W.T + b)
        dh = (1.0 - h**2) * a
        dW = dh[:, :, None] * inputs[:, None, :]
        return np.concatenate([dW.reshape(len(inputs), -1), dh, h], axis=1)

    return PredictorModel(
        d=d,
        predict=lambda x, theta: predict_batch(np.atleast_2d(x), theta)[0],
        jacobian_fn=jac,
        predict_batch=predict_batch,
        name=f"tanh-{width}",
    )


def norm_squared_model(d: int) -> PredictorModel:
    """Input-free constraint ``f(x, theta) = |theta|^2``; M is a sphere."""
    return PredictorModel(
        d=d,
        predict=lambda x, theta: np.atleast_1d(theta @ theta),
        jacobian_fn=lambda inputs, theta: np.tile(2.0 * theta, (len(inputs), 1)),
        predict_batch=lambda inputs, theta: np.full((len(inputs), 1), theta @ theta),
        name="norm-squared",
    )


# ---------------------------------------------------------------------------
# loss and likelihood


def total_loss(preds, targets) -> float:
    """Squared loss ``sum_i |preds_i - targets_i|^2``."""
    preds = np.asarray(preds, dtype=float)
    targets = np.asarray(targets, dtype=float)
    if preds.shape != targets.shape:
        raise ContractViolation(f"shape mismatch: {preds.shape} vs {targets.shape}")
    r = (preds - targets).reshape(-1)
    return float(r @ r)


@dataclass(frozen=True)
class SquaredLoss:
    def __call__(self, y, y_prime) -> float:
        return total_loss(y, y_prime)

    def hessian(self, m: int) -> np.ndarray:
        """Hessian of l(y, y') in y; constant ``2 I``."""
        return 2.0 * np.eye(m)


@dataclass(frozen=True)
class GibbsLikelihood:
    """``p(y | theta, x) = c * exp(-l(f(x, theta), y) / gamma)``."""

    gamma: float
    loss: SquaredLoss = field(default_factory=SquaredLoss)

    def __post_init__(self):
        if not self.gamma > 0:
            raise ContractViolation(f"temperature must be positive, got {self.gamma}")

    def log_normalizer(self, N: int) -> float:
        """``log c_{n,gamma}`` for N scalar outputs: ``-(N/2) log(pi gamma)``."""
        return -0.5 * N * np.log(np.pi * self.gamma)

    def log_likelihood(self, preds, targets) -> float:
        preds = np.asarray(preds, dtype=float)
        return self.log_normalizer(preds.size) - self.loss(preds, targets) / self.gamma


# ---------------------------------------------------------------------------
# priors


@dataclass(frozen=True)
class Prior:
    """Prior density ``pi = exp(-R) / exp(log_norm_const)``.

    ``R_batch`` (optional) evaluates R on a ``(k, d)`` array; ``sampler(rng, k)``
    (optional) draws ``k`` samples; ``scale`` is a per-coordinate spread used
    to size integration boxes.
    """

    kind: str
    d: int
    R: Callable[[np.ndarray], float]
    grad_R: Callable[[np.ndarray], np.ndarray]
    hess_R: Callable[[np.ndarray], np.ndarray]
    theta0: np.ndarray
    log_norm_const: float = 0.0
    R_batch: Optional[Callable[[np.ndarray], np.ndarray]] = None
    sampler: Optional[Callable[[np.random.Generator, int], np.ndarray]] = None
    scale: Optional[np.ndarray] = None

    def R_many(self, thetas) -> np.ndarray:
        thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
        if self.R_batch is not None:
            return np.asarray(self.R_batch(thetas), dtype=float)
        return np.array([self.R(t) for t in thetas])

    def log_density(self, thetas) -> np.ndarray:
        return -self.R_many(thetas) - self.log_norm_const

    def sample(self, rng: np.random.Generator, k: int) -> np.ndarray:
        if self.sampler is None:
            raise ContractViolation(f"prior '{self.kind}' has no sampler")
        return self.sampler(rng, k)

    def with_norm_const(self, log_norm_const: float) -> "Prior":
        return Prior(self.kind, self.d, self.R, self.grad_R, self.hess_R, self.theta0,
                     log_norm_const, self.R_batch, self.sampler, self.scale)


def isotropic_gaussian(d: int, variance: float = 1.0, mean=None) -> Prior:
    """N(mean, variance * I); ``R = |theta - mean|^2 / (2 variance)``."""
    if not variance > 0:
        raise ContractViolation(f"prior variance must be positive, got {variance}")
    mu = np.zeros(d) if mean is None else np.asarray(mean, dtype=float).copy()
    if mu.shape != (d,):
        raise ContractViolation(f"mean has shape {mu.shape}, expected ({d},)")
    mu.setflags(write=False)
    tau = float(variance)
    hess = np.eye(d) / tau
    hess.setflags(write=False)

    def R(theta):
        r = np.asarray(theta) - mu
        return float(r @ r) / (2.0 * tau)

    return Prior(
        kind="isotropic-gaussian",
        d=d,
        R=R,
        grad_R=lambda theta: (np.asarray(theta) - mu) / tau,
        hess_R=lambda theta: hess,
        theta0=mu,
        log_norm_const=0.5 * d * np.log(2.0 * np.pi * tau),
        R_batch=lambda thetas: np.sum((thetas - mu) ** 2, axis=1) / (2.0 * tau),
        sampler=lambda rng, k: mu + np.sqrt(tau) * rng.standard_normal((k, d)),
        scale=np.full(d, np.sqrt(tau)),
    )


def minimize_unconstrained(R, grad_R, x0, tol: float = 1e-9, max_iter: int = 100_000) -> np.ndarray:
    """Backtracking gradient descent until ``|grad R| <= tol``."""
    x = np.asarray(x0, dtype=float).copy()
    step = 1.0
    for _ in range(max_iter):
        g = grad_R(x)
        gg = float(g @ g)
        if np.sqrt(gg) <= tol:
            return x
        fx = R(x)
        step = min(2.0 * step, 1e6)
        while True:
            cand = x - step * g
            fc = R(cand)
            if fc <= fx - 1e-4 * step * gg:
                break
            if abs(fc - fx) <= 1e2 * EPS * max(1.0, abs(fx)) and np.linalg.norm(grad_R(cand)) < np.sqrt(gg):
                break
            step *= 0.5
            if step < 1e-300:
                raise DidNotConverge("line search failed while minimising the prior", residual=np.sqrt(gg))
        x = cand
    raise DidNotConverge("prior minimisation hit max_iter", residual=float(np.linalg.norm(grad_R(x))))


def custom_prior(d: int, R, grad_R, hess_R, theta0=None, *, theta_init=None, log_norm_const: float = 0.0,
                 R_batch=None, sampler=None, scale=None) -> Prior:
    """Prior from user callables.

    ``theta0`` (the global minimiser of R) must be given, or ``theta_init``
    supplied to locate it by gradient descent.
    """
    if theta0 is None:
        if theta_init is None:
            raise ContractViolation("custom priors need theta0 or a theta_init to minimise from")
        theta0 = minimize_unconstrained(R, grad_R, theta_init)
    theta0 = np.asarray(theta0, dtype=float)
    if theta0.shape != (d,):
        raise ContractViolation(f"theta0 has shape {theta0.shape}, expected ({d},)")
    return Prior("custom", d, R, grad_R, hess_R, theta0, log_norm_const, R_batch, sampler,
                 None if scale is None else np.broadcast_to(np.asarray(scale, dtype=float), (d,)))
