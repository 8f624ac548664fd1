"""Oracle suites: each compares a library result with an independent computation."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.integrate
import scipy.special

from .core import (RegressionDataset, custom_prior, isotropic_gaussian, linear_model, norm_squared_model,
                   substream, total_loss)
from .duality import (dual_prior_linear, evidence_dual, evidence_primal, fiber_density_mc,
                      gaussian_convolution_evidence, radial_integral)
from .geometry import manifold_hessian
from .interpolate import anneal_map, pinv_interpolator
from .laplace import laplace_manifold


@dataclass(frozen=True)
class Check:
    name: str
    error: float
    tol: float
    passed: bool
    detail: str = ""

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        extra = f" ({self.detail})" if self.detail else ""
        return f"{status} {self.name}: error={self.error:.3e} tol={self.tol:.1e}{extra}"


def _check(name, error, tol, detail="", lo=None) -> Check:
    ok = bool(np.isfinite(error) and (error <= tol if lo is None else lo <= error <= tol))
    return Check(name, float(error), float(tol), ok, detail)


# ---------------------------------------------------------------------------
# shared example problems


def circle_problem():
    """Unit circle ``|theta|^2 = 1`` with ``R = |theta - (2, 0)|^2 / 2``; minimiser (1, 0)."""
    c = np.array([2.0, 0.0])
    prior = custom_prior(
        2,
        R=lambda t: 0.5 * float((t - c) @ (t - c)),
        grad_R=lambda t: t - c,
        hess_R=lambda t: np.eye(2),
        theta0=c,
    )
    data = RegressionDataset(np.zeros((1, 1)), np.ones((1, 1)))
    return norm_squared_model(2), data, prior, np.array([1.0, 0.0])


SPHERE_A = np.array([[1.0, 0.0, 0.0], [0.0, 2.0, 0.5], [0.0, 0.5, 3.0]])
SPHERE_C = np.array([2.0, 0.0, 0.0])


def sphere_problem():
    """Unit sphere in R^3 with an anisotropic quadratic R centred off the sphere at (2, 0, 0)."""
    A, c = SPHERE_A, SPHERE_C
    prior = custom_prior(
        3,
        R=lambda t: 0.5 * float((t - c) @ A @ (t - c)),
        grad_R=lambda t: A @ (t - c),
        hess_R=lambda t: A,
        theta0=c,
    )
    data = RegressionDataset(np.zeros((1, 1)), np.ones((1, 1)))
    return norm_squared_model(3), data, prior, np.array([1.0, 0.0, 0.0])


def linear_gaussian_instance(seed: int, n: int, d: int, unit_rows: bool = False):
    rng = substream(seed, n, d)
    X = rng.standard_normal((n, d))
    if unit_rows:
        X /= np.linalg.norm(X, axis=1, keepdims=True)
    y = rng.standard_normal(n)
    return X, y


# ---------------------------------------------------------------------------
# suites


def duality_identity(instances: int = 5, gammas=(0.5, 0.1), tol: float = 1e-6, nodes: int = 200,
                     seed: int = 0) -> list[Check]:
    """Primal and dual evidence by quadrature against the Gaussian-convolution closed form."""
    checks = []
    for i in range(instances):
        d = 2 + i % 2
        X, y = linear_gaussian_instance(seed + i, 1, d, unit_rows=True)
        prior = isotropic_gaussian(d, 1.0)
        data = RegressionDataset(X, y)
        dual = dual_prior_linear(X, 1.0)
        for gamma in gammas:
            zp = evidence_primal(linear_model(d), data, prior, gamma, "quadrature", budget=nodes)
            zd = evidence_dual(dual, y, gamma, "quadrature", budget=nodes)
            zc = gaussian_convolution_evidence(X, y, 1.0, gamma)
            tag = f"instance {i} d={d} gamma={gamma}"
            checks.append(_check(f"primal vs dual, {tag}", abs(zp - zd) / zp, tol))
            checks.append(_check(f"primal vs closed form, {tag}", abs(zp - zc) / zc, tol))
            checks.append(_check(f"dual vs closed form, {tag}", abs(zd - zc) / zc, tol))
    return checks


def dual_prior_density(samples: int = 1_000_000, tau0: float = 0.5, rel_tol: float = 0.01,
                       se_mult: float = 3.0, seed: int = 0) -> list[Check]:
    """Fiber Monte Carlo of the dual density against ``N(0, tau0 X X^T)`` on a 5-point z grid."""
    X, _ = linear_gaussian_instance(seed, 1, 3)
    prior = isotropic_gaussian(3, tau0)
    exact = dual_prior_linear(X, tau0)
    sd = math.sqrt(exact.covariance[0, 0])
    checks = []
    for j, z in enumerate(np.linspace(-1.5, 1.5, 5) * sd):
        est, se = fiber_density_mc(X, prior, [z], samples, seed=(seed, j))
        ref = exact.pdf([z])
        err = abs(est - ref)
        checks.append(_check(f"dual density at z={z:+.3f}, relative", err / ref, rel_tol))
        checks.append(_check(f"dual density at z={z:+.3f}, in standard errors",
                             err / se if se > 0 else math.inf, se_mult))
    return checks


def _circle_arc_oracle(tau: float) -> float:
    # R(cos t, sin t) = (5 - 4 cos t) / 2; peak at t = 0, so integrate on (-pi, pi)
    f = lambda t: math.exp(-(0.5 * (5.0 - 4.0 * math.cos(t)) - 0.5) / tau)
    val, _ = scipy.integrate.quad(f, -math.pi, math.pi, points=[0.0], epsabs=0, epsrel=1e-13, limit=200)
    return val * math.exp(-0.5 / tau)


def manifold_laplace(taus=(0.01, 0.02), rel_tol: float = 0.02, ratio_band=(1.5, 2.5)) -> list[Check]:
    """Manifold Laplace on the circle against arc-length quadrature, and its O(tau) error law."""
    model, data, prior, theta = circle_problem()
    errs = []
    checks = []
    for tau in taus:
        approx = laplace_manifold(model, data, prior, theta, tau).value
        exact = _circle_arc_oracle(tau)
        errs.append(abs(approx - exact) / exact)
        checks.append(_check(f"circle Laplace tau={tau}", errs[-1], rel_tol))
    ratio = errs[1] / errs[0]
    checks.append(_check(f"error ratio tau={taus[1]} / tau={taus[0]}", ratio, ratio_band[1],
                         f"expected in [{ratio_band[0]}, {ratio_band[1]}]", lo=ratio_band[0]))
    return checks


def _second_difference_hessian(fun: Callable[[np.ndarray], float], x0: np.ndarray, h: float = 1e-4) -> np.ndarray:
    k = x0.size
    H = np.empty((k, k))
    E = np.eye(k) * h
    for i in range(k):
        for j in range(k):
            H[i, j] = (fun(x0 + E[i] + E[j]) - fun(x0 + E[i] - E[j]) - fun(x0 - E[i] + E[j])
                       + fun(x0 - E[i] - E[j])) / (4 * h * h)
    return H


def sphere_oracle() -> tuple[np.ndarray, np.ndarray]:
    """Hessian of R in spherical angles at (phi, psi) = (pi/2, 0), and the angle basis in R^3.

    The coordinate vectors are orthonormal there and the point is critical,
    so this is the Riemannian Hessian in that basis.
    """
    _, _, prior, _ = sphere_problem()

    def on_sphere(a):
        phi, psi = a
        return np.array([math.sin(phi) * math.cos(psi), math.sin(phi) * math.sin(psi), math.cos(phi)])

    a0 = np.array([math.pi / 2, 0.0])
    H = _second_difference_hessian(lambda a: prior.R(on_sphere(a)), a0)
    basis = np.array([[0.0, 0.0], [0.0, 1.0], [-1.0, 0.0]])
    return H, basis


def manifold_hessian_suite(linear_instances: int = 5, seed: int = 0) -> list[Check]:
    checks = []
    for i in range(linear_instances):
        n, d = 3 + i, 8 + 2 * i
        X, y = linear_gaussian_instance(seed + i, n, d)
        prior = isotropic_gaussian(d, 1.0)
        theta = pinv_interpolator(X, y).theta_star
        H = manifold_hessian(linear_model(d), RegressionDataset(X, y), prior, theta).H
        checks.append(_check(f"linear-Gaussian n={n} d={d}: |H - I|_F", np.linalg.norm(H - np.eye(d - n)), 1e-8))
    model, data, prior, theta = circle_problem()
    H = manifold_hessian(model, data, prior, theta).H
    # geodesic oracle: d^2/dt^2 of (5 - 4 cos t) / 2 at t = 0 is 2
    checks.append(_check("circle: |H - 2|", abs(H[0, 0] - 2.0), 1e-5))
    model, data, prior, theta = sphere_problem()
    res = manifold_hessian(model, data, prior, theta)
    H_o, B = sphere_oracle()
    U = res.frame.U
    diff = U @ res.H @ U.T - B @ H_o @ B.T
    checks.append(_check("sphere: tangent operator vs angular oracle", np.linalg.norm(diff), 1e-4))
    return checks


def map_limit(instances: int = 3, n: int = 4, d: int = 10, seed: int = 0, tol: float = 1e-6) -> list[Check]:
    """Annealed MAP estimates approach the minimum-norm interpolator with loss below gamma R(theta*)."""
    gammas = np.logspace(0, -8, 17)
    checks = []
    for i in range(instances):
        X, y = linear_gaussian_instance(seed + i, n, d)
        prior = isotropic_gaussian(d, 1.0)
        data = RegressionDataset(X, y)
        theta_star = np.linalg.pinv(X) @ y
        trace = anneal_map(linear_model(d), data, prior, gammas, theta_star)
        checks.append(_check(f"instance {i}: |theta_gamma - X^+ y| at gamma=1e-8", trace.distances_to_int[-1], tol))
        bound = gammas * prior.R(theta_star)
        worst = float(np.max(trace.losses / bound))
        checks.append(_check(f"instance {i}: max_gamma L / (gamma R(theta*))", worst, 1.0))
        closed = np.array([X.T @ np.linalg.solve(X @ X.T + 0.5 * g * np.eye(n), y) for g in gammas])
        checks.append(_check(f"instance {i}: MAP vs closed form", float(np.max(np.abs(trace.thetas - closed))), 1e-8))
    return checks


def radial(tol: float = 1e-8, dims=range(1, 11)) -> list[Check]:
    """Spherical coarea against Gaussian normalisers and unit-ball volumes."""
    checks = []
    for d in dims:
        val = radial_integral(lambda r: np.exp(-0.5 * r**2), d)
        ref = (2 * math.pi) ** (d / 2)
        checks.append(_check(f"Gaussian normaliser d={d}", abs(val - ref) / ref, tol))
    for d, name in ((2, "unit disk area"), (3, "unit ball volume")):
        val = radial_integral(lambda r: (np.asarray(r) <= 1.0).astype(float), d, points=[1.0])
        ref = math.pi ** (d / 2) / scipy.special.gamma(d / 2 + 1)
        checks.append(_check(name, abs(val - ref) / ref, tol))
    return checks


SUITES: dict[str, Callable[[], list[Check]]] = {
    "duality": lambda: duality_identity() + dual_prior_density(),
    "laplace": manifold_laplace,
    "manifold-hessian": manifold_hessian_suite,
    "map-limit": map_limit,
    "radial": radial,
}


def run_suite(name: str) -> tuple[list[Check], float]:
    start = time.perf_counter()
    checks = SUITES[name]()
    return checks, time.perf_counter() - start
