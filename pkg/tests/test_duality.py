import numpy as np
import pytest
import scipy.special
import scipy.stats
from hypothesis import given
from hypothesis import strategies as st

from iic.core import RegressionDataset, custom_prior, isotropic_gaussian, linear_model
from iic.duality import (EvidencePair, dual_prior_linear, evidence_dual, evidence_primal, fiber_density_mc,
                         gaussian_convolution_evidence, radial_integral)
from iic.errors import ContractViolation, RankDeficient, TailNotResolved, Unsupported
from iic.laplace import quadrature_nd


def student_t_prior(d, nu):
    log_c = (scipy.special.gammaln(0.5 * (nu + d)) - scipy.special.gammaln(0.5 * nu)
             - 0.5 * d * np.log(nu * np.pi))
    k = 0.5 * (nu + d)
    return custom_prior(
        d,
        R=lambda t: k * np.log1p(t @ t / nu),
        grad_R=lambda t: 2 * k * t / (nu + t @ t),
        hess_R=lambda t: 2 * k * ((nu + t @ t) * np.eye(d) - 2 * np.outer(t, t)) / (nu + t @ t) ** 2,
        theta0=np.zeros(d),
        log_norm_const=-log_c,
        R_batch=lambda ts: k * np.log1p(np.sum(ts**2, axis=1) / nu),
    )


class TestDualPrior:
    def test_two_parameter_example(self):
        dual = dual_prior_linear([[1.0, 1.0]], 1.0)
        assert dual.covariance[0, 0] == pytest.approx(2.0)
        assert dual.pdf([0.0]) == pytest.approx(1 / np.sqrt(4 * np.pi), rel=1e-14)
        assert dual.pdf([0.0]) == pytest.approx(0.28209, abs=1e-5)

    def test_orthonormal_rows(self):
        dual = dual_prior_linear(np.eye(4)[:2], 0.3)
        np.testing.assert_allclose(dual.covariance, 0.3 * np.eye(2), atol=1e-15)

    def test_scaling(self, rng):
        X = rng.standard_normal((2, 5))
        a, b = dual_prior_linear(X, 1.2), dual_prior_linear(3 * X, 1.2)
        np.testing.assert_allclose(b.covariance, 9 * a.covariance, rtol=1e-13)

    def test_matches_scipy(self, rng):
        X = rng.standard_normal((2, 4))
        dual = dual_prior_linear(X, 0.7)
        z = rng.standard_normal((5, 2))
        ref = scipy.stats.multivariate_normal(np.zeros(2), 0.7 * X @ X.T).logpdf(z)
        np.testing.assert_allclose(dual.logpdf(z), ref, rtol=1e-12)

    def test_normaliser_uses_gram_determinant(self, rng):
        X = rng.standard_normal((2, 6))
        tau = 0.4
        dual = dual_prior_linear(X, tau)
        expected = -np.log((2 * np.pi * tau) ** 1 * np.sqrt(np.linalg.det(X @ X.T)))
        assert dual.logpdf(np.zeros(2)) == pytest.approx(expected, rel=1e-12)

    def test_integrates_to_one(self, rng):
        X = rng.standard_normal((2, 3))
        dual = dual_prior_linear(X, 1.0)
        sd = np.sqrt(np.diag(dual.covariance))
        box = [(-10 * s, 10 * s) for s in sd]
        assert quadrature_nd(dual.pdf, box, 80, panels=2) == pytest.approx(1.0, abs=1e-10)

    def test_rank_deficient(self):
        with pytest.raises(RankDeficient):
            dual_prior_linear([[1.0, 2.0], [2.0, 4.0]], 1.0)


class TestFiberMC:
    def test_two_parameter_example(self):
        est, se = fiber_density_mc([[1.0, 1.0]], isotropic_gaussian(2), [0.0], 100_000, seed=1)
        assert est == pytest.approx(0.28209, abs=2e-4)

    def test_gaussian_matches_closed_form(self, rng):
        X = rng.standard_normal((2, 5))
        tau = 0.6
        dual = dual_prior_linear(X, tau)
        z = np.array([0.4, -0.3])
        est, se = fiber_density_mc(X, isotropic_gaussian(5, tau), z, 400_000, seed=3)
        ref = dual.pdf(z)
        assert se > 0
        assert abs(est - ref) <= 3 * se
        assert abs(est - ref) / ref <= 0.01

    def test_deterministic(self, rng):
        X = rng.standard_normal((1, 3))
        a = fiber_density_mc(X, isotropic_gaussian(3, 0.5), [0.2], 10_000, seed=(4, 2))
        b = fiber_density_mc(X, isotropic_gaussian(3, 0.5), [0.2], 10_000, seed=(4, 2))
        assert a == b

    def test_heavy_tail_normalisation(self):
        nu, d = 5.0, 3
        X = np.array([[0.8, -0.5, 0.3]])
        prior = student_t_prior(d, nu)
        s = np.linalg.norm(X)
        zs = np.linspace(-30 * s, 30 * s, 121)
        dens = np.array([fiber_density_mc(X, prior, [z], 20_000, seed=(9, j), proposal_df=1.0)[0]
                         for j, z in enumerate(zs)])
        assert abs(np.trapezoid(dens, zs) - 1.0) <= 0.02
        # affine images of a Student t are Student t with the same degrees of freedom
        ref = scipy.stats.t(df=nu, scale=s).pdf(zs)
        assert np.max(np.abs(dens - ref)) <= 0.02 * ref.max()

    def test_rank_deficient(self):
        with pytest.raises(RankDeficient):
            fiber_density_mc([[1.0, 1.0], [2.0, 2.0]], isotropic_gaussian(2), [0.0, 0.0], 10)


class TestEvidence:
    def setup_method(self):
        self.X = np.array([[0.6, 0.8]])
        self.y = np.array([0.9])
        self.data = RegressionDataset(self.X, self.y)
        self.prior = isotropic_gaussian(2, 1.0)
        self.dual = dual_prior_linear(self.X, 1.0)

    def test_primal_closed_form(self):
        z = evidence_primal(linear_model(2), self.data, self.prior, 0.3, budget=200)
        assert abs(z / gaussian_convolution_evidence(self.X, self.y, 1.0, 0.3) - 1) <= 1e-6

    def test_closed_form_against_scipy(self):
        ref = scipy.stats.multivariate_normal(np.zeros(1), self.X @ self.X.T + 0.15).pdf(self.y)
        assert gaussian_convolution_evidence(self.X, self.y, 1.0, 0.3) == pytest.approx(ref, rel=1e-13)

    def test_resolution_plateau(self):
        a = evidence_primal(linear_model(2), self.data, self.prior, 0.3, budget=150)
        b = evidence_primal(linear_model(2), self.data, self.prior, 0.3, budget=300)
        assert abs(a - b) <= 1e-8

    def test_hot_limit_finite_positive(self):
        z = evidence_primal(linear_model(2), self.data, self.prior, 1e3, budget=60)
        assert np.isfinite(z) and z > 0

    def test_duality(self):
        zp = evidence_primal(linear_model(2), self.data, self.prior, 0.1, budget=200)
        zd = evidence_dual(self.dual, self.y, 0.1, budget=400)
        pair = EvidencePair(zp, zd, 0.1, "quadrature")
        assert pair.relative_gap <= 1e-6 and pair.std_error == 0.0

    def test_cold_limit_is_first_order(self):
        target = self.dual.pdf(self.y)
        box = [(self.y[0] - 1.5, self.y[0] + 1.5)]

        def gap(g):
            return abs(evidence_dual(self.dual, self.y, g, budget=60, box=box, panels=10) - target)

        assert gap(0.02) < gap(0.1) < gap(0.5)
        assert 1.5 <= gap(0.02) / gap(0.01) <= 2.5

    def test_far_tail_positive(self):
        z = evidence_dual(self.dual, np.array([12.0]), 0.2, budget=400)
        assert 0 < z < 1e-20

    def test_monte_carlo_d10(self, rng):
        X = rng.standard_normal((2, 10)) / np.sqrt(10)
        y = np.array([0.3, -0.2])
        data = RegressionDataset(X, y)
        gamma = 0.5
        ref = gaussian_convolution_evidence(X, y, 1.0, gamma)
        zp, se_p = evidence_primal(linear_model(10), data, isotropic_gaussian(10), gamma, "monte-carlo",
                                   budget=200_000, seed=2, return_std=True)
        zd, se_d = evidence_dual(dual_prior_linear(X, 1.0), y, gamma, "monte-carlo", budget=200_000, seed=3,
                                 return_std=True)
        assert se_p > 0 and se_d > 0
        assert abs(zp - ref) <= 3 * se_p
        assert abs(zd - ref) <= 3 * se_d
        assert abs(zp - zd) <= 3 * np.hypot(se_p, se_d)

    def test_quadrature_dimension_limit(self, rng):
        X = rng.standard_normal((1, 5))
        with pytest.raises(Unsupported):
            evidence_primal(linear_model(5), RegressionDataset(X, [0.0]), isotropic_gaussian(5), 0.1)

    def test_unknown_method(self):
        with pytest.raises(ContractViolation):
            evidence_dual(self.dual, self.y, 0.1, method="simpson")

    @given(st.floats(0.05, 2.0), st.floats(-2.0, 2.0), st.floats(0.3, 3.0))
    def test_primal_equals_dual(self, gamma, y, tau0):
        X = np.array([[1.0, -0.5]])
        prior = isotropic_gaussian(2, tau0)
        data = RegressionDataset(X, [y])
        zp = evidence_primal(linear_model(2), data, prior, gamma, budget=120, panels=2)
        zd = evidence_dual(dual_prior_linear(X, tau0), [y], gamma, budget=240, panels=2)
        assert zp == pytest.approx(zd, rel=1e-6)


class TestRadial:
    @pytest.mark.parametrize("d", range(1, 11))
    def test_gaussian_normaliser(self, d):
        val = radial_integral(lambda r: np.exp(-0.5 * r**2), d)
        assert val == pytest.approx((2 * np.pi) ** (d / 2), rel=1e-8)

    def test_disk(self):
        assert radial_integral(lambda r: float(r <= 1.0), 2, points=[1.0]) == pytest.approx(np.pi, rel=1e-8)

    def test_ball(self):
        assert radial_integral(lambda r: float(r <= 1.0), 3, points=[1.0]) == pytest.approx(4 * np.pi / 3, rel=1e-8)

    def test_heavy_tail_converges(self):
        # int_{R^2} (1 + r^2)^-2 = pi
        assert radial_integral(lambda r: (1 + r * r) ** -2, 2) == pytest.approx(np.pi, rel=1e-8)

    def test_divergent_tail(self):
        with pytest.raises(TailNotResolved):
            radial_integral(lambda r: 1.0 / (1.0 + r) ** 2, 2)
