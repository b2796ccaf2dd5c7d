import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mkd.asymptotics import (
    AsymptoticCovariance,
    GMMPairing,
    SteinPairing,
    asymptotic_covariance,
    confidence_set,
    gamma_hat,
    inv_sqrt_psd,
    sandwich,
    sigma_hat,
)
from mkd.errors import ModelKindError, ShapeError, SingularError
from mkd.estimation import estimate_gmm, estimate_min_ksd_expfam
from mkd.kernels import GaussianRBF, IdentityFeatures, SteinKernel
from mkd.models import gaussian_location_scale_instance, gaussian_mean_sd_instance, location_model
from mkd.simulation import coverage_simulation


def brute_gamma_sigma(sk, X, theta):
    n, p = X.shape[0], np.size(theta)
    H = np.zeros((p, p))
    g = np.zeros((n, p))
    for i in range(n):
        for j in range(n):
            H += sk.d2theta(X[i], X[j]) / n**2
            g[i] += sk.dtheta(X[i], X[j], theta) / n
    gc = g - g.mean(axis=0)
    return 0.5 * H, gc.T @ gc / (n - 1)


class TestGMMPathway:
    def test_gamma_identity_for_any_data(self):
        X = np.random.default_rng(0).normal(size=(7, 3))
        assert np.array_equal(gamma_hat(GMMPairing(IdentityFeatures(3)), X, np.zeros(3)), np.eye(3))

    def test_sigma_on_small_data(self):
        X = np.array([[1.0], [2.0], [3.0]])
        S = sigma_hat(GMMPairing(IdentityFeatures(1)), X, [2.0])
        assert S[0, 0] == pytest.approx(1.0, rel=1e-15)

    def test_sandwich_is_sample_covariance(self):
        X = np.random.default_rng(1).normal(size=(50, 2))
        phi = IdentityFeatures(2)
        cov = asymptotic_covariance(GMMPairing(phi), X, estimate_gmm(phi, X).theta_n)
        assert np.allclose(cov.sandwich, np.cov(X, rowvar=False), rtol=1e-12)

    def test_constant_data(self):
        X = np.ones((6, 2))
        assert np.array_equal(sigma_hat(GMMPairing(IdentityFeatures(2)), X, [1.0, 1.0]), np.zeros((2, 2)))

    def test_needs_two_points(self):
        with pytest.raises(ShapeError):
            sigma_hat(GMMPairing(IdentityFeatures(1)), [[1.0]], [1.0])


class TestSteinPathway:
    def test_brute_force(self):
        model = gaussian_location_scale_instance(2)
        sk = SteinKernel(GaussianRBF(1.1), model)
        X = np.random.default_rng(2).normal(size=(10, 2))
        theta = np.array([0.1, -0.3, 1.2, 0.8])
        G_ref, S_ref = brute_gamma_sigma(sk, X, theta)
        assert np.allclose(gamma_hat(sk, X, theta), G_ref, rtol=1e-12, atol=1e-15)
        assert np.allclose(sigma_hat(sk, X, theta), S_ref, rtol=1e-12, atol=1e-15)

    def test_gamma_is_vstat_of_weighted_inner_products(self):
        model = gaussian_location_scale_instance(1)
        X = np.random.default_rng(3).normal(size=(15, 1))
        kernel = GaussianRBF()
        T = model.grad_t(X)[:, 0, :]
        C = kernel.gram(X)
        expected = np.einsum("ij,ip,jq->pq", C, T, T) / X.shape[0] ** 2
        assert np.allclose(gamma_hat(SteinKernel(kernel, model), X, [0.0, 1.0]), expected, rtol=1e-12)

    def test_single_point_orthonormal(self):
        model = gaussian_location_scale_instance(1)
        G = gamma_hat(SteinKernel(GaussianRBF(), model), [[0.0]], [0.0, 1.0])
        assert np.allclose(G, np.diag([1.0, 0.0]))

    def test_other_pathways_refused(self):
        with pytest.raises(ModelKindError):
            SteinPairing(SteinKernel(GaussianRBF(), gaussian_mean_sd_instance(1)))
        with pytest.raises(ModelKindError):
            gamma_hat(location_model(1, -1.0, 1.0), [[0.0]], [0.0])


class TestSandwich:
    def test_identity_bread(self):
        S = np.array([[2.0, 0.3], [0.3, 1.0]])
        assert np.array_equal(sandwich(np.eye(2), S), S)

    def test_scalar(self):
        assert np.allclose(sandwich(2 * np.eye(3), np.eye(3)), np.eye(3) / 4)

    def test_singular(self):
        with pytest.raises(SingularError) as info:
            sandwich(np.diag([1.0, 0.0]), np.eye(2))
        assert info.value.min_eigenvalue == 0.0

    @settings(max_examples=30)
    @given(st.integers(0, 2**31))
    def test_symmetric(self, seed):
        rng = np.random.default_rng(seed)
        A = rng.normal(size=(3, 3)) + 3 * np.eye(3)
        B = rng.normal(size=(3, 3))
        M = sandwich(A, B @ B.T)
        assert np.array_equal(M, M.T)
        ref = np.linalg.solve(A, np.linalg.solve(A, B @ B.T).T).T
        assert np.allclose(M, 0.5 * (ref + ref.T), rtol=1e-8, atol=1e-10)


class TestConfidenceSet:
    def scalar_set(self, gamma=0.95):
        cov = AsymptoticCovariance(np.eye(1), np.eye(1), np.eye(1), 1.0)
        return confidence_set([0.0], cov, 100, gamma)

    def test_contains_centre(self):
        assert self.scalar_set().contains([0.0])

    def test_scalar_radius(self):
        cs = self.scalar_set()
        radius = np.sqrt(3.8414588206941245 / 100)
        assert radius == pytest.approx(0.19600, abs=1e-5)
        assert cs.contains([radius * (1 - 1e-9)])
        assert not cs.contains([radius * (1 + 1e-9)])
        assert np.allclose(cs.intervals(), [[-radius, radius]], rtol=1e-12)

    def test_nested_levels(self):
        rng = np.random.default_rng(4)
        X = rng.normal(size=(80, 2))
        phi = IdentityFeatures(2)
        theta = estimate_gmm(phi, X).theta_n
        cov = asymptotic_covariance(GMMPairing(phi), X, theta)
        small, large = confidence_set(theta, cov, 80, 0.5), confidence_set(theta, cov, 80, 0.99)
        for point in theta + 0.3 * rng.normal(size=(200, 2)):
            assert not small.contains(point) or large.contains(point)

    def test_sigma_not_pd(self):
        with pytest.raises(SingularError):
            inv_sqrt_psd(np.zeros((2, 2)))

    def test_inverse_square_root(self):
        S = np.array([[2.0, 0.5], [0.5, 1.0]])
        R = inv_sqrt_psd(S)
        assert np.allclose(R @ S @ R, np.eye(2), atol=1e-12)


class TestCoverageSimulation:
    def test_single_replicate(self):
        rep = coverage_simulation("gmm-gaussian-mean", replicates=1, n=50, seed=3)
        assert rep.coverage in (0.0, 1.0)
        assert len(rep.per_replicate) == 1

    def test_deterministic_and_thread_independent(self):
        a = coverage_simulation("ksd-gaussian-natparams", replicates=6, n=100, seed=1, threads=1)
        b = coverage_simulation("ksd-gaussian-natparams", replicates=6, n=100, seed=1, threads=3)
        assert a.to_dict() == b.to_dict()

    def test_small_n_flagged(self):
        rep = coverage_simulation("ksd-gaussian-natparams", replicates=2, n=30, seed=0)
        assert any("p^2" in note for note in rep.notes)

    def test_unknown_scenario(self):
        with pytest.raises(ValueError):
            coverage_simulation("nope", replicates=1, n=10)

    def test_ksd_scenario_roughly_calibrated(self):
        rep = coverage_simulation("ksd-gaussian-natparams", replicates=200, n=500, seed=11)
        assert 0.88 <= rep.coverage <= 0.99
