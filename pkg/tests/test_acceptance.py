"""End-to-end acceptance checks, one test per criterion.

Each test records a one-line PASS/FAIL verdict that is repeated in the
terminal summary under "acceptance criteria".
"""

import time

import numpy as np

from mkd import (
    GaussianRBF,
    GMMPairing,
    IdentityFeatures,
    InverseMultiquadric,
    SteinKernel,
    WitnessFunction,
    asymptotic_covariance,
    chi2_cdf,
    chi2_quantile,
    coverage_simulation,
    estimate_gmm,
    estimate_min_ksd_expfam,
    estimate_mmd_pushforward,
    gaussian_location_scale_instance,
    ksd_squared,
    location_model,
    median_heuristic,
    minimize_general,
    mmd_squared,
    moment_to_natural,
    u_statistic,
    v_statistic,
    vu_parts,
)
from mkd.models import Box
from mkd.vstat import BivariateStatistic


def test_gmm_closed_form(report_criterion):
    rng = np.random.default_rng(11)
    X = rng.normal(1.0, 2.0, size=(10_000, 3))
    phi = IdentityFeatures(3)
    start = time.perf_counter()
    est = estimate_gmm(phi, X)
    elapsed = time.perf_counter() - start
    err_mean = np.max(np.abs(est.theta_n - X.mean(axis=0)))
    mean = X.mean(axis=0)

    def objective(theta):
        # ||mean phi - theta||^2 up to the constant that does not depend on theta
        return float(np.sum((mean - theta) ** 2))

    nm = minimize_general(objective, np.zeros(3), Box(np.full(3, -10.0), np.full(3, 10.0)),
                          tol_x=1e-10, tol_f=1e-16)
    err_nm = np.max(np.abs(nm.theta_n - est.theta_n))
    ok = err_mean <= 1e-12 and err_nm <= 1e-6 and elapsed < 1.0
    report_criterion(1, ok, f"GMM closed form: |mean err|={err_mean:.1e}, |NM err|={err_nm:.1e}, "
                            f"{elapsed:.3f}s")
    assert ok


def test_sandwich_agreement(report_criterion):
    rng = np.random.default_rng(12)
    X = rng.normal(size=(20, 2))
    phi = IdentityFeatures(2)
    est = estimate_gmm(phi, X)
    cov = asymptotic_covariance(GMMPairing(phi), X, est.theta_n)
    n, theta = X.shape[0], est.theta_n
    # brute-force double loop over d/dtheta k = 2 theta - phi(x) - phi(y)
    g = np.zeros((n, 2))
    for i in range(n):
        for j in range(n):
            g[i] += (2 * theta - X[i] - X[j]) / n
    gc = g - g.mean(axis=0)
    sigma_ref = gc.T @ gc / (n - 1)
    cov_phi = np.cov(X, rowvar=False)
    gamma_exact = np.array_equal(cov.gamma_n, np.eye(2))
    err = max(np.max(np.abs(cov.sandwich - sigma_ref)), np.max(np.abs(cov.sandwich - cov_phi)))
    ok = gamma_exact and err <= 1e-10
    report_criterion(2, ok, f"sandwich: Gamma_n == I {gamma_exact}, max err vs brute force {err:.1e}")
    assert ok


def test_coverage_gmm(report_criterion):
    start = time.perf_counter()
    rep = coverage_simulation("gmm-gaussian-mean", replicates=500, n=2000, gamma=0.95, seed=7)
    elapsed = time.perf_counter() - start
    ok = 0.92 <= rep.coverage <= 0.975 and rep.ks_distance <= 0.08 and elapsed < 60
    report_criterion(3, ok, f"coverage {rep.coverage:.3f}, KS {rep.ks_distance:.4f}, {elapsed:.1f}s")
    assert ok


def test_stein_identity(report_criterion):
    model = gaussian_location_scale_instance(1)
    theta = moment_to_natural(0.0, 1.0)
    X = np.random.default_rng(13).standard_normal((100_000, 1))
    ys = np.arange(-2.0, 2.5, 1.0)[:, None]
    start = time.perf_counter()
    worst = 0.0
    for base in (GaussianRBF(1.0), InverseMultiquadric(1.0, 0.5)):
        K = SteinKernel(base, model).gram(X, ys, theta=theta)
        z = np.abs(K.mean(axis=0)) / (K.std(axis=0, ddof=1) / np.sqrt(X.shape[0]))
        worst = max(worst, float(z.max()))
    elapsed = time.perf_counter() - start
    ok = worst <= 4.0 and elapsed < 10
    report_criterion(4, ok, f"Stein identity: max |mean|/SE = {worst:.2f}, {elapsed:.2f}s")
    assert ok


def test_ksd_quadratic_structure(report_criterion):
    model = gaussian_location_scale_instance(1)
    X = np.random.default_rng(14).normal(0.5, 1.5, size=(400, 1))
    kernel = GaussianRBF(1.0)
    sk = SteinKernel(kernel, model)
    est = estimate_min_ksd_expfam(model, kernel, X)

    def objective(theta):
        return ksd_squared(sk, X, theta).squared

    nm = minimize_general(objective, np.array([0.0, 1.0]), model.domain, tol_x=1e-11, tol_f=1e-16)
    err_nm = float(np.max(np.abs(nm.theta_n - est.theta_n)))

    direction = np.array([0.3, -0.2])
    base = np.array([0.1, 0.8])
    f = [objective(base + t * direction) for t in (0.0, 1.0, 2.0, 3.0)]
    # quadratic through t = 0, 1, 2 extrapolated to t = 3
    predicted = f[0] - 3 * f[1] + 3 * f[2]
    rel = abs(predicted - f[3]) / abs(f[3])
    ok = err_nm <= 1e-6 and rel <= 1e-9
    report_criterion(5, ok, f"KSD quadratic: |linear solve - NM| = {err_nm:.1e}, parabola rel err {rel:.1e}")
    assert ok


def test_ksd_consistency(report_criterion):
    model = gaussian_location_scale_instance(1)
    kernel = GaussianRBF(1.0)
    theta_star = np.array([0.0, 1.0])
    sizes = (250, 1000, 4000)
    start = time.perf_counter()
    errors = []
    for n in sizes:
        errs = []
        for r in range(50):
            X = model.sample(theta_star, n, 1000 * n + r).samples
            est = estimate_min_ksd_expfam(model, kernel, X, compute_objective=False)
            errs.append(np.linalg.norm(est.theta_n - theta_star))
        errors.append(float(np.mean(errs)))
    elapsed = time.perf_counter() - start
    slope = float(np.polyfit(np.log(sizes), np.log(errors), 1)[0])
    decreasing = all(a > b for a, b in zip(errors, errors[1:]))
    ok = decreasing and -0.7 <= slope <= -0.3 and elapsed < 120
    report_criterion(6, ok, f"KSD consistency: mean errors {', '.join(f'{e:.4f}' for e in errors)}, "
                            f"slope {slope:.3f}, {elapsed:.1f}s")
    assert ok


def test_vu_identity(report_criterion):
    rng = np.random.default_rng(15)
    worst = 0.0
    for _ in range(100):
        n = int(rng.integers(2, 40))
        d = int(rng.integers(1, 4))
        X = rng.normal(size=(n, d))
        M = rng.normal(size=(d, d))
        M = M + M.T
        shift = rng.normal()

        def v(A, B, M=M, shift=shift):
            return np.cos(A @ M @ B.T) + shift * np.exp(-0.5 * ((A[:, None, :] - B[None]) ** 2).sum(-1))

        stat = BivariateStatistic(v, X)
        V, U = v_statistic(stat), u_statistic(stat)
        diag = vu_parts(stat)[1]
        rel = abs(V - ((n - 1) / n * U + diag / n**2)) / max(abs(V), 1e-300)
        worst = max(worst, rel)
    ok = worst <= 1e-12
    report_criterion(7, ok, f"V/U identity: max rel err {worst:.1e} over 100 statistics")
    assert ok


def test_witness_function(report_criterion):
    rng = np.random.default_rng(16)
    worst_norm = worst_gap = 0.0
    for _ in range(50):
        d = int(rng.integers(1, 4))
        X = rng.normal(size=(int(rng.integers(5, 60)), d))
        Y = rng.normal(0.5, 1.3, size=(int(rng.integers(5, 60)), d))
        kernel = GaussianRBF(float(rng.uniform(0.5, 2.0)))
        w = WitnessFunction(kernel, X, Y)
        gap = w(X).mean() - w(Y).mean()
        D = mmd_squared(kernel, X, Y).value
        worst_norm = max(worst_norm, abs(w.rkhs_norm() - 1.0))
        worst_gap = max(worst_gap, abs(gap - D))
    ok = worst_norm <= 1e-10 and worst_gap <= 1e-10
    report_criterion(8, ok, f"witness: |norm - 1| <= {worst_norm:.1e}, |gap - D| <= {worst_gap:.1e}")
    assert ok


def test_derivatives_finite_differences(report_criterion):
    rng = np.random.default_rng(17)
    model = gaussian_location_scale_instance(2)
    h = 1e-5
    worst = {}
    for base in (GaussianRBF(1.3), InverseMultiquadric(1.0, 0.5)):
        sk = SteinKernel(base, model)
        name = type(base).__name__
        worst[name] = 0.0
        for _ in range(100):
            x, y = rng.normal(size=2), rng.normal(size=2)
            theta = np.concatenate([rng.normal(size=2), rng.uniform(0.3, 3.0, size=2)])
            grad = sk.dtheta(x, y, theta)
            hess = sk.d2theta(x, y)
            fd_grad = np.empty(4)
            fd_hess = np.empty((4, 4))
            for k in range(4):
                e = np.zeros(4)
                e[k] = h
                fd_grad[k] = (sk(x, y, theta + e) - sk(x, y, theta - e)) / (2 * h)
                fd_hess[:, k] = (sk.dtheta(x, y, theta + e) - sk.dtheta(x, y, theta - e)) / (2 * h)
            scale_g = max(np.max(np.abs(grad)), 1.0)
            scale_h = max(np.max(np.abs(hess)), 1.0)
            worst[name] = max(worst[name], np.max(np.abs(fd_grad - grad)) / scale_g,
                              np.max(np.abs(fd_hess - hess)) / scale_h)
    ok = max(worst.values()) <= 1e-5
    detail = ", ".join(f"{k} {v:.1e}" for k, v in worst.items())
    report_criterion(9, ok, f"parameter derivatives vs central differences: max rel err {detail}")
    assert ok


def test_pushforward_mmd(report_criterion):
    X = np.random.default_rng(18).normal(5.0, 1.0, size=(4000, 1))
    model = location_model(1, lower=-10.0, upper=10.0)
    start = time.perf_counter()
    kernel = GaussianRBF(median_heuristic(X))
    est = estimate_mmd_pushforward(model, kernel, X, m=4096, seed=0, theta0=np.array([0.0]))
    elapsed = time.perf_counter() - start
    err = abs(float(est.theta_n[0]) - 5.0)
    ok = err <= 0.15 and elapsed < 30
    report_criterion(10, ok, f"pushforward MMD: theta_n={est.theta_n[0]:.4f}, |err|={err:.4f}, {elapsed:.1f}s")
    assert ok


def test_chi2_quantile(report_criterion):
    worst_closed = max(abs(chi2_quantile(2, g) + 2 * np.log1p(-g)) for g in (0.1, 0.5, 0.9, 0.95, 0.99))
    worst_trip = max(abs(chi2_cdf(chi2_quantile(p, g), p) - g)
                     for p in range(1, 21) for g in (0.5, 0.9, 0.95, 0.99))
    ok = worst_closed <= 1e-8 and worst_trip <= 1e-8
    report_criterion(11, ok, f"chi2 quantile: closed form err {worst_closed:.1e}, round trip err {worst_trip:.1e}")
    assert ok
