"""Minimum kernel discrepancy estimators.

Closed forms cover the generalised method of moments (feature mean) and
the minimum kernel Stein discrepancy estimator for exponential families,
whose objective is an exact quadratic in ``theta``.  Everything else goes
through a box-projected Nelder-Mead search.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .data import as_samples
from .discrepancy import _cross_mean, _within, gmm_discrepancy_squared, ksd_squared
from .errors import MaxIterError, NonFiniteError, ShapeError, SingularError
from .kernels import SteinKernel
from .models import Box

__all__ = [
    "EstimateResult",
    "PushforwardMMDObjective",
    "estimate_gmm",
    "estimate_min_ksd_expfam",
    "estimate_mmd_pushforward",
    "ksd_quadratic",
    "minimize_general",
]

logger = logging.getLogger(__name__)

JITTER = 1e-10
SINGULAR_TOL = 1e-12


@dataclass
class EstimateResult:
    theta_n: np.ndarray
    objective: float
    method: str
    iterations: int = 0
    converged: bool = True
    seed: int | None = None
    theta0: np.ndarray | None = None
    evaluations: int = 0
    info: dict = field(default_factory=dict)

    def to_dict(self):
        out = {
            "theta_n": np.asarray(self.theta_n).tolist(),
            "objective": float(self.objective),
            "method": self.method,
            "iterations": int(self.iterations),
            "converged": bool(self.converged),
            "seed": self.seed,
            "evaluations": int(self.evaluations),
        }
        if self.theta0 is not None:
            out["theta0"] = np.asarray(self.theta0).tolist()
        out.update(self.info)
        return out


def estimate_gmm(phi, xs) -> EstimateResult:
    """Generalised method of moments under the identified parametrisation ``theta = E[phi]``.

    The minimiser of ``||mean phi(x_i) - theta||^2`` is the feature mean.
    """
    theta = np.asarray(phi(as_samples(xs)), dtype=float).mean(axis=0)
    return EstimateResult(theta, gmm_discrepancy_squared(phi, xs, theta), "GMMClosedForm")


def ksd_quadratic(sk: SteinKernel, xs):
    """Coefficients of ``theta -> KSD^2_V(theta) = const + 2 beta.theta + theta.Gamma.theta``.

    Returns ``(Gamma, beta)``: ``Gamma`` is half the mean parameter Hessian of
    the Stein kernel and ``beta`` half the mean parameter gradient at zero.
    """
    X = as_samples(xs)
    gamma = 0.5 * sk.hessian_mean(X)
    gamma = 0.5 * (gamma + gamma.T)
    p = gamma.shape[0]
    beta = 0.5 * sk.dtheta_row_means(X, np.zeros(p)).mean(axis=0)
    return gamma, beta


def _cholesky_with_jitter(gamma):
    """Cholesky factor of ``gamma``, jittered by ``1e-10 * trace / p`` when ill-conditioned.

    Numerically singular matrices (smallest eigenvalue at most
    ``1e-12 * trace / p``) raise :class:`SingularError` rather than being
    rescued by the jitter.
    """
    p = gamma.shape[0]
    scale = np.trace(gamma) / p
    min_eig = float(np.linalg.eigvalsh(gamma)[0])
    if not scale > 0 or min_eig <= SINGULAR_TOL * scale:
        raise SingularError(f"Gamma_n is singular (min eigenvalue {min_eig:.3g})", min_eigenvalue=min_eig)
    lam = 0.0
    if min_eig <= JITTER * scale:
        lam = JITTER * scale
        logger.warning("Gamma_n is ill-conditioned (min eigenvalue %.3g); adding jitter %.3g", min_eig, lam)
    try:
        return cho_factor(gamma + lam * np.eye(p), lower=True), lam
    except LinAlgError:
        raise SingularError(f"Gamma_n is not positive definite (min eigenvalue {min_eig:.3g})",
                            min_eigenvalue=min_eig) from None


def estimate_min_ksd_expfam(model, c, xs, compute_objective: bool = True) -> EstimateResult:
    """Minimum KSD estimator for a canonical exponential family, by one linear solve.

    Solves ``Gamma_n theta = -beta_n`` with a Cholesky factorisation; an
    ill-conditioned ``Gamma_n`` gets a single diagonal jitter ``1e-10 * trace / p``.
    If the solution leaves the parameter box, the quadratic is minimised
    over the box with :func:`minimize_general`.
    """
    X = as_samples(xs)
    if X.shape[0] < 2:
        raise ShapeError("the minimum KSD estimator needs n >= 2")
    sk = SteinKernel(c, model)
    gamma, beta = ksd_quadratic(sk, X)
    p = gamma.shape[0]
    factor, lam = _cholesky_with_jitter(gamma)
    theta = cho_solve(factor, -beta)
    info = {"gamma_min_eig": float(np.linalg.eigvalsh(gamma)[0]), "jitter": lam}

    if not model.domain.contains(theta):
        logger.warning("unconstrained minimum lies outside the parameter box; minimising over the box")

        def quad(th):
            return float(2.0 * beta @ th + th @ gamma @ th)

        res = minimize_general(quad, model.domain.clip(theta), model.domain)
        theta = res.theta_n
        info["box_constrained"] = True

    objective = ksd_squared(sk, X, theta, "V").squared if compute_objective else math.nan
    return EstimateResult(theta, objective, "KSDLinearSolve", info=info)


def _initial_simplex(theta0, domain, step):
    p = theta0.size
    sim = np.tile(theta0, (p + 1, 1))
    for i in range(p):
        h = step[i] if step is not None else (0.05 * abs(theta0[i]) if theta0[i] != 0 else 0.00025)
        trial = theta0[i] + h
        if trial > domain.upper[i]:
            trial = theta0[i] - h
        sim[i + 1, i] = trial
    return domain.clip(sim)


def _nelder_mead(f, theta0, domain, tol_x, tol_f, max_iter, step):
    """Standard Nelder-Mead (reflect 1, expand 2, contract 1/2, shrink 1/2).

    Every trial point is projected onto the box before evaluation.
    """
    evals = 0

    def fun(x):
        nonlocal evals
        evals += 1
        val = float(f(x))
        if not math.isfinite(val):
            raise NonFiniteError(f"objective returned {val} at theta={np.asarray(x).tolist()}")
        return val

    sim = _initial_simplex(theta0, domain, step)
    fs = np.array([fun(v) for v in sim])
    it = 0
    converged = False
    while True:
        order = np.argsort(fs, kind="stable")
        sim, fs = sim[order], fs[order]
        diam = np.max(np.abs(sim[1:] - sim[0]))
        if (diam <= tol_x * (1.0 + np.linalg.norm(sim[0]))
                and np.max(np.abs(fs[1:] - fs[0])) <= tol_f):
            converged = True
            break
        if it >= max_iter:
            break
        it += 1

        centroid = sim[:-1].mean(axis=0)
        xr = domain.clip(2.0 * centroid - sim[-1])
        fr = fun(xr)
        if fr < fs[0]:
            xe = domain.clip(3.0 * centroid - 2.0 * sim[-1])
            fe = fun(xe)
            sim[-1], fs[-1] = (xe, fe) if fe < fr else (xr, fr)
            continue
        if fr < fs[-2]:
            sim[-1], fs[-1] = xr, fr
            continue
        if fr < fs[-1]:
            xc = domain.clip(centroid + 0.5 * (xr - centroid))
            fc = fun(xc)
            accept = fc <= fr
        else:
            xc = domain.clip(centroid + 0.5 * (sim[-1] - centroid))
            fc = fun(xc)
            accept = fc < fs[-1]
        if accept:
            sim[-1], fs[-1] = xc, fc
            continue
        sim[1:] = domain.clip(sim[0] + 0.5 * (sim[1:] - sim[0]))
        fs[1:] = [fun(v) for v in sim[1:]]

    best = int(np.argmin(fs))
    return sim[best].copy(), float(fs[best]), it, converged, evals


def minimize_general(objective, theta0, domain: Box, tol_x: float = 1e-8, tol_f: float = 1e-12,
                     max_iter: int | None = None, restarts: int = 0, seed: int | None = 0,
                     initial_step=None, strict: bool = False) -> EstimateResult:
    """Minimise ``objective`` over the box ``domain`` by Nelder-Mead.

    Parameters
    ----------
    objective : callable
        ``theta -> float``; NaN or infinite values raise :class:`NonFiniteError`.
    theta0 : array_like
        Starting point, inside ``domain``.
    tol_x : float
        Convergence requires the simplex diameter (max-norm) to be below
        ``tol_x * (1 + ||theta_best||)``.
    tol_f : float
        ... and the spread of objective values to be below ``tol_f``.
    max_iter : int, optional
        Iteration budget per run, default ``2000 * p``.
    restarts : int
        Extra runs from seeded perturbations of ``theta0``; the best run wins.
    initial_step : array_like, optional
        Initial simplex edge per coordinate.  Default ``0.05 |theta0_i|``,
        or ``0.00025`` for zero coordinates.
    strict : bool
        Raise :class:`MaxIterError` when the budget runs out instead of
        warning and returning the best point with ``converged=False``.
    """
    theta0 = domain.check(theta0)
    p = theta0.size
    max_iter = 2000 * p if max_iter is None else max_iter
    step = None if initial_step is None else np.broadcast_to(np.asarray(initial_step, float), (p,))

    starts = [theta0]
    if restarts:
        rng = np.random.default_rng(seed)
        for _ in range(restarts):
            starts.append(domain.clip(theta0 + rng.normal(0.0, 0.1 * (1.0 + np.abs(theta0)))))

    best = None
    total_evals = 0
    for start in starts:
        run = _nelder_mead(objective, start, domain, tol_x, tol_f, max_iter, step)
        total_evals += run[4]
        if best is None or run[1] < best[1]:
            best = run
    theta, fval, it, converged, _ = best
    result = EstimateResult(theta, fval, "NelderMead", iterations=it, converged=converged,
                            seed=seed, theta0=theta0, evaluations=total_evals)
    if not converged:
        msg = f"Nelder-Mead stopped after {it} iterations without converging"
        if strict:
            raise MaxIterError(msg, result)
        warnings.warn(msg, RuntimeWarning, stacklevel=2)
    return result


class PushforwardMMDObjective:
    """``theta -> MMD^2_V(data, G(theta, Y))`` with fixed base draws ``Y`` (common random numbers).

    The data-data term is computed once.
    """

    def __init__(self, kernel, xs, model, m: int, seed: int = 0):
        self.kernel = kernel
        self.X = as_samples(xs)
        if self.X.shape[1] != model.d:
            raise ShapeError(f"data have d={self.X.shape[1]}, the model has d={model.d}")
        self.model = model
        self.m = int(m)
        self.seed = seed
        self._xx = _within(kernel, self.X, "V")

    def __call__(self, theta) -> float:
        Y = self.model.sample(theta, self.m, self.seed).samples
        return float(self._xx + _within(self.kernel, Y, "V") - 2.0 * _cross_mean(self.kernel, self.X, Y))


def estimate_mmd_pushforward(model, kernel, xs, m: int | None = None, seed: int = 0,
                             theta0=None, **opts) -> EstimateResult:
    """Minimum MMD estimator for a pushforward model; ``m`` defaults to ``max(n, 1024)``."""
    X = as_samples(xs)
    m = max(X.shape[0], 1024) if m is None else m
    objective = PushforwardMMDObjective(kernel, X, model, m, seed)
    theta0 = model.domain.midpoint() if theta0 is None else np.asarray(theta0, dtype=float)
    opts.setdefault("seed", seed)
    result = minimize_general(objective, theta0, model.domain, **opts)
    result.seed = seed
    result.info["model_samples"] = m
    return result
