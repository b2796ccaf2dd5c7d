"""Plug-in asymptotic covariance and confidence sets.

For a minimum kernel discrepancy estimator with ``theta``-dependent kernel
``k_theta``,

    Gamma_n = 1/2 * mean_{i,j} d^2/dtheta^2 k_theta(x_i, x_j)
    Sigma_n = sample covariance over i of mean_j d/dtheta k_theta(x_i, x_j)

both evaluated at ``theta_n``; ``sqrt(n) (theta_n - theta_*)`` is then
approximately ``N(0, Gamma^-1 Sigma Gamma^-T)``.  Two pairings supply the
derivatives: :class:`GMMPairing` (feature kernel, identified moments) and
:class:`SteinPairing` (Stein kernel over a canonical exponential family).
The pushforward MMD route has no pairing.

``Sigma_n`` uses divisor ``n - 1``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from .data import as_samples
from .errors import ModelKindError, ShapeError, SingularError
from .kernels import SteinKernel
from .models import ExponentialFamily
from .special import chi2_quantile

__all__ = [
    "AsymptoticCovariance",
    "ConfidenceSet",
    "GMMPairing",
    "SteinPairing",
    "asymptotic_covariance",
    "confidence_set",
    "gamma_hat",
    "inv_sqrt_psd",
    "sandwich",
    "sigma_hat",
]

logger = logging.getLogger(__name__)

SINGULAR_TOL = 1e-12
FLOOR = 1e-12


class GMMPairing:
    """Feature kernel with ``k_theta(x, y) = <phi(x) - theta, phi(y) - theta>``.

    ``d/dtheta k_theta = 2 theta - phi(x) - phi(y)`` and the Hessian is ``2 I``.
    """

    def __init__(self, feature_map):
        self.feature_map = feature_map

    def dtheta_row_means(self, X, theta):
        F = self.feature_map(as_samples(X))
        return 2.0 * np.asarray(theta, dtype=float) - F - F.mean(axis=0)

    def hessian_mean(self, X, theta):
        p = np.asarray(theta).size
        return 2.0 * np.eye(p)


class SteinPairing:
    """Stein kernel over a canonical exponential family."""

    def __init__(self, stein_kernel: SteinKernel):
        if not isinstance(stein_kernel.model, ExponentialFamily):
            raise ModelKindError("uncertainty quantification needs an exponential family model")
        self.stein_kernel = stein_kernel

    def dtheta_row_means(self, X, theta):
        return self.stein_kernel.dtheta_row_means(X, theta)

    def hessian_mean(self, X, theta):
        return self.stein_kernel.hessian_mean(X)


def _pairing(obj):
    if isinstance(obj, (GMMPairing, SteinPairing)):
        return obj
    if isinstance(obj, SteinKernel):
        return SteinPairing(obj)
    raise ModelKindError(
        f"no parameter derivatives available for {type(obj).__name__}; Gamma_n and Sigma_n "
        "exist for the GMM and exponential-family Stein pathways only")


def gamma_hat(pairing, xs, theta) -> np.ndarray:
    """Half the V-statistic of the parameter Hessian of ``k_theta``, exactly symmetric."""
    pairing = _pairing(pairing)
    G = 0.5 * np.asarray(pairing.hessian_mean(as_samples(xs), theta), dtype=float)
    return 0.5 * (G + G.T)


def sigma_hat(pairing, xs, theta) -> np.ndarray:
    """Sample covariance (divisor ``n - 1``) of the row means of ``d/dtheta k_theta``."""
    pairing = _pairing(pairing)
    X = as_samples(xs)
    n = X.shape[0]
    if n < 2:
        raise ShapeError("Sigma_n needs n >= 2")
    g = np.asarray(pairing.dtheta_row_means(X, theta), dtype=float).reshape(n, -1)
    centered = g - g.mean(axis=0)
    S = centered.T @ centered / (n - 1)
    return 0.5 * (S + S.T)


def sandwich(gamma, sigma) -> np.ndarray:
    """``Gamma^-1 Sigma Gamma^-T`` by LU solves, symmetrised."""
    gamma = np.atleast_2d(np.asarray(gamma, dtype=float))
    sigma = np.atleast_2d(np.asarray(sigma, dtype=float))
    p = gamma.shape[0]
    eig = np.min(np.abs(np.linalg.eigvals(gamma)))
    if eig <= SINGULAR_TOL * abs(np.trace(gamma)) / p:
        raise SingularError(f"Gamma is singular (smallest |eigenvalue| {eig:.3g})", min_eigenvalue=float(eig))
    lu = lu_factor(gamma)
    left = lu_solve(lu, sigma)
    S = lu_solve(lu, left.T).T
    return 0.5 * (S + S.T)


def inv_sqrt_psd(sigma) -> np.ndarray:
    """Symmetric inverse square root with eigenvalues floored at ``1e-12 * max``."""
    sigma = np.atleast_2d(np.asarray(sigma, dtype=float))
    p = sigma.shape[0]
    w, V = np.linalg.eigh(0.5 * (sigma + sigma.T))
    if w[0] <= SINGULAR_TOL * np.trace(sigma) / p:
        raise SingularError(f"Sigma_n is not positive definite (min eigenvalue {w[0]:.3g})",
                            min_eigenvalue=float(w[0]))
    floor = FLOOR * w[-1]
    if np.any(w < floor):
        logger.warning("flooring %d small eigenvalue(s) of Sigma_n", int(np.sum(w < floor)))
        w = np.maximum(w, floor)
    return (V / np.sqrt(w)) @ V.T


@dataclass(frozen=True)
class AsymptoticCovariance:
    gamma_n: np.ndarray
    sigma_n: np.ndarray
    sandwich: np.ndarray
    gamma_min_eig: float

    def to_dict(self):
        return {"gamma_n": self.gamma_n.tolist(), "sigma_n": self.sigma_n.tolist(),
                "sandwich": self.sandwich.tolist(), "gamma_min_eig": self.gamma_min_eig}


def asymptotic_covariance(pairing, xs, theta) -> AsymptoticCovariance:
    G = gamma_hat(pairing, xs, theta)
    S = sigma_hat(pairing, xs, theta)
    return AsymptoticCovariance(G, S, sandwich(G, S), float(np.linalg.eigvalsh(G)[0]))


@dataclass(frozen=True)
class ConfidenceSet:
    """Ellipsoid ``{theta : n ||shape (theta - center)||^2 <= threshold}``.

    ``shape`` is ``Sigma_n^{-1/2} Gamma_n`` and ``threshold`` the chi-squared
    quantile at ``level``.
    """

    center: np.ndarray
    shape: np.ndarray
    level: float
    threshold: float
    n: int
    covariance: np.ndarray | None = None

    def statistic(self, theta) -> float:
        z = self.shape @ (np.asarray(theta, dtype=float).ravel() - self.center)
        return float(self.n * (z @ z))

    def contains(self, theta) -> bool:
        return self.statistic(theta) <= self.threshold

    def intervals(self) -> np.ndarray:
        """Per-coordinate intervals ``theta_i +- z sqrt(C_ii / n)`` at the same level, shape ``(p, 2)``."""
        if self.covariance is None:
            raise ValueError("no covariance attached to this confidence set")
        half = np.sqrt(chi2_quantile(1, self.level) * np.diag(self.covariance) / self.n)
        return np.column_stack([self.center - half, self.center + half])

    def to_dict(self):
        out = {"center": self.center.tolist(), "shape": self.shape.tolist(),
               "level": self.level, "threshold": self.threshold, "n": self.n}
        if self.covariance is not None:
            out["intervals"] = self.intervals().tolist()
        return out


def confidence_set(theta_n, cov: AsymptoticCovariance, n: int, gamma: float) -> ConfidenceSet:
    theta_n = np.asarray(theta_n, dtype=float).ravel()
    shape = inv_sqrt_psd(cov.sigma_n) @ cov.gamma_n
    return ConfidenceSet(theta_n, shape, float(gamma), chi2_quantile(theta_n.size, gamma), int(n),
                         covariance=cov.sandwich)
