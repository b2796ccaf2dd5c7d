"""Squared kernel discrepancies between empirical measures.

``D_k(P, Q)^2 = ||mu_k(P) - mu_k(Q)||^2`` expands into three double sums of
the kernel.  The V form keeps the diagonal terms and is a true squared
RKHS distance; the U form drops them from the within-sample sums and can be
slightly negative.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .data import as_samples
from .errors import DegenerateError, DimensionError, DomainError, ShapeError
from .vstat import BivariateStatistic, u_statistic, v_statistic

__all__ = [
    "DiscrepancyValue",
    "WitnessFunction",
    "gmm_discrepancy_squared",
    "ksd_squared",
    "mmd_squared",
    "witness_eval",
]

WITNESS_TOL = 1e-12


@dataclass(frozen=True)
class DiscrepancyValue:
    """A squared discrepancy and its clamped square root.

    ``squared`` is reported raw, small negative rounding included.
    """

    squared: float
    kind: str
    n: int
    m: int | None = None

    @property
    def value(self) -> float:
        return math.sqrt(max(self.squared, 0.0))

    def to_dict(self):
        return {"squared": self.squared, "value": self.value, "kind": self.kind,
                "n": self.n, "m": self.m}


def _check_kind(kind):
    kind = kind.upper()
    if kind not in ("V", "U"):
        raise DomainError(f"estimator kind must be 'V' or 'U', got {kind!r}")
    return kind


def _within(kernel, X, kind):
    n = X.shape[0]
    total = kernel.gram_sum(X)
    if kind == "V":
        return total / n**2
    return (total - kernel.diag(X).sum()) / (n * (n - 1))


def _cross_mean(kernel, X, Y):
    # canonical argument order so that swapping the samples is bit-exact
    if (Y.shape[0], Y.tobytes()) < (X.shape[0], X.tobytes()):
        X, Y = Y, X
    return kernel.gram_sum(X, Y) / (X.shape[0] * Y.shape[0])


def mmd_squared(kernel, xs, ys, kind: str = "V") -> DiscrepancyValue:
    """Squared MMD between the empirical measures of ``xs`` and ``ys``."""
    kind = _check_kind(kind)
    X, Y = as_samples(xs), as_samples(ys)
    if X.shape[1] != Y.shape[1]:
        raise DimensionError(f"dimension mismatch: {X.shape[1]} vs {Y.shape[1]}")
    n, m = X.shape[0], Y.shape[0]
    if kind == "U" and min(n, m) < 2:
        raise ShapeError("U-statistic MMD needs at least two points per sample")
    cross = _cross_mean(kernel, X, Y)
    value = _within(kernel, X, kind) + _within(kernel, Y, kind) - 2.0 * cross
    return DiscrepancyValue(float(value), kind, n, m)


def gmm_discrepancy_squared(phi, xs, model_moments) -> float:
    """``||mean_i phi(x_i) - model_moments||^2``."""
    F = phi(as_samples(xs))
    mom = np.asarray(model_moments, dtype=float).ravel()
    if mom.size != F.shape[1]:
        raise DimensionError(f"moments have length {mom.size}, features have p={F.shape[1]}")
    gap = F.mean(axis=0) - mom
    return float(gap @ gap)


def ksd_squared(sk, xs, theta, kind: str = "V") -> DiscrepancyValue:
    """Squared kernel Stein discrepancy of ``xs`` against the model at ``theta``."""
    kind = _check_kind(kind)
    stat = BivariateStatistic(sk.block(theta), xs)
    n = stat.samples.shape[0]
    value = v_statistic(stat) if kind == "V" else u_statistic(stat)
    return DiscrepancyValue(float(value), kind, n, None)


class WitnessFunction:
    """Unit-norm RKHS function attaining the MMD between two samples.

    ``f(z) = [mean_i k(x_i, z) - mean_j k(y_j, z)] / D_k(P_n, Q_m)``.
    """

    def __init__(self, kernel, xs, ys):
        self.kernel = kernel
        self.x_samples = as_samples(xs)
        self.y_samples = as_samples(ys)
        D = mmd_squared(kernel, self.x_samples, self.y_samples, "V").value
        if D <= WITNESS_TOL:
            raise DegenerateError(f"discrepancy {D:.3g} is zero; the witness function is undefined")
        self.normalizer = D

    def __call__(self, Z) -> np.ndarray:
        Z = as_samples(Z)
        kx = self.kernel.gram(Z, self.x_samples).mean(axis=1)
        ky = self.kernel.gram(Z, self.y_samples).mean(axis=1)
        return (kx - ky) / self.normalizer

    def coefficients(self):
        """Weights ``a`` with ``f = sum_l a_l k(z_l, .)`` over the stacked atoms ``[xs; ys]``."""
        n, m = self.x_samples.shape[0], self.y_samples.shape[0]
        return np.concatenate([np.full(n, 1.0 / n), np.full(m, -1.0 / m)]) / self.normalizer

    def rkhs_norm(self) -> float:
        """``sqrt(a^T K a)`` over the joint Gram matrix of all atoms."""
        atoms = np.vstack([self.x_samples, self.y_samples])
        a = self.coefficients()
        return math.sqrt(max(float(a @ self.kernel.gram(atoms) @ a), 0.0))


def witness_eval(w: WitnessFunction, z) -> float:
    """Witness value at a single point."""
    return float(w(np.asarray(z, dtype=float).reshape(1, -1))[0])
