"""Kernels: radial base kernels, finite-rank feature kernels, the
distribution-centred (embedded) kernel, and the Langevin Stein kernel.

Radial kernels are written as ``c(x, y) = f(u)`` with ``u = ||x - y||^2``;
the profile ``f`` and its first two derivatives are coded by hand, which
gives every spatial derivative the Stein kernel needs:

    grad_x c = 2 f'(u) (x - y)
    grad_y c = -2 f'(u) (x - y)
    div_x grad_y c = -2 d f'(u) - 4 u f''(u)
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.spatial.distance import cdist, pdist, squareform

from .data import as_samples
from .errors import DimensionError, DomainError, ModelKindError, ScoreError
from .models import ExponentialFamily

__all__ = [
    "EmbeddedKernel",
    "FeatureKernel",
    "GaussianRBF",
    "IdentityFeatures",
    "InverseMultiquadric",
    "Kernel",
    "RadialDerivatives",
    "RadialKernel",
    "RandomFourierFeatures",
    "SteinKernel",
    "gram",
    "median_heuristic",
]

ROW_BLOCK = 512


def _pair(X, Y):
    X = as_samples(X)
    Y = X if Y is None else as_samples(Y)
    if X.shape[1] != Y.shape[1]:
        raise DimensionError(f"dimension mismatch: {X.shape[1]} vs {Y.shape[1]}")
    return X, Y


def _point(x):
    x = np.asarray(x, dtype=float)
    return x.reshape(1, -1)


def _sqdist(X, Y, same):
    if same:
        # each unordered pair once, mirrored: exact symmetry
        return squareform(pdist(X, "sqeuclidean")) if X.shape[0] > 1 else np.zeros((1, 1))
    return cdist(X, Y, "sqeuclidean")


class Kernel:
    """Base class: subclasses implement :meth:`gram`."""

    def gram(self, X, Y=None) -> np.ndarray:
        raise NotImplementedError

    def __call__(self, x, y) -> float:
        return float(self.gram(_point(x), _point(y))[0, 0])

    def diag(self, X) -> np.ndarray:
        X = as_samples(X)
        return np.array([self.gram(X[i:i + 1], X[i:i + 1])[0, 0] for i in range(X.shape[0])])

    def gram_sum(self, X, Y=None) -> float:
        """``sum_{i,j} k(x_i, y_j)`` without holding the whole Gram matrix."""
        X, Y = _pair(X, Y)
        return float(sum(self.gram(X[lo:lo + ROW_BLOCK], Y).sum()
                         for lo in range(0, X.shape[0], ROW_BLOCK)))


def gram(kernel, xs, ys=None) -> np.ndarray:
    """Gram matrix ``K[i, j] = k(x_i, y_j)``; exactly symmetric when ``ys`` is omitted or is ``xs``."""
    if ys is xs:
        ys = None
    return kernel.gram(xs, ys)


class RadialDerivatives(NamedTuple):
    c: np.ndarray         # (a, b)
    diff: np.ndarray      # (a, b, d), x_i - y_j
    weight: np.ndarray    # (a, b), 2 f'(u): grad_x c = weight * diff
    div: np.ndarray       # (a, b), div_x grad_y c

    @property
    def grad_x(self):
        return self.weight[..., None] * self.diff

    @property
    def grad_y(self):
        return -self.weight[..., None] * self.diff


class RadialKernel(Kernel):
    """Kernel of the form ``f(||x - y||^2)`` with analytic derivatives."""

    def profile(self, u):
        raise NotImplementedError

    def profile_inplace(self, u):
        """Overwrite a freshly allocated squared-distance array with ``f(u)``."""
        u[...] = self.profile(u)
        return u

    def profile_d1(self, u):
        raise NotImplementedError

    def profile_d2(self, u):
        raise NotImplementedError

    def gram(self, X, Y=None):
        same = Y is None or Y is X
        X, Y = _pair(X, Y)
        return self.profile_inplace(_sqdist(X, Y, same))

    def diag(self, X):
        return np.full(as_samples(X).shape[0], float(self.profile(np.zeros(1))[0]))

    def gram_sum(self, X, Y=None):
        same = Y is None or Y is X
        X, Y = _pair(X, Y)
        if same:
            n = X.shape[0]
            off = self.profile_inplace(pdist(X, "sqeuclidean")).sum() if n > 1 else 0.0
            return float(2.0 * off + n * self.profile(np.zeros(1))[0])
        return float(sum(self.profile_inplace(cdist(X[lo:lo + ROW_BLOCK], Y, "sqeuclidean")).sum()
                         for lo in range(0, X.shape[0], ROW_BLOCK)))

    def derivatives(self, X, Y=None) -> RadialDerivatives:
        X, Y = _pair(X, Y)
        diff = X[:, None, :] - Y[None, :, :]
        u = np.einsum("ijk,ijk->ij", diff, diff)
        d1 = self.profile_d1(u)
        div = -2.0 * X.shape[1] * d1 - 4.0 * u * self.profile_d2(u)
        return RadialDerivatives(self.profile(u), diff, 2.0 * d1, div)


@dataclass(frozen=True)
class GaussianRBF(RadialKernel):
    """``exp(-||x - y||^2 / (2 l^2))``."""

    lengthscale: float = 1.0

    def __post_init__(self):
        if not self.lengthscale > 0:
            raise DomainError(f"lengthscale must be positive, got {self.lengthscale}")

    def profile(self, u):
        return np.exp(-0.5 * np.asarray(u) / self.lengthscale**2)

    def profile_inplace(self, u):
        u *= -0.5 / self.lengthscale**2
        return np.exp(u, out=u)

    def profile_d1(self, u):
        return -0.5 / self.lengthscale**2 * self.profile(u)

    def profile_d2(self, u):
        return 0.25 / self.lengthscale**4 * self.profile(u)


@dataclass(frozen=True)
class InverseMultiquadric(RadialKernel):
    """``(1 + ||x - y||^2 / scale^2) ** (-exponent)`` with ``0 < exponent < 1``."""

    scale: float = 1.0
    exponent: float = 0.5

    def __post_init__(self):
        if not self.scale > 0:
            raise DomainError(f"scale must be positive, got {self.scale}")
        if not 0 < self.exponent < 1:
            raise DomainError(f"exponent must lie in (0, 1), got {self.exponent}")

    def _base(self, u):
        return 1.0 + np.asarray(u) / self.scale**2

    def profile(self, u):
        return self._base(u) ** (-self.exponent)

    def profile_inplace(self, u):
        u /= self.scale**2
        u += 1.0
        return np.power(u, -self.exponent, out=u)

    def profile_d1(self, u):
        b = self.exponent
        return -b / self.scale**2 * self._base(u) ** (-b - 1.0)

    def profile_d2(self, u):
        b = self.exponent
        return b * (b + 1.0) / self.scale**4 * self._base(u) ** (-b - 2.0)


@dataclass(frozen=True)
class IdentityFeatures:
    """``phi(x) = x``."""

    d: int | None = None

    def dim_out(self, d_in):
        return d_in

    def __call__(self, X):
        X = as_samples(X)
        if self.d is not None and X.shape[1] != self.d:
            raise DimensionError(f"feature map expects d={self.d}, got {X.shape[1]}")
        return X


@dataclass(frozen=True, eq=False)
class RandomFourierFeatures:
    """``phi_j(x) = sqrt(2/p) cos(<w_j, x> + b_j)``, ``w_j ~ N(0, I/l^2)``, ``b_j ~ U[0, 2 pi)``."""

    d: int
    p: int = 100
    lengthscale: float = 1.0
    seed: int = 0
    frequencies: np.ndarray = field(init=False, repr=False)
    phases: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.d < 1 or self.p < 1:
            raise DomainError("feature map needs d >= 1 and p >= 1")
        if not self.lengthscale > 0:
            raise DomainError(f"lengthscale must be positive, got {self.lengthscale}")
        rng = np.random.default_rng(self.seed)
        w = rng.normal(0.0, 1.0 / self.lengthscale, size=(self.p, self.d))
        b = rng.uniform(0.0, 2.0 * np.pi, size=self.p)
        w.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "frequencies", w)
        object.__setattr__(self, "phases", b)

    def dim_out(self, d_in):
        return self.p

    def __call__(self, X):
        X = as_samples(X)
        if X.shape[1] != self.d:
            raise DimensionError(f"feature map expects d={self.d}, got {X.shape[1]}")
        return np.sqrt(2.0 / self.p) * np.cos(X @ self.frequencies.T + self.phases)


@dataclass(frozen=True)
class FeatureKernel(Kernel):
    """Finite-rank kernel ``<phi(x), phi(y)>``."""

    feature_map: object

    def gram(self, X, Y=None):
        same = Y is None or Y is X
        X, Y = _pair(X, Y)
        FX = self.feature_map(X)
        if same:
            K = FX @ FX.T
            return np.triu(K) + np.triu(K, 1).T
        return FX @ self.feature_map(Y).T

    def diag(self, X):
        FX = self.feature_map(as_samples(X))
        return np.einsum("ij,ij->i", FX, FX)

    def gram_sum(self, X, Y=None):
        # finite rank: sum_ij <phi(x_i), phi(y_j)> = <sum phi(x_i), sum phi(y_j)>
        same = Y is None or Y is X
        X, Y = _pair(X, Y)
        sx = self.feature_map(X).sum(axis=0)
        sy = sx if same else self.feature_map(Y).sum(axis=0)
        return float(sx @ sy)


class EmbeddedKernel(Kernel):
    """The kernel centred at a sampled distribution ``Q``.

    ``k_Q(x, y) = k(x, y) - E_Q k(Z, y) - E_Q k(x, Z) + E_Q E_Q k(Z, Z')``
    with ``Q`` the empirical measure of ``q_samples``.
    """

    def __init__(self, base: Kernel, q_samples):
        self.base = base
        self.q_samples = as_samples(q_samples)
        self._qq = float(np.mean(base.gram(self.q_samples)))

    def _qmean(self, X):
        return np.mean(self.base.gram(X, self.q_samples), axis=1)

    def gram(self, X, Y=None):
        same = Y is None or Y is X
        X, Y = _pair(X, Y)
        if X.shape[1] != self.q_samples.shape[1]:
            raise DimensionError(f"Q samples have d={self.q_samples.shape[1]}, points have d={X.shape[1]}")
        mx = self._qmean(X)
        my = mx if same else self._qmean(Y)
        K = self.base.gram(X, None if same else Y)
        return K - mx[:, None] - my[None, :] + self._qq


class SteinKernel(Kernel):
    """Langevin Stein kernel built from a radial base kernel and a model score.

    ``k(x, y; theta) = div_x grad_y c + <s(x), grad_y c> + <s(y), grad_x c> + c <s(x), s(y)>``
    where ``s = grad_x log p_theta`` is the model score.  Integrates to zero
    in each argument under ``P_theta``, and needs no normalising constant.
    """

    def __init__(self, base: RadialKernel, model):
        if not isinstance(base, RadialKernel):
            raise ModelKindError("Stein kernels need a twice-differentiable radial base kernel")
        if not callable(getattr(model, "score", None)):
            raise ModelKindError(f"{type(model).__name__} has no score function; Stein kernels need one")
        self.base = base
        self.model = model

    def _scores(self, X, theta):
        try:
            s = np.asarray(self.model.score(X, theta), dtype=float)
        except (ValueError, FloatingPointError, ZeroDivisionError) as exc:
            raise ScoreError(f"model score failed: {exc}") from exc
        if s.shape != X.shape:
            raise DimensionError(f"score has shape {s.shape}, expected {X.shape}")
        if not np.all(np.isfinite(s)):
            raise ScoreError("model score is not finite at some points")
        return s

    def _check_dim(self, X):
        d = getattr(self.model, "d", None)
        if d is not None and X.shape[1] != d:
            raise DimensionError(f"model has d={d}, points have d={X.shape[1]}")

    def gram(self, X, Y=None, theta=None):
        if theta is None:
            raise TypeError("SteinKernel.gram requires theta")
        same = Y is None or Y is X
        X, Y = _pair(X, Y)
        self._check_dim(X)
        sx = self._scores(X, theta)
        sy = sx if same else self._scores(Y, theta)
        der = self.base.derivatives(X, Y)
        ds = sy[None, :, :] - sx[:, None, :]
        K = der.div + der.weight * np.einsum("ijk,ijk->ij", ds, der.diff) + der.c * (sx @ sy.T)
        if same:
            K = np.triu(K) + np.triu(K, 1).T
        return K

    def __call__(self, x, y, theta=None):
        return float(self.gram(_point(x), _point(y), theta=theta)[0, 0])

    def block(self, theta):
        """Block function ``(X, Y) -> gram`` at fixed ``theta``, for the V-statistic engine."""
        return lambda X, Y: self.gram(X, Y, theta=theta)

    # -- parameter derivatives (exponential families only) ---------------

    def _expfam(self) -> ExponentialFamily:
        if not isinstance(self.model, ExponentialFamily):
            raise ModelKindError("parameter derivatives need a canonical exponential family model")
        return self.model

    def dtheta_block(self, X, Y, theta):
        """``d/dtheta k(x_i, y_j; theta)``, shape ``(a, b, p)``."""
        model = self._expfam()
        X, Y = _pair(X, Y)
        self._check_dim(X)
        theta = np.asarray(theta, dtype=float)
        TX, TY = model.grad_t(X), model.grad_t(Y)
        sx, sy = model.score(X, theta), model.score(Y, theta)
        der = self.base.derivatives(X, Y)
        dT = TY[None, :, :, :] - TX[:, None, :, :]
        out = der.weight[..., None] * np.einsum("ijk,ijkl->ijl", der.diff, dT)
        out += der.c[..., None] * (np.einsum("ikl,jk->ijl", TX, sy) + np.einsum("ik,jkl->ijl", sx, TY))
        return out

    def d2theta_block(self, X, Y):
        """Hessian of ``k(x_i, y_j; theta)`` in ``theta``, shape ``(a, b, p, p)``; constant in ``theta``."""
        model = self._expfam()
        X, Y = _pair(X, Y)
        self._check_dim(X)
        A = np.einsum("ikp,jkq->ijpq", model.grad_t(X), model.grad_t(Y))
        c = self.base.gram(X, Y)
        return c[..., None, None] * (A + np.swapaxes(A, -1, -2))

    def dtheta(self, x, y, theta):
        return self.dtheta_block(_point(x), _point(y), theta)[0, 0]

    def d2theta(self, x, y):
        return self.d2theta_block(_point(x), _point(y))[0, 0]

    # -- fast V-statistic reductions for exponential families ------------

    def dtheta_row_means(self, X, theta):
        """``g_i = (1/n) sum_j d/dtheta k(x_i, x_j; theta)``, shape ``(n, p)``.

        Evaluated with Gram-matrix products, one row block at a time.
        """
        model = self._expfam()
        X = as_samples(X)
        self._check_dim(X)
        n, d = X.shape
        theta = np.asarray(theta, dtype=float)
        T = model.grad_t(X)
        S = model.score(X, theta)
        XT = X[:, :, None] * T
        out = np.empty((n, T.shape[2]))
        for lo in range(0, n, ROW_BLOCK):
            hi = min(lo + ROW_BLOCK, n)
            der = self.base.derivatives(X[lo:hi], X)
            W, C = der.weight, der.c
            w1 = W.sum(axis=1)
            acc = np.zeros((hi - lo, T.shape[2]))
            for k in range(d):
                Tk, xk = T[:, k, :], X[:, k]
                Tk_blk, xk_blk = Tk[lo:hi], xk[lo:hi, None]
                acc += xk_blk * (W @ Tk) - xk_blk * Tk_blk * w1[:, None]
                acc += -(W @ XT[:, k, :]) + Tk_blk * (W @ xk)[:, None]
                acc += Tk_blk * (C @ S[:, k])[:, None] + S[lo:hi, k, None] * (C @ Tk)
            out[lo:hi] = acc / n
        return out

    def hessian_mean(self, X):
        """``(1/n^2) sum_{i,j}`` of the parameter Hessian, i.e. ``2 * Gamma_n``."""
        model = self._expfam()
        X = as_samples(X)
        self._check_dim(X)
        n, d = X.shape
        T = model.grad_t(X)
        p = T.shape[2]
        G = np.zeros((p, p))
        for lo in range(0, n, ROW_BLOCK):
            hi = min(lo + ROW_BLOCK, n)
            C = self.base.gram(X[lo:hi], X)
            for k in range(d):
                G += T[lo:hi, k, :].T @ (C @ T[:, k, :])
        G /= n**2
        return G + G.T


def median_heuristic(X, max_rows: int = 1000, seed: int = 0) -> float:
    """Median of pairwise Euclidean distances over at most ``max_rows`` rows.

    Rows are subsampled without replacement using ``seed`` when ``n`` is
    larger than ``max_rows``.
    """
    X = as_samples(X)
    if X.shape[0] > max_rows:
        idx = np.random.default_rng(seed).choice(X.shape[0], size=max_rows, replace=False)
        X = X[np.sort(idx)]
    if X.shape[0] < 2:
        return 1.0
    med = float(np.median(pdist(X)))
    return med if med > 0 else 1.0
