"""Parametric statistical models.

Three kinds are provided, each exposing only what estimation needs:

* :class:`ExponentialFamily` -- canonical family ``p(x) ∝ exp(<theta, t(x)> + b(x))``
  given through ``grad_t`` and ``grad_b``; the score is linear in ``theta``.
  The log-partition function is never evaluated.
* :class:`ScoreModel` -- any model known through its score ``grad_x log p``.
* :class:`PushforwardModel` -- a generator ``G(theta, y)`` applied to base
  draws ``y``, sampled with common random numbers.

Array conventions: points are rows of an ``(n, d)`` array, ``grad_t``
returns ``(n, d, p)`` with ``[i, k, j] = d t_j / d x_k`` at ``x_i``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .data import Dataset, as_samples
from .errors import DimensionError, DomainError

__all__ = [
    "Box",
    "ExponentialFamily",
    "PushforwardModel",
    "ScoreModel",
    "gaussian_location_scale_instance",
    "gaussian_mean_sd_instance",
    "location_model",
    "moment_to_natural",
    "natural_to_moment",
]

logger = logging.getLogger(__name__)

DEFAULT_BOUND = 1e10


@dataclass(frozen=True)
class Box:
    """Axis-aligned parameter domain ``lower <= theta <= upper``."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.array(self.lower, dtype=float).ravel()
        hi = np.array(self.upper, dtype=float).ravel()
        if lo.shape != hi.shape:
            raise DimensionError("box bounds have different lengths")
        if not np.all(np.isfinite(lo)) or not np.all(np.isfinite(hi)):
            raise DomainError("box bounds must be finite")
        if np.any(lo > hi):
            raise DomainError("box lower bound exceeds upper bound")
        lo.setflags(write=False)
        hi.setflags(write=False)
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @classmethod
    def default(cls, p: int) -> "Box":
        logger.warning("no parameter bounds given; using [-1e10, 1e10]^%d, "
                       "the asymptotic theory assumes a bounded domain", p)
        return cls(np.full(p, -DEFAULT_BOUND), np.full(p, DEFAULT_BOUND))

    @property
    def p(self) -> int:
        return self.lower.size

    def contains(self, theta) -> bool:
        theta = np.asarray(theta, dtype=float)
        return bool(np.all(theta >= self.lower) and np.all(theta <= self.upper))

    def clip(self, theta) -> np.ndarray:
        return np.clip(np.asarray(theta, dtype=float), self.lower, self.upper)

    def midpoint(self) -> np.ndarray:
        return 0.5 * (self.lower + self.upper)

    def check(self, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=float).ravel()
        if theta.size != self.p:
            raise DimensionError(f"theta has {theta.size} entries, the model has p={self.p}")
        if not np.all(np.isfinite(theta)):
            raise DomainError("theta has non-finite entries")
        if not self.contains(theta):
            raise DomainError(f"theta={theta.tolist()} lies outside the parameter box")
        return theta


def _as_box(p, lower, upper):
    if lower is None and upper is None:
        return Box.default(p)
    lo = np.full(p, -DEFAULT_BOUND) if lower is None else np.broadcast_to(lower, (p,))
    hi = np.full(p, DEFAULT_BOUND) if upper is None else np.broadcast_to(upper, (p,))
    return Box(lo, hi)


def _check_points(X, d):
    X = as_samples(X)
    if X.shape[1] != d:
        raise DimensionError(f"model has d={d}, points have d={X.shape[1]}")
    return X


@dataclass(frozen=True, eq=False)
class ExponentialFamily:
    """Canonical exponential family known through ``t``, ``b`` and their gradients.

    ``sampler(theta, m, rng)`` is optional and only used for simulations.
    """

    d: int
    p: int
    t: Callable
    grad_t: Callable
    b: Callable
    grad_b: Callable
    domain: Box
    sampler: Callable | None = None
    name: str = "exponential-family"

    def score(self, X, theta) -> np.ndarray:
        """``grad_x log p_theta(x) = grad_t(x) theta + grad_b(x)`` for every row."""
        X = _check_points(X, self.d)
        theta = np.asarray(theta, dtype=float).ravel()
        if theta.size != self.p:
            raise DimensionError(f"theta has {theta.size} entries, the model has p={self.p}")
        return self.grad_t(X) @ theta + self.grad_b(X)

    def sample(self, theta, m: int, seed=None) -> Dataset:
        if self.sampler is None:
            raise NotImplementedError(f"{self.name} has no exact sampler")
        theta = self.domain.check(theta)
        rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
        return Dataset(self.sampler(theta, m, rng))


@dataclass(frozen=True, eq=False)
class ScoreModel:
    """A model given only by its score function ``score(X, theta) -> (n, d)``."""

    d: int
    p: int
    score_fn: Callable
    domain: Box
    name: str = "score-model"

    def score(self, X, theta):
        X = _check_points(X, self.d)
        return np.asarray(self.score_fn(X, np.asarray(theta, dtype=float).ravel()), dtype=float)


@dataclass(frozen=True, eq=False)
class PushforwardModel:
    """``X = G(theta, Y)`` with ``Y`` drawn from a standard normal or uniform base.

    The same ``seed`` always yields the same base draws, whatever ``theta``.
    """

    d: int
    p: int
    latent_dim: int
    generator: Callable
    domain: Box
    base: str = "normal"
    name: str = "pushforward"

    def __post_init__(self):
        if self.base not in ("normal", "uniform"):
            raise DomainError(f"unknown base distribution {self.base!r}")

    def base_draws(self, m: int, seed) -> np.ndarray:
        if m < 1:
            raise DomainError(f"sample size must be >= 1, got {m}")
        rng = np.random.default_rng(seed)
        if self.base == "normal":
            return rng.standard_normal((m, self.latent_dim))
        return rng.random((m, self.latent_dim))

    def sample(self, theta, m: int, seed=None) -> Dataset:
        theta = self.domain.check(theta)
        out = np.asarray(self.generator(theta, self.base_draws(m, seed)), dtype=float)
        if out.shape != (m, self.d):
            raise DimensionError(f"generator returned shape {out.shape}, expected {(m, self.d)}")
        return Dataset(out)


def location_model(d: int = 1, lower=None, upper=None) -> PushforwardModel:
    """``G(theta, y) = y + theta`` with standard normal ``y``."""
    return PushforwardModel(d=d, p=d, latent_dim=d, generator=lambda th, y: y + th,
                            domain=_as_box(d, lower, upper), name="pushforward-location")


def natural_to_moment(theta):
    """Natural parameters ``(mu/sigma^2, 1/sigma^2)`` (stacked per coordinate) to ``(mu, sigma)``."""
    theta = np.asarray(theta, dtype=float)
    d = theta.size // 2
    eta1, eta2 = theta[:d], theta[d:]
    if np.any(eta2 <= 0):
        raise DomainError("precision parameters must be positive")
    return eta1 / eta2, 1.0 / np.sqrt(eta2)


def moment_to_natural(mu, sigma):
    mu = np.atleast_1d(np.asarray(mu, dtype=float))
    sigma = np.atleast_1d(np.asarray(sigma, dtype=float))
    if np.any(sigma <= 0):
        raise DomainError("standard deviations must be positive")
    return np.concatenate([mu / sigma**2, 1.0 / sigma**2])


def gaussian_location_scale_instance(d: int = 1, lower=None, upper=None) -> ExponentialFamily:
    """Independent ``N(mu_k, sigma_k^2)`` coordinates in natural parameters.

    ``t(x) = (x_1..x_d, -x_1^2/2..-x_d^2/2)`` and ``b = 0``, so
    ``theta = (mu/sigma^2, 1/sigma^2)`` and the score is ``theta_1 - theta_2 * x``
    coordinatewise.  Use :func:`natural_to_moment` / :func:`moment_to_natural`
    to convert.  The default box keeps the precisions in ``[1e-10, 1e10]``.
    """
    if d < 1:
        raise DomainError("dimension must be >= 1")
    eye = np.eye(d)

    def t(X):
        X = as_samples(X)
        return np.hstack([X, -0.5 * X**2])

    def grad_t(X):
        X = as_samples(X)
        n = X.shape[0]
        G = np.zeros((n, d, 2 * d))
        G[:, :, :d] = eye
        G[:, np.arange(d), d + np.arange(d)] = -X
        return G

    def b(X):
        return np.zeros(as_samples(X).shape[0])

    def grad_b(X):
        return np.zeros_like(as_samples(X))

    def sampler(theta, m, rng):
        mu, sigma = natural_to_moment(theta)
        return mu + sigma * rng.standard_normal((m, d))

    if lower is None and upper is None:
        lower = np.concatenate([np.full(d, -DEFAULT_BOUND), np.full(d, 1e-10)])
        upper = np.full(2 * d, DEFAULT_BOUND)
    return ExponentialFamily(d=d, p=2 * d, t=t, grad_t=grad_t, b=b, grad_b=grad_b,
                             domain=_as_box(2 * d, lower, upper), sampler=sampler,
                             name="gaussian-natparams")


def gaussian_mean_sd_instance(d: int = 1, lower=None, upper=None) -> ScoreModel:
    """The same Gaussian family parametrised by ``(mu, sigma)``; score ``(mu - x) / sigma^2``."""

    def score(X, theta):
        mu, sigma = theta[:d], theta[d:]
        return (mu - X) / sigma**2

    if lower is None and upper is None:
        lower = np.concatenate([np.full(d, -DEFAULT_BOUND), np.full(d, 1e-5)])
        upper = np.full(2 * d, DEFAULT_BOUND)
    return ScoreModel(d=d, p=2 * d, score_fn=score, domain=_as_box(2 * d, lower, upper),
                      name="gaussian-mean-sd")
